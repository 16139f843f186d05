"""Command-line entry point.

Every subcommand reads its inputs, runs one analysis, and writes delimited
output (CSV with a header row, or full-precision JSON with ``--json``).
Outputs are written atomically (temp file + rename) and every run writes a
``<out>.manifest.json`` recording the subcommand, input digests, parameters,
and toolkit version; identical inputs and flags reproduce identical outputs
and manifests up to the manifest timestamp.

Exit codes: 0 success, 1 parse or validation error (including usage), 2 I/O
error, 3 internal invariant violation.  ``CHARMT_SEED`` overrides ``--seed``
where applicable.  ``--threads`` bounds worker parallelism; analyses reduce
in corpus order, so results are identical for any value.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import tempfile
import time
from pathlib import Path

from . import FORMAT_VERSION, __version__
from . import attribution, control_set, metrics, word_accuracy, zeroshot
from .corpus_io import (
    load_alignments,
    load_attributions,
    load_language_metadata,
    load_score_table,
    parse_corpus,
    serialize_corpus,
)
from .errors import CharmtError, InvariantError, ParseError, ValidationError


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _atomic_write(path: str, data: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".charmt-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(subcommand: str, args, input_paths: list[str], outputs: list[str]):
    params = {
        k: v for k, v in sorted(vars(args).items()) if k not in ("func",) and v is not None
    }
    manifest = {
        "subcommand": subcommand,
        "toolkit_version": __version__,
        "format_version": FORMAT_VERSION,
        "inputs": {p: _sha256(p) for p in sorted(set(input_paths))},
        "parameters": {k: str(v) for k, v in params.items()},
        "outputs": sorted(set(outputs)),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    _atomic_write(outputs[0] + ".manifest.json", json.dumps(manifest, indent=2) + "\n")


def _emit(args, subcommand: str, inputs: list[str], header: list[str], rows: list[list], payload):
    """Write the primary report (CSV or JSON) plus its manifest."""
    if args.json:
        text = json.dumps(payload, indent=2, ensure_ascii=False) + "\n"
    else:
        text = _csv_text(header, rows)
    _atomic_write(args.out, text)
    _write_manifest(subcommand, args, inputs, [args.out])


def _parse_systems(value: str) -> tuple[str, str]:
    parts = [p.strip() for p in value.split(",")]
    if len(parts) != 2 or not all(parts):
        raise ValidationError(f"--systems expects two comma-separated names, got {value!r}")
    return parts[0], parts[1]


def _parse_float_list(value: str) -> list[float]:
    try:
        return [float(p) for p in value.split(",") if p.strip()]
    except ValueError as exc:
        raise ValidationError(f"invalid numeric list {value!r}") from exc


def _parse_int_list(value: str) -> list[int]:
    try:
        return [int(p) for p in value.split(",") if p.strip()]
    except ValueError as exc:
        raise ValidationError(f"invalid integer list {value!r}") from exc


def _cmd_score(args) -> int:
    corpus = parse_corpus(args.corpus)
    if args.system not in corpus.systems:
        raise ValidationError(f"system {args.system!r} not in corpus systems {sorted(corpus.systems)}")
    hyps = [r.hypotheses[args.system] for r in corpus]
    refs = [r.reference for r in corpus]
    want_sentences = args.per_sentence is not None
    if args.metric == "bleu":
        score = metrics.bleu(hyps, refs, per_sentence=want_sentences)
    else:
        params = metrics.ChrfParams(word_order=2 if args.metric == "chrfpp" else 0)
        score = metrics.chrf_pp(hyps, refs, params, per_sentence=want_sentences)
    header = ["metric", "system", "n_sentences", "score"]
    rows = [[args.metric, args.system, len(corpus), score.value]]
    payload = {
        "metric": args.metric,
        "system": args.system,
        "n_sentences": len(corpus),
        "score": score.value,
    }
    outputs = [args.out]
    if want_sentences:
        sentence_rows = [
            [record.id, value] for record, value in zip(corpus, score.per_sentence)
        ]
        _atomic_write(args.per_sentence, _csv_text(["id", "score"], sentence_rows))
        outputs.append(args.per_sentence)
        payload["per_sentence_file"] = args.per_sentence
    if args.json:
        text = json.dumps(payload, indent=2, ensure_ascii=False) + "\n"
    else:
        text = _csv_text(header, rows)
    _atomic_write(args.out, text)
    _write_manifest("score", args, [args.corpus], outputs)
    return 0


def _cmd_compare(args) -> int:
    corpus = parse_corpus(args.corpus)
    system_a, system_b = _parse_systems(args.systems)
    for system in (system_a, system_b):
        if system not in corpus.systems:
            raise ValidationError(f"system {system!r} not in corpus")
    refs = [r.reference for r in corpus]
    params = metrics.ChrfParams(word_order=2 if args.metric == "chrfpp" else 0)
    scores_a = metrics.chrf_pp([r.hypotheses[system_a] for r in corpus], refs, params, True).per_sentence
    scores_b = metrics.chrf_pp([r.hypotheses[system_b] for r in corpus], refs, params, True).per_sentence
    result = metrics.paired_t_test(scores_a, scores_b)
    mean_a = sum(scores_a) / len(scores_a)
    mean_b = sum(scores_b) / len(scores_b)
    significant = "*" if result.p < 0.05 else ""
    header = ["system_a", "system_b", "metric", "t", "p", "n", "mean_a", "mean_b", "significant"]
    rows = [[system_a, system_b, args.metric, result.t, result.p, result.n, mean_a, mean_b, significant]]
    payload = {
        "system_a": system_a,
        "system_b": system_b,
        "metric": args.metric,
        "t": result.t,
        "p": result.p,
        "n": result.n,
        "mean_a": mean_a,
        "mean_b": mean_b,
        "significant": result.p < 0.05,
    }
    _emit(args, "compare", [args.corpus], header, rows, payload)
    return 0


def _alignment_set(args, systems) -> word_accuracy.AlignmentSet:
    return word_accuracy.AlignmentSet(
        src_ref=load_alignments(args.align_src_ref),
        src_hyp={
            systems[0]: load_alignments(args.align_src_hyp_a),
            systems[1]: load_alignments(args.align_src_hyp_b),
        },
    )


def _binned_rows(report: word_accuracy.BinnedAccuracy, framing: str | None = None):
    rows = []
    a, b = report.systems
    for bin_ in report.bins:
        row = [bin_.label, bin_.n_pairs, bin_.accuracy[a], bin_.accuracy[b], bin_.delta]
        if framing is not None:
            row.insert(0, framing)
        rows.append(row)
    return rows


def _binned_payload(report: word_accuracy.BinnedAccuracy):
    a, b = report.systems
    return [
        {
            "bin": bin_.label,
            "n_pairs": bin_.n_pairs,
            f"accuracy_{a}": bin_.accuracy[a],
            f"accuracy_{b}": bin_.accuracy[b],
            "delta": bin_.delta,
        }
        for bin_ in report.bins
    ]


def _cmd_osw(args) -> int:
    corpus = parse_corpus(args.corpus)
    systems = _parse_systems(args.systems)
    alignments = _alignment_set(args, systems)
    thresholds = _parse_float_list(args.thresholds)
    cumulative = word_accuracy.accuracy_by_similarity(corpus, alignments, systems, thresholds, True)
    disjoint = word_accuracy.accuracy_by_similarity(corpus, alignments, systems, thresholds, False)
    header = ["framing", "bin", "n_pairs", f"accuracy_{systems[0]}", f"accuracy_{systems[1]}", "delta"]
    rows = _binned_rows(cumulative, "cumulative") + _binned_rows(disjoint, "disjoint")
    payload = {
        "systems": list(systems),
        "cumulative": _binned_payload(cumulative),
        "disjoint": _binned_payload(disjoint),
    }
    inputs = [args.corpus, args.align_src_ref, args.align_src_hyp_a, args.align_src_hyp_b]
    _emit(args, "osw", inputs, header, rows, payload)
    return 0


def _cmd_freq(args) -> int:
    corpus = parse_corpus(args.corpus)
    systems = _parse_systems(args.systems)
    alignments = _alignment_set(args, systems)
    with open(args.train_target, encoding="utf-8") as fh:
        table = word_accuracy.build_frequency_table(fh)
    report = word_accuracy.accuracy_by_frequency(
        corpus, alignments, systems, table, _parse_int_list(args.bins)
    )
    header = ["bin", "n_pairs", f"accuracy_{systems[0]}", f"accuracy_{systems[1]}", "delta"]
    payload = {"systems": list(systems), "bins": _binned_payload(report)}
    inputs = [
        args.corpus,
        args.align_src_ref,
        args.align_src_hyp_a,
        args.align_src_hyp_b,
        args.train_target,
    ]
    _emit(args, "freq", inputs, header, _binned_rows(report), payload)
    return 0


def _cmd_attr_curves(args) -> int:
    records = load_attributions(args.attributions)
    curve = attribution.sentence_position_curve(records, args.window, args.drop_eos)
    header = ["position", "raw", "smoothed", "support"]
    rows = [
        [t, curve.raw[t], curve.smoothed[t], curve.support[t]] for t in range(len(curve))
    ]
    payload = {
        "window": args.window,
        "drop_eos": args.drop_eos,
        "positions": [
            {"position": t, "raw": curve.raw[t], "smoothed": curve.smoothed[t], "support": curve.support[t]}
            for t in range(len(curve))
        ],
    }
    _emit(args, "attr-curves", [args.attributions], header, rows, payload)
    return 0


def _cmd_attr_words(args) -> int:
    records = load_attributions(args.attributions)
    curve = attribution.sentence_position_curve(records, args.window, args.drop_eos)
    importance = attribution.in_word_relative_importance(records, curve, args.max_pos)
    header = ["in_word_position", "mean_relative_pct", "n_bytes"]
    rows = [[i.position, i.mean_relative_pct, i.n_bytes] for i in importance]
    payload = [
        {"in_word_position": i.position, "mean_relative_pct": i.mean_relative_pct, "n_bytes": i.n_bytes}
        for i in importance
    ]
    _emit(args, "attr-words", [args.attributions], header, rows, payload)
    return 0


def _cmd_attr_osw(args) -> int:
    records = load_attributions(args.attributions)
    corpus = parse_corpus(args.corpus)
    alignments = load_alignments(args.align_src_ref)
    curve = attribution.sentence_position_curve(records, args.window, args.drop_eos)
    result = attribution.osw_source_importance(
        records, corpus, alignments, args.osw_min, args.nonosw_max, curve
    )
    header = ["bucket", "mean_relative_pct", "mean_focus", "n_bytes", "n_words"]
    rows = [
        ["osw", result.osw_pct, result.osw_focus, result.osw_bytes, result.osw_words],
        ["non_osw", result.non_osw_pct, result.non_osw_focus, result.non_osw_bytes, result.non_osw_words],
    ]
    payload = {
        "osw_min": args.osw_min,
        "nonosw_max": args.nonosw_max,
        "osw": {"mean_relative_pct": result.osw_pct, "mean_focus": result.osw_focus,
                "n_bytes": result.osw_bytes, "n_words": result.osw_words},
        "non_osw": {"mean_relative_pct": result.non_osw_pct, "mean_focus": result.non_osw_focus,
                    "n_bytes": result.non_osw_bytes, "n_words": result.non_osw_words},
    }
    inputs = [args.attributions, args.corpus, args.align_src_ref]
    _emit(args, "attr-osw", inputs, header, rows, payload)
    return 0


def _cmd_zeroshot_predict(args) -> int:
    scores = load_score_table(args.scores)
    table = load_language_metadata(args.metadata)
    systems = _parse_systems(args.systems)
    report = zeroshot.evaluate_predictor(scores, table, args.rule, systems, args.condition)
    header = ["code", "script", "category", "predicted", "actual", "correct",
              f"score_{systems[0]}", f"score_{systems[1]}"]
    rows = [
        [r.code, r.script, r.category.value, r.predicted, r.actual, r.correct, r.score_1, r.score_2]
        for r in report.rows
    ]
    rows += [[code, script, f"skipped: {reason}", "", "", "", "", ""] for code, script, reason in report.skipped]
    payload = {
        "rule": report.rule,
        "systems": list(report.systems),
        "condition": report.condition,
        "accuracy": report.accuracy,
        "n_evaluated": len(report.rows),
        "n_skipped": len(report.skipped),
        "languages": [
            {
                "code": r.code, "script": r.script, "category": r.category.value,
                "predicted": r.predicted, "actual": r.actual, "correct": r.correct,
                f"score_{systems[0]}": r.score_1, f"score_{systems[1]}": r.score_2,
            }
            for r in report.rows
        ],
        "skipped": [
            {"code": code, "script": script, "reason": reason} for code, script, reason in report.skipped
        ],
    }
    _emit(args, "zeroshot-predict", [args.scores, args.metadata], header, rows, payload)
    correct = sum(r.correct for r in report.rows)
    print(
        f"{args.rule} rule: accuracy {report.accuracy:.4f} "
        f"({correct}/{len(report.rows)}), {len(report.skipped)} skipped"
    )
    return 0


def _cmd_degrade(args) -> int:
    scores_low = load_score_table(args.scores_low)
    scores_high = load_score_table(args.scores_high)
    scripts = {script for _, script in scores_low.languages()}
    scripts |= {script for _, script in scores_high.languages()}
    groups = zeroshot.build_script_groups(args.groups, scripts)
    report = zeroshot.degradation_by_script(scores_low, scores_high, groups, args.floor)
    header = ["group", "n", "mean_low", "mean_high", "mean_drop", "median_drop", "mean_ratio"]
    rows = [
        [g.label, g.n, g.mean_low, g.mean_high, g.mean_drop, g.median_drop, g.mean_ratio]
        for g in report.groups
    ]
    payload = {
        "system": report.system,
        "floor": report.floor,
        "groups": [
            {
                "group": g.label, "n": g.n, "mean_low": g.mean_low, "mean_high": g.mean_high,
                "mean_drop": g.mean_drop, "median_drop": g.median_drop, "mean_ratio": g.mean_ratio,
            }
            for g in report.groups
        ],
        "excluded": [
            {"code": code, "script": script, "score_low": low} for code, script, low in report.excluded
        ],
    }
    _emit(args, "degrade", [args.scores_low, args.scores_high], header, rows, payload)
    print(f"excluded {len(report.excluded)} languages at or below {args.floor:g} chrF++")
    return 0


def _cmd_control_gen(args) -> int:
    seed = args.seed
    env_seed = os.environ.get("CHARMT_SEED")
    if env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError:
            raise ValidationError(f"CHARMT_SEED must be an integer, got {env_seed!r}") from None
    corpus = parse_corpus(args.corpus)
    alignments = load_alignments(args.align)
    src_tags = control_set.load_tags(args.src_tags)
    ref_tags = control_set.load_tags(args.ref_tags)
    control = control_set.generate_control(corpus, alignments, src_tags, ref_tags, seed)
    _atomic_write(args.out_corpus, serialize_corpus(control.corpus))
    _atomic_write(args.out_log, control_set.write_replacement_log(control.replacements))
    _write_manifest(
        "control-gen",
        args,
        [args.corpus, args.align, args.src_tags, args.ref_tags],
        [args.out_corpus, args.out_log],
    )
    print(f"replaced {len(control.replacements)} aligned proper-noun pairs (seed {seed})")
    return 0


def _cmd_control_score(args) -> int:
    replacements = control_set.load_replacement_log(args.log)
    hypotheses = control_set.load_hypotheses(args.hyps)
    accuracy = control_set.copying_accuracy(replacements, hypotheses)
    header = ["n_replacements", "copying_accuracy"]
    rows = [[len(replacements), accuracy]]
    payload = {"n_replacements": len(replacements), "copying_accuracy": accuracy}
    _emit(args, "control-score", [args.log, args.hyps], header, rows, payload)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="charmt", description=__doc__.splitlines()[0] if __doc__ else None)
    parser.add_argument(
        "--version", action="version", version=f"charmt {__version__} (format {FORMAT_VERSION})"
    )
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--json", action="store_true", help="emit full-precision JSON instead of CSV")
        p.add_argument("--threads", type=int, default=1,
                       help="worker parallelism bound (results are identical for any value)")
        return p

    p = add("score", _cmd_score, "corpus-level metric for one system")
    p.add_argument("--corpus", required=True)
    p.add_argument("--system", required=True)
    p.add_argument("--metric", choices=["chrfpp", "chrf", "bleu"], default="chrfpp")
    p.add_argument("--per-sentence", metavar="OUT.csv", help="also write per-sentence scores")
    p.add_argument("--out", required=True)

    p = add("compare", _cmd_compare, "paired t-test between two systems on sentence-level scores")
    p.add_argument("--corpus", required=True)
    p.add_argument("--systems", required=True, metavar="A,B")
    p.add_argument("--metric", choices=["chrfpp", "chrf"], default="chrfpp")
    p.add_argument("--out", required=True)

    p = add("osw", _cmd_osw, "word accuracy by orthographic similarity threshold")
    p.add_argument("--corpus", required=True)
    p.add_argument("--align-src-ref", required=True, dest="align_src_ref")
    p.add_argument("--align-src-hyp-A", required=True, dest="align_src_hyp_a")
    p.add_argument("--align-src-hyp-B", required=True, dest="align_src_hyp_b")
    p.add_argument("--systems", required=True, metavar="A,B")
    p.add_argument("--thresholds", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")
    p.add_argument("--out", required=True)

    p = add("freq", _cmd_freq, "word accuracy by training-data frequency bin")
    p.add_argument("--corpus", required=True)
    p.add_argument("--align-src-ref", required=True, dest="align_src_ref")
    p.add_argument("--align-src-hyp-A", required=True, dest="align_src_hyp_a")
    p.add_argument("--align-src-hyp-B", required=True, dest="align_src_hyp_b")
    p.add_argument("--systems", required=True, metavar="A,B")
    p.add_argument("--train-target", required=True, dest="train_target")
    p.add_argument("--bins", default="0,1,10,100,1000")
    p.add_argument("--out", required=True)

    p = add("attr-curves", _cmd_attr_curves, "source-share curve over sentence byte positions")
    p.add_argument("--attributions", required=True)
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--drop-eos", action="store_true", dest="drop_eos",
                   help="exclude the final (end-of-sentence) step of each record")
    p.add_argument("--out", required=True)

    p = add("attr-words", _cmd_attr_words, "position-normalized source share by in-word byte position")
    p.add_argument("--attributions", required=True)
    p.add_argument("--max-pos", type=int, default=9, dest="max_pos")
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--drop-eos", action="store_true", dest="drop_eos")
    p.add_argument("--out", required=True)

    p = add("attr-osw", _cmd_attr_osw, "source importance for similar vs dissimilar aligned words")
    p.add_argument("--attributions", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--align-src-ref", required=True, dest="align_src_ref")
    p.add_argument("--osw-min", type=float, default=0.7, dest="osw_min")
    p.add_argument("--nonosw-max", type=float, default=0.3, dest="nonosw_max")
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--drop-eos", action="store_true", dest="drop_eos")
    p.add_argument("--out", required=True)

    p = add("zeroshot-predict", _cmd_zeroshot_predict, "predict the winning system per language")
    p.add_argument("--scores", required=True)
    p.add_argument("--metadata", required=True)
    p.add_argument("--rule", choices=[zeroshot.SUBGROUP_AND_SCRIPT, zeroshot.PRESENCE_ONLY],
                   default=zeroshot.SUBGROUP_AND_SCRIPT)
    p.add_argument("--systems", required=True, metavar="A,B")
    p.add_argument("--condition")
    p.add_argument("--out", required=True)

    p = add("degrade", _cmd_degrade, "script-grouped degradation between two conditions")
    p.add_argument("--scores-low", required=True, dest="scores_low")
    p.add_argument("--scores-high", required=True, dest="scores_high")
    p.add_argument("--floor", type=float, default=25.0)
    p.add_argument("--groups", default="latin:nonlatin",
                   help="group preset, e.g. latin:nonlatin or latin:cyrillic:multibyte")
    p.add_argument("--out", required=True)

    p = add("control-gen", _cmd_control_gen, "generate the proper-noun copying control corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--align", required=True)
    p.add_argument("--src-tags", required=True, dest="src_tags")
    p.add_argument("--ref-tags", required=True, dest="ref_tags")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-corpus", required=True, dest="out_corpus")
    p.add_argument("--out-log", required=True, dest="out_log")

    p = add("control-score", _cmd_control_score, "score copying accuracy from a replacement log")
    p.add_argument("--log", required=True)
    p.add_argument("--hyps", required=True)
    p.add_argument("--out", required=True)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "subcommand", None) is None:
            parser.print_usage(sys.stderr)
            print("error: a subcommand is required", file=sys.stderr)
            return 1
        if getattr(args, "threads", 1) < 1:
            raise ValidationError("--threads must be >= 1")
        return args.func(args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InvariantError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except CharmtError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
