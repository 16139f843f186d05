import csv
import json

import pytest

from charmt.cli import main


@pytest.fixture()
def workspace(tmp_path):
    corpus = tmp_path / "corpus.jsonl"
    corpus.write_text(
        "\n".join(
            [
                json.dumps(
                    {
                        "id": "s1",
                        "src": "die Gesundheit ist wichtig .",
                        "ref": "the health is important .",
                        "hyp": {"byt5": "the health is important .", "mt5": "a health was vital ."},
                    }
                ),
                json.dumps(
                    {
                        "id": "s2",
                        "src": "Berlin ist eine Stadt .",
                        "ref": "Berlin is a city .",
                        "hyp": {"byt5": "Berlin is a city .", "mt5": "Berlin is one town ."},
                    }
                ),
            ]
        )
        + "\n",
        encoding="utf-8",
    )
    identity = "s1\t0-0 1-1 2-2 3-3 4-4\ns2\t0-0 1-1 2-2 3-3 4-4\n"
    for name in ("sr.align", "sha.align", "shb.align"):
        (tmp_path / name).write_text(identity)
    (tmp_path / "train.txt").write_text("the health is important\nthe city is big\n" * 30)
    return tmp_path


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_score_and_per_sentence(workspace, capsys):
    out = workspace / "score.csv"
    per = workspace / "per.csv"
    rc = main([
        "score", "--corpus", str(workspace / "corpus.jsonl"), "--system", "byt5",
        "--metric", "chrfpp", "--out", str(out), "--per-sentence", str(per),
    ])
    assert rc == 0
    rows = _read_csv(out)
    assert rows[0] == ["metric", "system", "n_sentences", "score"]
    assert rows[1][3] == "100"
    assert [r[0] for r in _read_csv(per)[1:]] == ["s1", "s2"]
    assert (workspace / "score.csv.manifest.json").exists()


def test_score_json_full_precision(workspace):
    out = workspace / "score.json"
    rc = main([
        "score", "--corpus", str(workspace / "corpus.jsonl"), "--system", "mt5",
        "--metric", "bleu", "--json", "--out", str(out),
    ])
    assert rc == 0
    payload = json.loads(out.read_text())
    assert payload["metric"] == "bleu"
    assert isinstance(payload["score"], float)


def test_compare(workspace):
    out = workspace / "cmp.csv"
    rc = main([
        "compare", "--corpus", str(workspace / "corpus.jsonl"),
        "--systems", "byt5,mt5", "--out", str(out),
    ])
    assert rc == 0
    rows = _read_csv(out)
    assert rows[0][:3] == ["system_a", "system_b", "metric"]
    assert rows[1][0] == "byt5"


def test_osw_and_freq(workspace):
    args = [
        "--corpus", str(workspace / "corpus.jsonl"),
        "--align-src-ref", str(workspace / "sr.align"),
        "--align-src-hyp-A", str(workspace / "sha.align"),
        "--align-src-hyp-B", str(workspace / "shb.align"),
        "--systems", "byt5,mt5",
    ]
    out1 = workspace / "osw.csv"
    assert main(["osw", *args, "--out", str(out1)]) == 0
    rows = _read_csv(out1)
    assert rows[0][0] == "framing"
    assert {r[0] for r in rows[1:]} == {"cumulative", "disjoint"}

    out2 = workspace / "freq.csv"
    assert main([
        "freq", *args, "--train-target", str(workspace / "train.txt"),
        "--bins", "0,1,10,100", "--out", str(out2),
    ]) == 0
    rows = _read_csv(out2)
    assert rows[0][0] == "bin"
    assert sum(int(r[1]) for r in rows[1:]) == 10


@pytest.fixture()
def attr_file(tmp_path):
    path = tmp_path / "attr.jsonl"
    records = []
    for rec_id in ("a", "b"):
        target = list("ab cd".encode()) + [1]
        steps = []
        for t in range(len(target)):
            share = 1.0 if t == 0 else 0.5
            steps.append(
                {"src": [share / 2, share / 2], "tgt": [(1 - share) / t] * t if t else []}
            )
        records.append(
            {"id": rec_id, "source_bytes": [104, 105], "target_bytes": target, "steps": steps}
        )
    path.write_text("".join(json.dumps(r) + "\n" for r in records))
    return path


def test_attr_curves_and_words(workspace, attr_file):
    out = workspace / "curves.csv"
    assert main(["attr-curves", "--attributions", str(attr_file), "--window", "10",
                 "--out", str(out)]) == 0
    rows = _read_csv(out)
    assert rows[0] == ["position", "raw", "smoothed", "support"]
    assert len(rows) == 7

    out2 = workspace / "words.csv"
    assert main(["attr-words", "--attributions", str(attr_file), "--max-pos", "2",
                 "--out", str(out2)]) == 0
    rows = _read_csv(out2)
    assert rows[0] == ["in_word_position", "mean_relative_pct", "n_bytes"]


def test_attr_osw(workspace, tmp_path):
    corpus = tmp_path / "osw_corpus.jsonl"
    corpus.write_text(
        json.dumps(
            {"id": "a", "src": "Berlin gross", "ref": "Berlin big",
             "hyp": {"byt5": "Berlin big"}}
        )
        + "\n"
    )
    align = tmp_path / "osw.align"
    align.write_text("a\t0-0 1-1\n")
    attr = tmp_path / "osw_attr.jsonl"
    source = list("Berlin gross".encode())
    target = list("Berlin big".encode()) + [1]
    steps = []
    for t in range(len(target)):
        share = 1.0 if t == 0 else 0.5
        steps.append({"src": [share / len(source)] * len(source),
                      "tgt": [(1 - share) / t] * t if t else []})
    attr.write_text(json.dumps(
        {"id": "a", "source_bytes": source, "target_bytes": target, "steps": steps}) + "\n")
    out = tmp_path / "attr_osw.csv"
    assert main([
        "attr-osw", "--attributions", str(attr), "--corpus", str(corpus),
        "--align-src-ref", str(align), "--out", str(out),
    ]) == 0
    rows = _read_csv(out)
    assert [r[0] for r in rows[1:]] == ["osw", "non_osw"]


def test_zeroshot_and_degrade(tmp_path, capsys):
    scores = tmp_path / "scores.csv"
    scores.write_text(
        "system,code,script,condition,chrfpp\n"
        "byt5,aaa_Latn,Latin,10k,40\nmt5,aaa_Latn,Latin,10k,30\n"
        "byt5,bbb_Cyrl,Cyrillic,10k,20\nmt5,bbb_Cyrl,Cyrillic,10k,25\n"
    )
    meta = tmp_path / "meta.tsv"
    meta.write_text(
        "code\tscript\tsubgrouping\tin_pretraining\n"
        "aaa_Latn\tLatin\tGermanic\t1\n"
        "bbb_Cyrl\tCyrillic\tTurkic\t0\n"
    )
    out = tmp_path / "pred.csv"
    assert main([
        "zeroshot-predict", "--scores", str(scores), "--metadata", str(meta),
        "--rule", "full", "--systems", "byt5,mt5", "--out", str(out),
    ]) == 0
    assert "accuracy 1.0000" in capsys.readouterr().out
    rows = _read_csv(out)
    assert rows[1][2] == "high_resource" and rows[2][2] == "low_unrelated"

    low = tmp_path / "low.csv"
    low.write_text(
        "system,code,script,condition,chrfpp\n"
        "byt5,aaa_Latn,Latin,10k,40\nbyt5,bbb_Cyrl,Cyrillic,10k,30\n"
    )
    high = tmp_path / "high.csv"
    high.write_text(
        "system,code,script,condition,chrfpp\n"
        "byt5,aaa_Latn,Latin,250k,35\nbyt5,bbb_Cyrl,Cyrillic,250k,20\n"
    )
    out2 = tmp_path / "deg.csv"
    assert main([
        "degrade", "--scores-low", str(low), "--scores-high", str(high),
        "--groups", "latin:nonlatin", "--out", str(out2),
    ]) == 0
    rows = _read_csv(out2)
    by_label = {r[0]: r for r in rows[1:]}
    assert by_label["latin"][4] == "5" and by_label["nonlatin"][4] == "10"


@pytest.fixture()
def control_workspace(tmp_path):
    corpus = tmp_path / "c.jsonl"
    corpus.write_text(
        json.dumps(
            {"id": "k1", "src": "Herr Weber besucht Bonn .", "ref": "Mr Weber visits Bonn .",
             "hyp": {"byt5": "x"}}
        )
        + "\n"
    )
    (tmp_path / "c.align").write_text("k1\t0-0 1-1 2-2 3-3 4-4\n")
    (tmp_path / "c.src.tags").write_text("k1\tNN NNP VBZ NNP .\n")
    (tmp_path / "c.ref.tags").write_text("k1\tNNP NNP VBZ NNP .\n")
    return tmp_path


def test_control_gen_deterministic_and_score(control_workspace, capsys):
    ws = control_workspace
    args = [
        "control-gen", "--corpus", str(ws / "c.jsonl"), "--align", str(ws / "c.align"),
        "--src-tags", str(ws / "c.src.tags"), "--ref-tags", str(ws / "c.ref.tags"),
        "--seed", "42",
    ]
    assert main([*args, "--out-corpus", str(ws / "out1.jsonl"), "--out-log", str(ws / "log1.jsonl")]) == 0
    assert main([*args, "--out-corpus", str(ws / "out2.jsonl"), "--out-log", str(ws / "log2.jsonl")]) == 0
    assert (ws / "out1.jsonl").read_bytes() == (ws / "out2.jsonl").read_bytes()
    assert (ws / "log1.jsonl").read_bytes() == (ws / "log2.jsonl").read_bytes()

    log = [json.loads(line) for line in (ws / "log1.jsonl").read_text().splitlines()]
    assert len(log) == 2  # Weber and Bonn; Herr is NN on the source side
    hyps = ws / "hyps.tsv"
    hyps.write_text(f"k1\tcontains {log[0]['replacement']} only\n")
    out = ws / "acc.csv"
    assert main(["control-score", "--log", str(ws / "log1.jsonl"), "--hyps", str(hyps),
                 "--out", str(out)]) == 0
    rows = _read_csv(out)
    assert rows[1] == ["2", "0.5"]


def test_charmt_seed_env_override(control_workspace, monkeypatch):
    ws = control_workspace
    args = [
        "control-gen", "--corpus", str(ws / "c.jsonl"), "--align", str(ws / "c.align"),
        "--src-tags", str(ws / "c.src.tags"), "--ref-tags", str(ws / "c.ref.tags"),
        "--seed", "42",
    ]
    monkeypatch.setenv("CHARMT_SEED", "77")
    assert main([*args, "--out-corpus", str(ws / "env.jsonl"), "--out-log", str(ws / "envlog.jsonl")]) == 0
    monkeypatch.delenv("CHARMT_SEED")
    assert main([*args, "--out-corpus", str(ws / "s42.jsonl"), "--out-log", str(ws / "s42log.jsonl")]) == 0
    # env seed 77 beats --seed 42, so a plain --seed 77 run must reproduce it
    args77 = [a if a != "42" else "77" for a in args]
    assert main([*args77, "--out-corpus", str(ws / "s77.jsonl"), "--out-log", str(ws / "s77log.jsonl")]) == 0
    assert (ws / "envlog.jsonl").read_bytes() == (ws / "s77log.jsonl").read_bytes()
    assert (ws / "envlog.jsonl").read_bytes() != (ws / "s42log.jsonl").read_bytes()


def test_rerun_byte_identical_outputs_and_manifests(workspace):
    out = workspace / "det.csv"
    args = ["score", "--corpus", str(workspace / "corpus.jsonl"), "--system", "byt5",
            "--out", str(out)]
    assert main(args) == 0
    first = out.read_bytes()
    first_manifest = json.loads((workspace / "det.csv.manifest.json").read_text())
    assert main(args) == 0
    assert out.read_bytes() == first
    second_manifest = json.loads((workspace / "det.csv.manifest.json").read_text())
    first_manifest.pop("timestamp")
    second_manifest.pop("timestamp")
    assert first_manifest == second_manifest


class TestExitCodes:
    def test_unknown_subcommand(self, capsys):
        assert main(["frobnicate"]) == 1
        assert "usage" in capsys.readouterr().err

    def test_no_subcommand(self, capsys):
        assert main([]) == 1

    def test_missing_file_is_io_error(self, tmp_path, capsys):
        rc = main(["score", "--corpus", str(tmp_path / "absent.jsonl"), "--system", "x",
                   "--out", str(tmp_path / "o.csv")])
        assert rc == 2
        assert "i/o error" in capsys.readouterr().err

    def test_validation_error(self, workspace, capsys):
        rc = main(["score", "--corpus", str(workspace / "corpus.jsonl"), "--system", "nope",
                   "--out", str(workspace / "o.csv")])
        assert rc == 1
        assert "error" in capsys.readouterr().err

    def test_malformed_corpus(self, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("{broken\n")
        rc = main(["score", "--corpus", str(bad), "--system", "x",
                   "--out", str(tmp_path / "o.csv")])
        assert rc == 1
        assert "bad.jsonl:1" in capsys.readouterr().err

    def test_missing_required_flag(self, capsys):
        assert main(["score", "--system", "byt5"]) == 1

    def test_bad_threads(self, workspace):
        assert main(["score", "--corpus", str(workspace / "corpus.jsonl"), "--system", "byt5",
                     "--out", str(workspace / "o.csv"), "--threads", "0"]) == 1
