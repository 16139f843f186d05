"""Greedy decoding with per-step input-gradient norms.

For every sentence, the prompt ``Translate <S> to <T>: <src>`` is encoded and
a translation is decoded greedily.  At each generation step the gradient of
the chosen token's raw probability is taken with respect to every input
embedding and reduced to one scalar per token by the L2 norm; the source
vector covers the prompt plus source tokens, the target vector the generated
prefix.

Emitted records use the analysis toolkit's attribution file format, one JSON
object per line with ``id``, ``source_bytes``, ``target_bytes``, and
``steps``.  Conventions:

- byte-level models emit byte ids directly; subword models emit the byte
  rendering of each subword with its norm repeated across those bytes, and
  intra-subword prefix bytes carry zero target norm (the model measured no
  separate contribution for them);
- the encoder's trailing end-of-text token and the decoder start token are
  bookkeeping tokens and are not emitted;
- the generated end-of-sentence step is emitted like any other step, rendered
  as byte 0 (it never occurs in UTF-8 text), so all bytes before the final
  one decode to the hypothesis text;
- prompt tokens are included in the source vectors; a sidecar JSON file
  (``<out>.sidecar.json``) records how many leading source bytes belong to
  the rendered prompt so analyses can exclude them.

Records that fail to decode or produce non-finite gradients are skipped and
logged.  Decoding is greedy and batch-sequential, so identical inputs on the
same device reproduce identical output.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import torch

log = logging.getLogger("charmt_extractor")

BYTE_OFFSET = 3  # ByT5 vocabulary: 0=pad, 1=eos, 2=unk, then the 256 bytes
EOS_RENDER_BYTE = 0


@dataclass(frozen=True)
class ExtractionConfig:
    model: str
    src_lang: str
    tgt_lang: str
    max_length: int = 64
    device: str = "cpu"
    byte_level: str = "auto"  # auto | yes | no

    def prompt(self, source_text: str) -> str:
        return f"Translate {self.src_lang} to {self.tgt_lang}: {source_text}"


@dataclass(frozen=True)
class ExtractionResult:
    record: dict | None
    hypothesis: str | None
    prompt_bytes: int
    error: str | None = None


def load_model(config: ExtractionConfig):
    from transformers import AutoModelForSeq2SeqLM

    model = AutoModelForSeq2SeqLM.from_pretrained(config.model)
    model.to(config.device)
    model.eval()
    return model


def is_byte_level(config: ExtractionConfig, model) -> bool:
    if config.byte_level == "yes":
        return True
    if config.byte_level == "no":
        return False
    # ByT5-style vocabularies hold the 256 bytes plus a handful of specials
    return model.config.vocab_size <= 512


def _byte_encode(text: str, eos_token_id: int) -> list[int]:
    return [b + BYTE_OFFSET for b in text.encode("utf-8")] + [eos_token_id]


def _greedy_steps(model, input_ids: list[int], config: ExtractionConfig):
    """Greedy decode with one gradient pass per step.

    Yields (token_id, src_norms over all encoder tokens, tgt_norms over the
    generated prefix) per generated token, end-of-sequence included.
    """
    device = config.device
    eos_id = model.config.eos_token_id
    start_id = model.config.decoder_start_token_id
    embeddings = model.get_input_embeddings()
    encoder_ids = torch.tensor([input_ids], device=device)
    decoder_ids = [start_id]
    for _ in range(config.max_length):
        enc_embeds = embeddings(encoder_ids).detach().requires_grad_(True)
        dec_embeds = (
            embeddings(torch.tensor([decoder_ids], device=device)).detach().requires_grad_(True)
        )
        output = model(inputs_embeds=enc_embeds, decoder_inputs_embeds=dec_embeds, use_cache=False)
        probabilities = torch.softmax(output.logits[0, -1], dim=-1)
        next_id = int(torch.argmax(probabilities.detach()))
        probabilities[next_id].backward()
        src_norms = enc_embeds.grad[0].norm(dim=-1).tolist()
        # position 0 is the decoder start token, not part of the prefix
        tgt_norms = dec_embeds.grad[0].norm(dim=-1).tolist()[1:]
        yield next_id, src_norms, tgt_norms
        decoder_ids.append(next_id)
        if next_id == eos_id:
            return


def _subword_chunks(tokenizer, token_ids: list[int]) -> list[bytes]:
    """Byte rendering of each generated token via incremental decoding."""
    chunks = []
    previous = ""
    for k in range(1, len(token_ids) + 1):
        text = tokenizer.decode(token_ids[:k], skip_special_tokens=True)
        chunks.append(text[len(previous):].encode("utf-8"))
        previous = text
    return chunks


def _expand_subwords(token_ids, steps, tokenizer, eos_id):
    """Expand per-subword norms to per-byte norms.

    Each subword's source and target norms repeat across its rendered bytes;
    the already-emitted bytes of the subword currently being generated carry
    zero target norm (the model measured no separate contribution for them).
    Subwords rendering to no text are dropped.
    """
    chunks = [
        bytes([EOS_RENDER_BYTE]) if tid == eos_id else chunk
        for tid, chunk in zip(token_ids, _subword_chunks(tokenizer, token_ids))
    ]
    target_bytes: list[int] = []
    expanded_steps: list[dict] = []
    for t, (src_norms, tgt_norms) in enumerate(steps):
        rendered = chunks[t]
        if not rendered:
            continue
        prefix = []
        for i in range(t):
            prefix.extend([tgt_norms[i]] * len(chunks[i]))
        for j in range(len(rendered)):
            expanded_steps.append({"src": src_norms, "tgt": prefix + [0.0] * j})
            target_bytes.append(rendered[j])
    return target_bytes, expanded_steps


def extract_record(model, config: ExtractionConfig, rec_id: str, source_text: str,
                   tokenizer=None) -> ExtractionResult:
    """Run one sentence; returns the attribution record dict or an error."""
    prompt = config.prompt(source_text)
    byte_mode = is_byte_level(config, model)
    if byte_mode:
        input_ids = _byte_encode(prompt, model.config.eos_token_id)
        source_bytes = list(prompt.encode("utf-8"))
    else:
        if tokenizer is None:
            raise ValueError("subword extraction requires a tokenizer")
        encoded = tokenizer(prompt)
        input_ids = list(encoded["input_ids"])
        source_bytes = [b for chunk in _subword_chunks(tokenizer, input_ids) for b in chunk]

    eos_id = model.config.eos_token_id
    token_ids: list[int] = []
    raw_steps: list[tuple[list[float], list[float]]] = []
    try:
        with torch.enable_grad():
            for token_id, src_norms, tgt_norms in _greedy_steps(model, input_ids, config):
                if not all(map(_finite, src_norms)) or not all(map(_finite, tgt_norms)):
                    return ExtractionResult(None, None, 0, error="non-finite gradient")
                token_ids.append(token_id)
                raw_steps.append((src_norms, tgt_norms))
    except Exception as exc:  # decode failure: skip and log
        return ExtractionResult(None, None, 0, error=f"decode failure: {exc}")

    if not token_ids:
        return ExtractionResult(None, None, 0, error="empty generation")

    if byte_mode:
        target_bytes = [
            EOS_RENDER_BYTE if tid == eos_id else tid - BYTE_OFFSET for tid in token_ids
        ]
        if any(not 0 <= b <= 255 for b in target_bytes):
            return ExtractionResult(None, None, 0, error="non-byte token generated")
        steps = [
            {"src": src[: len(source_bytes)], "tgt": tgt}
            for src, tgt in raw_steps
        ]
        hypothesis_bytes = bytes(
            b for b, tid in zip(target_bytes, token_ids) if tid != eos_id
        )
    else:
        # expand subword norms onto rendered bytes; source side first
        expansion = []
        source_chunks = _subword_chunks(tokenizer, input_ids)
        for src, tgt in raw_steps:
            expanded_src = []
            for norm, chunk in zip(src, source_chunks):
                expanded_src.extend([norm] * len(chunk))
            expansion.append((expanded_src, tgt))
        target_bytes, steps = _expand_subwords(
            token_ids, expansion, tokenizer, eos_id
        )
        hypothesis_bytes = bytes(b for b in target_bytes if b != EOS_RENDER_BYTE)

    if any(not any(v > 0.0 for v in step["src"] + step["tgt"]) for step in steps):
        return ExtractionResult(None, None, 0, error="all-zero gradient step")

    record = {
        "id": rec_id,
        "source_bytes": source_bytes,
        "target_bytes": target_bytes,
        "steps": steps,
    }
    prompt_prefix = prompt[: len(prompt) - len(source_text)]
    return ExtractionResult(
        record=record,
        hypothesis=hypothesis_bytes.decode("utf-8", errors="replace"),
        prompt_bytes=len(prompt_prefix.encode("utf-8")),
    )


def _finite(value: float) -> bool:
    return value == value and abs(value) != float("inf")


def read_corpus(path: str) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            for key in ("id", "src", "ref", "hyp"):
                if key not in obj:
                    raise ValueError(f"{path}:{lineno}: missing field {key!r}")
            records.append(obj)
    return records


def extract_corpus(
    config: ExtractionConfig,
    corpus_path: str,
    out_path: str,
    out_corpus_path: str | None = None,
    system_name: str = "model",
):
    """Extract every corpus sentence; write attribution, sidecar, and
    (optionally) a hypothesis corpus file."""
    model = load_model(config)
    tokenizer = None
    if not is_byte_level(config, model):
        from transformers import AutoTokenizer

        tokenizer = AutoTokenizer.from_pretrained(config.model)
    corpus = read_corpus(corpus_path)
    skipped = []
    prompt_bytes = {}
    hypotheses = {}
    with open(out_path, "w", encoding="utf-8") as fh:
        for obj in corpus:
            result = extract_record(model, config, obj["id"], obj["src"], tokenizer)
            if result.record is None:
                log.warning("skipping record %s: %s", obj["id"], result.error)
                skipped.append({"id": obj["id"], "reason": result.error})
                continue
            fh.write(json.dumps(result.record) + "\n")
            prompt_bytes[obj["id"]] = result.prompt_bytes
            hypotheses[obj["id"]] = result.hypothesis
    with open(out_path + ".sidecar.json", "w", encoding="utf-8") as fh:
        json.dump(
            {
                "model": config.model,
                "prompt": config.prompt("<src>"),
                "prompt_bytes": prompt_bytes,
                "skipped": skipped,
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    if out_corpus_path is not None:
        with open(out_corpus_path, "w", encoding="utf-8") as fh:
            for obj in corpus:
                if obj["id"] not in hypotheses:
                    continue
                fh.write(
                    json.dumps(
                        {
                            "id": obj["id"],
                            "src": obj["src"],
                            "ref": obj["ref"],
                            "hyp": {system_name: hypotheses[obj["id"]]},
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
    return {"extracted": len(prompt_bytes), "skipped": len(skipped)}
