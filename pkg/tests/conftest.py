import json
from pathlib import Path

import pytest

from charmt.corpus_io import AttributionRecord, AttributionStep

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def metric_fixture():
    with open(FIXTURES / "metric_conformance.json", encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def ttest_fixture():
    with open(FIXTURES / "ttest_oracle.json", encoding="utf-8") as fh:
        return json.load(fh)


def make_attr_record(
    rec_id: str,
    target_text: str,
    shares,
    source_text: str = "ein Quelltext",
    eos_byte: int = 1,
) -> AttributionRecord:
    """Build a valid attribution record whose per-step source shares equal
    ``shares``.  The end-of-sentence byte is appended to the encoded target
    text; ``shares`` must cover it (len == len(target bytes) + 1)."""
    source_bytes = tuple(source_text.encode("utf-8"))
    target_bytes = tuple(target_text.encode("utf-8")) + (eos_byte,)
    if len(shares) != len(target_bytes):
        raise AssertionError(f"need {len(target_bytes)} shares, got {len(shares)}")
    steps = []
    for t, share in enumerate(shares):
        if not 0.0 <= share <= 1.0 or (t == 0 and share != 1.0):
            raise AssertionError(f"invalid share {share} at step {t}")
        src = tuple(share / len(source_bytes) for _ in source_bytes)
        tgt = tuple((1.0 - share) / t for _ in range(t))
        steps.append(AttributionStep(src_norms=src, tgt_norms=tgt))
    return AttributionRecord(
        id=rec_id, source_bytes=source_bytes, target_bytes=target_bytes, steps=tuple(steps)
    )
