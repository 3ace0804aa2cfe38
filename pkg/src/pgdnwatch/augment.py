"""Dataset expansion: discard titles, zero numerics, mangle title text.

Doubles an annotated dataset.  The three strategies run in fixed
proportions (defaults 20/75/5) with the rounding remainder going to the
zeroing strategy, so 2,000 records expand to exactly 4,000 with
400 discarded-title, 1,500 zeroed and 100 character-replaced copies.
Everything is deterministic given the plan seed.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .errors import EmptyTitle, InsufficientTitledRecords
from .types import NUM_FEATURES, BinaryLabel, FeatureVector

#: Look-alike substitutions used by the character-replacement strategy.
LEET_MAP = {"o": "0", "i": "1", "e": "3", "a": "@", "s": "$"}
FALLBACK_CHARS = "*#%"

STRATEGY_ORIGINAL = "orig"
STRATEGY_DISCARD = "discard"
STRATEGY_ZERO = "zero"
STRATEGY_REPLACE = "replace"


@dataclass(frozen=True)
class AugmentationPlan:
    discard_text_fraction: float = 0.20
    zero_numeric_fraction: float = 0.75
    replace_chars_fraction: float = 0.05
    max_zeroed_features: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        fractions = (
            self.discard_text_fraction,
            self.zero_numeric_fraction,
            self.replace_chars_fraction,
        )
        if any(f < 0 for f in fractions):
            raise ValueError("fractions must be >= 0")
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise ValueError("strategy fractions must sum to 1.0")
        if not 1 <= self.max_zeroed_features <= NUM_FEATURES:
            raise ValueError(f"max_zeroed_features must be in [1, {NUM_FEATURES}]")

    def quotas(self, n: int) -> tuple[int, int, int]:
        """(discard, zero, replace) counts for n source records; floors
        everywhere, remainder to zeroing."""
        discard = math.floor(self.discard_text_fraction * n)
        replace = math.floor(self.replace_chars_fraction * n)
        zero = n - discard - replace
        return discard, zero, replace


@dataclass(frozen=True)
class Provenance:
    strategy: str
    source_index: int


def replace_chars(title: str, seed: int) -> str:
    """Substitute 1..ceil(len/4) positions with look-alike characters.

    Same length in, same length out, and at least one position differs.
    """
    if not title:
        raise EmptyTitle("cannot replace characters in an empty title")
    rng = random.Random(seed)
    max_positions = max(1, math.ceil(len(title) / 4))
    count = rng.randint(1, max_positions)
    positions = rng.sample(range(len(title)), count)
    chars = list(title)
    for pos in positions:
        original = chars[pos]
        substitute = LEET_MAP.get(original.lower(), FALLBACK_CHARS[0])
        if substitute == original:
            substitute = next(c for c in FALLBACK_CHARS if c != original)
        chars[pos] = substitute
    return "".join(chars)


def _zeroed_copy(
    fv: FeatureVector, rng: random.Random, max_zeroed: int
) -> FeatureVector:
    numeric = list(fv.numeric)
    if all(x == 0.0 for x in numeric):
        return fv  # nothing left to zero; documented no-op
    while True:
        k = rng.randint(1, max_zeroed)
        indices = rng.sample(range(NUM_FEATURES), k)
        if any(numeric[i] != 0.0 for i in indices):
            break
    for i in indices:
        numeric[i] = 0.0
    return FeatureVector(tuple(numeric), fv.title)


def augment_dataset(
    records: list[tuple[FeatureVector, BinaryLabel]],
    plan: AugmentationPlan,
) -> list[tuple[FeatureVector, BinaryLabel, Provenance]]:
    """Return originals plus one synthetic copy per source record.

    Sources are drawn without replacement per strategy; the title-based
    strategies only draw from titled records.  Labels are copied verbatim.
    """
    if not records:
        raise ValueError("cannot augment an empty dataset")
    n = len(records)
    discard_q, zero_q, replace_q = plan.quotas(n)

    titled = [i for i, (fv, _) in enumerate(records) if fv.title]
    if len(titled) < discard_q + replace_q:
        raise InsufficientTitledRecords(
            f"need {discard_q + replace_q} titled records, have {len(titled)}"
        )

    rng = random.Random(plan.seed)
    out: list[tuple[FeatureVector, BinaryLabel, Provenance]] = [
        (fv, label, Provenance(STRATEGY_ORIGINAL, i))
        for i, (fv, label) in enumerate(records)
    ]

    for i in rng.sample(titled, discard_q):
        fv, label = records[i]
        out.append((fv.with_title(None), label, Provenance(STRATEGY_DISCARD, i)))

    for i in rng.sample(range(n), zero_q):
        fv, label = records[i]
        copy = _zeroed_copy(fv, rng, plan.max_zeroed_features)
        out.append((copy, label, Provenance(STRATEGY_ZERO, i)))

    for i in rng.sample(titled, replace_q):
        fv, label = records[i]
        mangled = replace_chars(fv.title, rng.getrandbits(32))
        out.append((fv.with_title(mangled), label, Provenance(STRATEGY_REPLACE, i)))

    return out
