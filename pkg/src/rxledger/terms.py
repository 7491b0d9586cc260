"""Shared term normalization for allergy lists, diagnosis text, and drug fields.

One tokenizer is used everywhere a free-text field is compared against
another (allergy matching, interaction matching, case similarity), so the
modules agree on what counts as a "term": lowercase, split on any run of
non-alphanumeric characters, empty tokens dropped. Parsing is idempotent.
"""

from __future__ import annotations

import re

_TOKEN_SPLIT = re.compile(r"[^a-z0-9]+")


def normalize_terms(text: str | None) -> frozenset[str]:
    """Tokenize free text into a normalized term set.

    "Penicillin; sulfa drugs" -> {"penicillin", "sulfa", "drugs"}
    """
    if not text:
        return frozenset()
    return frozenset(t for t in _TOKEN_SPLIT.split(text.lower()) if t)


def jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    """Set overlap in [0, 1]; 0.0 when both sets are empty."""
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)
