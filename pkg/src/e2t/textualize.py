"""Render frame tuples into a single deterministic event description."""

from __future__ import annotations

from typing import Sequence

from .model import HoipTuple

EMPTY_DESCRIPTION = "no salient event"


def render_description(tuples: Sequence[HoipTuple]) -> str:
    """Join tuple templates in descending-confidence order.

    Ties on confidence break by lexicographic human label, so any permutation
    of the input list renders identically.
    """
    if not tuples:
        return EMPTY_DESCRIPTION
    ordered = sorted(tuples, key=lambda t: (-t.confidence, t.human, t.interaction))
    parts = []
    for t in ordered:
        if t.object:
            parts.append(f"a {t.human} is {t.interaction} a {t.object} in a {t.place}")
        else:
            parts.append(f"a {t.human} is {t.interaction} in a {t.place}")
    return "; ".join(parts)
