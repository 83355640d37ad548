"""Tolerance-based group matching: TP/FP/FN and precision/recall/F1.

A predicted group matches a ground-truth group of size |G| at tolerance T
when it contains at least ceil(T*|G|) of the true members and no more than
ceil((1-T)*|G|) outsiders.  T=1 is exact set equality.  The ceilings are
evaluated in exact rational arithmetic; the float closest to 2/3 times 3
rounds to just above 2, which would silently demand a third member.

Singleton blocks are not conversational groups and are dropped from both
sides before matching.  Matching is greedy one-to-one: ground-truth groups
in descending size claim the first remaining predicted group they match,
with deterministic (smallest-member) tie ordering on both sides.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

__all__ = [
    "GroupMetrics",
    "snap_tolerance",
    "required_correct",
    "max_false",
    "group_matches",
    "match_scene",
    "aggregate",
    "format_tolerance",
]


@dataclass(frozen=True)
class GroupMetrics:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    tolerance: Fraction


def snap_tolerance(t) -> Fraction:
    """Tolerance as an exact fraction; floats snap to the nearest simple ratio."""
    if isinstance(t, float):
        frac = Fraction(t).limit_denominator(10 ** 6)
    else:
        frac = Fraction(t)
    if not 0 < frac <= 1:
        raise ValueError(f"tolerance {t} outside (0, 1]")
    return frac


def _ceil_frac(f: Fraction) -> int:
    return -((-f.numerator) // f.denominator)


def required_correct(group_size: int, t: Fraction) -> int:
    return _ceil_frac(t * group_size)


def max_false(group_size: int, t: Fraction) -> int:
    return _ceil_frac((1 - t) * group_size)


def group_matches(pred, gt, t) -> bool:
    """True when pred has enough of gt's members and few enough outsiders."""
    pred = set(pred)
    gt = set(gt)
    if not pred or not gt:
        raise ValueError("empty group")
    t = snap_tolerance(t)
    correct = len(pred & gt)
    false_subjects = len(pred - gt)
    return correct >= required_correct(len(gt), t) and \
        false_subjects <= max_false(len(gt), t)


def _check_no_overlap(blocks, label: str) -> None:
    seen = set()
    for b in blocks:
        for i in b:
            if i in seen:
                raise ValueError(f"{label} groups are not disjoint: {i} repeats")
            seen.add(i)


def _match_order(blocks):
    return sorted((tuple(sorted(b)) for b in blocks), key=lambda b: (-len(b), b[0]))


def match_scene(pred_groups, gt_groups, t) -> tuple[int, int, int]:
    """Greedy one-to-one matching of one scene's groups: (tp, fp, fn).

    Inputs may include singleton blocks or omit them; only blocks of 2+
    people are scored.
    """
    t = snap_tolerance(t)
    _check_no_overlap(pred_groups, "predicted")
    _check_no_overlap(gt_groups, "ground-truth")
    pred = _match_order(b for b in pred_groups if len(b) >= 2)
    gt = _match_order(b for b in gt_groups if len(b) >= 2)

    claimed = [False] * len(pred)
    tp = 0
    for g in gt:
        for i, p in enumerate(pred):
            if not claimed[i] and group_matches(p, g, t):
                claimed[i] = True
                tp += 1
                break
    return tp, len(pred) - tp, len(gt) - tp


def aggregate(counts, t) -> GroupMetrics:
    """Micro-average per-scene (tp, fp, fn) counts into one metrics row."""
    t = snap_tolerance(t)
    tp = sum(c[0] for c in counts)
    fp = sum(c[1] for c in counts)
    fn = sum(c[2] for c in counts)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return GroupMetrics(tp=tp, fp=fp, fn=fn, precision=precision,
                        recall=recall, f1=f1, tolerance=t)


def format_tolerance(t: Fraction) -> str:
    return str(t.numerator) if t.denominator == 1 else f"{t.numerator}/{t.denominator}"
