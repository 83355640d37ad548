# Tolerant group matching, by hand
#
# A predicted group matches an annotated one when at least ceil(T * |G|) of
# the annotation's members are found and at most ceil((1 - T) * |G|) of the
# prediction's members are intruders.  T = 1 collapses to exact set
# equality; singletons never count either way.

from fractions import Fraction

from ospace.evaluation import aggregate, format_tolerance, match_scene

T23 = Fraction(2, 3)
T1 = Fraction(1)

gt = [(0, 1, 2), (3, 4)]
pred = [(0, 1, 3), (2, 4)]
print(f"annotated {gt}  vs  predicted {pred}")
for tol in (T23, T1):
    tp, fp, fn = match_scene(pred, gt, tol)
    print(f"  T={format_tolerance(tol)}: tp={tp} fp={fp} fn={fn}")
# At T=2/3 the triad tolerates one missing member and one intruder, so
# (0,1,3) matches it; the dyad (3,4) requires both members yet 3 is taken,
# leaving (2,4) unmatched.  At T=1 nothing matches.

# a giant merged blob cannot claim two annotations at once
gt = [(0, 1, 2, 3), (4, 5)]
pred = [(0, 1, 2, 3, 4, 5)]
print(f"\nannotated {gt}  vs  predicted {pred}")
print(f"  T=2/3: {match_scene(pred, gt, T23)}")

# singletons are ignored on both sides
gt = [(0, 1), (2,), (3,)]
pred = [(0, 1), (2,)]
print(f"\nannotated {gt}  vs  predicted {pred}")
print(f"  T=1: {match_scene(pred, gt, T1)}")

# per-scene counts micro-average into one precision/recall/F1 row
counts = [(2, 0, 0), (1, 1, 1), (0, 0, 2)]
m = aggregate(counts, T23)
print(f"\nmicro-average of {counts}:")
print(f"  precision {m.precision:.3f}  recall {m.recall:.3f}  f1 {m.f1:.3f}")
