"""Grid search over the assignment hyperparameters on a validation set.

The network forward pass is independent of the assignment parameters, so
heatmaps are computed once per scene and every grid combination reuses
them; NMS detections are likewise shared across the assignment-distance
and stride axes.  Ties on F1 break toward higher threshold, larger
separation, smaller assignment distance, then smaller stride.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .evaluation import GroupMetrics, aggregate, match_scene, snap_tolerance
from .network import ModelWeights, predict_heatmap
from .parallel import thread_map
from .postprocess import AssignParams, assign_groups, nms
from .room import RoomFeature

__all__ = ["Grid", "GridResult", "grid_search", "grid_search_heatmaps"]


@dataclass(frozen=True)
class Grid:
    nms_thresholds: tuple[float, ...] = (0.3, 0.4, 0.5, 0.6, 0.7, 0.8)
    separations_m: tuple[float, ...] = (0.5, 1.0, 1.5)
    assign_dists_m: tuple[float, ...] = (0.5, 1.0, 1.5, 2.0)
    strides_m: tuple[float, ...] = (0.4, 0.7, 1.0)

    def __post_init__(self):
        for name in ("nms_thresholds", "separations_m", "assign_dists_m",
                     "strides_m"):
            vals = tuple(float(v) for v in getattr(self, name))
            object.__setattr__(self, name, vals)
            if not vals:
                raise ValueError(f"{name} is empty")
            if any(not math.isfinite(v) or v < 0 for v in vals):
                raise ValueError(f"bad value in {name}: {vals}")
        if any(t > 1 for t in self.nms_thresholds):
            raise ValueError("nms thresholds must lie in [0, 1]")


@dataclass(frozen=True)
class GridResult:
    params: AssignParams
    metrics: GroupMetrics


def grid_search_heatmaps(heatmaps, scenes, grid: Grid, tolerance):
    """Search the grid given precomputed per-scene heatmaps.

    Returns (best AssignParams, best F1, [GridResult...] in grid order).
    """
    scenes = list(scenes)
    heatmaps = list(heatmaps)
    if len(heatmaps) != len(scenes):
        raise ValueError(f"{len(heatmaps)} heatmaps for {len(scenes)} scenes")
    if not scenes:
        raise ValueError("empty validation set")
    t = snap_tolerance(tolerance)

    table: list[GridResult] = []
    for thr in grid.nms_thresholds:
        for sep in grid.separations_m:
            base = AssignParams(nms_threshold=thr, min_group_separation_m=sep)
            detections = [nms(h, base) for h in heatmaps]
            for ad in grid.assign_dists_m:
                for st in grid.strides_m:
                    params = AssignParams(nms_threshold=thr,
                                          min_group_separation_m=sep,
                                          max_assign_dist_m=ad, stride_m=st)
                    counts = [
                        match_scene(assign_groups(s.persons, d, params),
                                    s.groups, t)
                        for s, d in zip(scenes, detections)
                    ]
                    table.append(GridResult(params, aggregate(counts, t)))

    best = min(table, key=lambda r: (-r.metrics.f1, -r.params.nms_threshold,
                                     -r.params.min_group_separation_m,
                                     r.params.max_assign_dist_m,
                                     r.params.stride_m))
    return best.params, best.metrics.f1, table


def grid_search(model: ModelWeights, val_scenes, room: RoomFeature,
                grid: Grid = Grid(), tolerance=1):
    """Search the grid using the model's predicted heatmaps."""
    scenes = list(val_scenes)
    heatmaps = thread_map(lambda s: predict_heatmap(s, model, room), scenes)
    return grid_search_heatmaps(heatmaps, scenes, grid, tolerance)
