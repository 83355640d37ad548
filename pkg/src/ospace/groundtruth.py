"""Ground-truth o-space centers and Gaussian target heatmaps.

Each person proposes an o-space center one stride ahead along their gaze;
a group's o-space is the least-squares point for its members' proposals,
which is just their centroid.  Targets put an unnormalized Gaussian bump
(peak 1) at every group center and combine overlapping bumps with max so
values stay in [0, 1].  Singleton blocks contribute no center.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DEFAULT_SPEC, OSpaceMap, Person, Point2, RoomSpec, Scene, grid_centers

__all__ = [
    "GaussianParams",
    "OSpaceCenter",
    "DEFAULT_STRIDE_M",
    "propose_center",
    "group_ospace",
    "clamp_to_room",
    "scene_centers",
    "render_heatmap",
    "scene_target",
]

DEFAULT_STRIDE_M = 0.7


@dataclass(frozen=True)
class GaussianParams:
    sigma_m: float = 0.5

    def __post_init__(self):
        if not (math.isfinite(self.sigma_m) and self.sigma_m > 0):
            raise ValueError(f"sigma must be positive, got {self.sigma_m}")


@dataclass(frozen=True)
class OSpaceCenter:
    """A group's o-space center with the member indices that produced it."""

    center: Point2
    group: tuple[int, ...]


def propose_center(person: Person, stride_m: float = DEFAULT_STRIDE_M) -> Point2:
    """The o-space center a person proposes: one stride ahead along the yaw."""
    if stride_m < 0:
        raise ValueError(f"stride must be non-negative, got {stride_m}")
    rad = math.radians(person.yaw_deg)
    return Point2(person.x + stride_m * math.cos(rad),
                  person.y + stride_m * math.sin(rad))


def group_ospace(members, stride_m: float = DEFAULT_STRIDE_M) -> Point2:
    """Least-squares o-space of a group: centroid of the member proposals."""
    members = list(members)
    if not members:
        raise ValueError("group has no members")
    proposals = [propose_center(p, stride_m) for p in members]
    return Point2(sum(p.x for p in proposals) / len(proposals),
                  sum(p.y for p in proposals) / len(proposals))


def clamp_to_room(p: Point2, spec: RoomSpec = DEFAULT_SPEC) -> Point2:
    return Point2(min(max(p.x, 0.0), spec.width_m),
                  min(max(p.y, 0.0), spec.height_m))


def scene_centers(scene: Scene, stride_m: float = DEFAULT_STRIDE_M,
                  spec: RoomSpec = DEFAULT_SPEC) -> tuple[OSpaceCenter, ...]:
    """O-space centers of the non-singleton blocks, clamped into the room."""
    out = []
    for block in scene.groups:
        if len(block) < 2:
            continue
        c = group_ospace([scene.persons[i] for i in block], stride_m)
        out.append(OSpaceCenter(clamp_to_room(c, spec), block))
    return tuple(out)


def render_heatmap(centers, params: GaussianParams = GaussianParams(),
                   spec: RoomSpec = DEFAULT_SPEC) -> OSpaceMap:
    """Max of unit-peak Gaussians at the given centers, sampled at cell centers."""
    values = np.zeros((spec.rows, spec.cols))
    xs, ys = grid_centers(spec)
    two_sig_sq = 2.0 * params.sigma_m ** 2
    for c in centers:
        c = clamp_to_room(c, spec)
        d_sq = (xs[None, :] - c.x) ** 2 + (ys[:, None] - c.y) ** 2
        np.maximum(values, np.exp(-d_sq / two_sig_sq), out=values)
    return OSpaceMap(values, spec)


def scene_target(scene: Scene, stride_m: float = DEFAULT_STRIDE_M,
                 params: GaussianParams = GaussianParams(),
                 spec: RoomSpec = DEFAULT_SPEC) -> OSpaceMap:
    """Ground-truth heatmap of a labeled scene."""
    centers = [oc.center for oc in scene_centers(scene, stride_m, spec)]
    return render_heatmap(centers, params, spec)
