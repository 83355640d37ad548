"""Deterministic synthetic cocktail-party scenes with known o-space centers.

Groups are circles: members sit evenly spaced on a ring of circle_radius_m
around a sampled center, facing it exactly, so with stride equal to the
radius every member's proposal lands on the center and the ground-truth
machinery recovers it by construction.  Optional Gaussian jitter perturbs
positions and yaws.  Jitter noise is drawn even at zero magnitude, so the
random stream, and hence the geometry, is identical across jitter settings.

Placement is rejection sampling: group centers keep min_intergroup_dist_m
from each other, singletons keep it from every center.  An entity that
fails 1000 attempts raises SynthesisError.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DEFAULT_SPEC, Person, Point2, RoomSpec, Scene

__all__ = ["SynthConfig", "SynthesisError", "generate"]

MAX_ATTEMPTS = 1000


class SynthesisError(RuntimeError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_scenes: int = 100
    groups_per_scene: tuple[int, int] = (1, 3)
    group_size: tuple[int, int] = (2, 6)
    circle_radius_m: float = 0.7
    min_intergroup_dist_m: float = 2.0
    singleton_count: tuple[int, int] = (0, 2)
    jitter_m: float = 0.0
    jitter_deg: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "groups_per_scene", tuple(self.groups_per_scene))
        object.__setattr__(self, "group_size", tuple(self.group_size))
        object.__setattr__(self, "singleton_count", tuple(self.singleton_count))
        for name in ("groups_per_scene", "group_size", "singleton_count"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 0:
                raise ValueError(f"empty {name} range ({lo}, {hi})")
        if self.group_size[0] < 2:
            raise ValueError("groups need at least 2 members")
        if self.n_scenes < 0:
            raise ValueError("n_scenes must be non-negative")
        if not (math.isfinite(self.circle_radius_m) and self.circle_radius_m > 0):
            raise ValueError(f"bad circle radius {self.circle_radius_m}")
        if self.min_intergroup_dist_m < 0:
            raise ValueError("min intergroup distance must be non-negative")
        if self.jitter_m < 0 or self.jitter_deg < 0:
            raise ValueError("jitter magnitudes must be non-negative")


def _clamp(v: float, lo: float, hi: float) -> float:
    return min(max(v, lo), hi)


def _sample_center(rng, cfg: SynthConfig, spec: RoomSpec, placed, scene_i: int):
    r = cfg.circle_radius_m
    if spec.width_m < 2 * r or spec.height_m < 2 * r:
        raise SynthesisError(
            f"room {spec.width_m}x{spec.height_m} m cannot fit a circle of "
            f"radius {r}"
        )
    min_sq = cfg.min_intergroup_dist_m ** 2
    for _ in range(MAX_ATTEMPTS):
        cx = rng.uniform(r, spec.width_m - r)
        cy = rng.uniform(r, spec.height_m - r)
        if all((cx - c.x) ** 2 + (cy - c.y) ** 2 >= min_sq for c in placed):
            return Point2(cx, cy)
    raise SynthesisError(
        f"scene {scene_i}: no room for group {len(placed)} after "
        f"{MAX_ATTEMPTS} attempts"
    )


def _sample_singleton(rng, cfg: SynthConfig, spec: RoomSpec, centers, scene_i: int):
    min_sq = cfg.min_intergroup_dist_m ** 2
    for _ in range(MAX_ATTEMPTS):
        px = rng.uniform(0.0, spec.width_m)
        py = rng.uniform(0.0, spec.height_m)
        if all((px - c.x) ** 2 + (py - c.y) ** 2 >= min_sq for c in centers):
            return px, py
    raise SynthesisError(
        f"scene {scene_i}: no room for a singleton after {MAX_ATTEMPTS} attempts"
    )


def generate(cfg: SynthConfig, spec: RoomSpec = DEFAULT_SPEC):
    """Generate scenes plus the true o-space centers of each scene's groups.

    Returns (scenes, centers) where centers[i] lists scene i's group centers
    in group order.
    """
    rng = np.random.default_rng(cfg.seed)
    scenes: list[Scene] = []
    all_centers: list[list[Point2]] = []
    for i in range(cfg.n_scenes):
        n_groups = int(rng.integers(cfg.groups_per_scene[0],
                                    cfg.groups_per_scene[1] + 1))
        n_single = int(rng.integers(cfg.singleton_count[0],
                                    cfg.singleton_count[1] + 1))
        persons: list[Person] = []
        blocks: list[tuple[int, ...]] = []
        centers: list[Point2] = []
        for _ in range(n_groups):
            size = int(rng.integers(cfg.group_size[0], cfg.group_size[1] + 1))
            c = _sample_center(rng, cfg, spec, centers, i)
            centers.append(c)
            phase = rng.uniform(0.0, 2.0 * math.pi)
            start = len(persons)
            for k in range(size):
                ang = phase + 2.0 * math.pi * k / size
                px = c.x + cfg.circle_radius_m * math.cos(ang)
                py = c.y + cfg.circle_radius_m * math.sin(ang)
                yaw = math.degrees(math.atan2(c.y - py, c.x - px))
                dx, dy = rng.standard_normal(2) * cfg.jitter_m
                dyaw = rng.standard_normal() * cfg.jitter_deg
                persons.append(Person(
                    _clamp(px + dx, 0.0, spec.width_m),
                    _clamp(py + dy, 0.0, spec.height_m),
                    (yaw + dyaw) % 360.0,
                ))
            blocks.append(tuple(range(start, start + size)))
        for _ in range(n_single):
            px, py = _sample_singleton(rng, cfg, spec, centers, i)
            yaw = rng.uniform(0.0, 360.0)
            blocks.append((len(persons),))
            persons.append(Person(px, py, yaw))
        scenes.append(Scene(f"synth-{cfg.seed}-{i:05d}", tuple(persons),
                            tuple(blocks)))
        all_centers.append(centers)
    return scenes, all_centers
