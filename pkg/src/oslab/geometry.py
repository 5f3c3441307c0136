"""Disc obstacle configurations and the no-eclipse condition.

Obstacles are closed discs in the plane.  Each boundary circle is
parameterised counter-clockwise by arclength ``s`` starting from the point
``center + (radius, 0)``; :func:`boundary_chart` exposes point, unit tangent,
outward normal and curvature as functions of ``s`` so that callers never rely
on the disc shape directly.

File format for configurations (see README): one obstacle per line with the
three fields ``cx, cy, r`` separated by commas or whitespace.  ``#`` starts a
comment, blank lines are ignored and a single header line ``cx,cy,r`` is
allowed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, InvalidConfig

__all__ = [
    "DiscObstacle",
    "ObstacleConfig",
    "BoundaryChart",
    "boundary_chart",
    "check_disjoint",
    "check_no_eclipse",
    "hull_clearance",
    "equilateral_config",
    "random_config",
    "load_config",
    "dump_config",
]


@dataclass(frozen=True)
class DiscObstacle:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidConfig(f"radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def perimeter(self) -> float:
        return 2.0 * math.pi * self.radius


@dataclass(frozen=True)
class ObstacleConfig:
    obstacles: tuple[DiscObstacle, ...]

    def __init__(self, obstacles: Sequence[DiscObstacle]):
        object.__setattr__(self, "obstacles", tuple(obstacles))

    @classmethod
    def from_arrays(cls, centers, radii) -> "ObstacleConfig":
        centers = np.asarray(centers, dtype=float).reshape(-1, 2)
        radii = np.broadcast_to(np.asarray(radii, dtype=float), (len(centers),))
        return cls([DiscObstacle((c[0], c[1]), r) for c, r in zip(centers, radii)])

    def __len__(self):
        return len(self.obstacles)

    def __getitem__(self, j):
        return self.obstacles[j]

    @property
    def centers(self) -> np.ndarray:
        return np.array([o.center for o in self.obstacles], dtype=float).reshape(-1, 2)

    @property
    def radii(self) -> np.ndarray:
        return np.array([o.radius for o in self.obstacles], dtype=float)

    @property
    def perimeters(self) -> np.ndarray:
        return 2.0 * np.pi * self.radii

    def transformed(self, rotation: float = 0.0, shift=(0.0, 0.0), scale: float = 1.0) -> "ObstacleConfig":
        c, s = math.cos(rotation), math.sin(rotation)
        rot = np.array([[c, -s], [s, c]])
        centers = scale * self.centers @ rot.T + np.asarray(shift, dtype=float)
        return ObstacleConfig.from_arrays(centers, scale * self.radii)

    def digest_fields(self) -> list[list[float]]:
        return [[o.center[0], o.center[1], o.radius] for o in self.obstacles]


@dataclass(frozen=True)
class BoundaryChart:
    """Point, tangent, outward normal and curvature at arclength ``s``."""

    point: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    curvature: float


def boundary_chart(obstacle: DiscObstacle, s) -> BoundaryChart:
    theta = np.asarray(s, dtype=float) / obstacle.radius
    normal = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    tangent = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)
    point = np.asarray(obstacle.center) + obstacle.radius * normal
    return BoundaryChart(point, tangent, normal, 1.0 / obstacle.radius)


def check_disjoint(config: ObstacleConfig) -> bool:
    """True iff the closed discs are pairwise disjoint."""
    if len(config) < 2:
        raise InvalidConfig(f"need at least two obstacles, got {len(config)}")
    centers, radii = config.centers, config.radii
    for i, j in itertools.combinations(range(len(config)), 2):
        if math.dist(centers[i], centers[j]) <= radii[i] + radii[j]:
            return False
    return True


def hull_clearance(center_i, radius_j_k, centers_j_k) -> float:
    """Distance from ``center_i`` to conv(D_j ∪ D_k).

    The hull of two discs is the union of the discs with linearly interpolated
    centers and radii, so the distance is ``min_l |p - c(l)| - r(l)`` over
    ``l`` in [0, 1], a convex function whose minimiser has a closed form.
    Negative values mean ``center_i`` lies inside the hull.
    """
    cj, ck = (np.asarray(c, dtype=float) for c in centers_j_k)
    rj, rk = radius_j_k
    p = np.asarray(center_i, dtype=float) - cj
    d = ck - cj
    length = float(np.hypot(*d))
    u = d / length
    a = float(p @ u)
    b = abs(float(p[0] * u[1] - p[1] * u[0]))
    dr = rk - rj
    if length <= abs(dr):
        raise InvalidConfig("one disc contains the other")
    w = -dr * b / math.sqrt(length**2 - dr**2)
    lam = min(1.0, max(0.0, (a - w) / length))
    return math.hypot(a - lam * length, b) - (rj + lam * dr)


def check_no_eclipse(config: ObstacleConfig) -> bool:
    """Ikawa's condition: no closed disc meets the hull of two others.

    Tangency counts as a violation.
    """
    if not check_disjoint(config):
        raise InvalidConfig("obstacles are not pairwise disjoint")
    centers, radii = config.centers, config.radii
    n = len(config)
    for i in range(n):
        for j, k in itertools.combinations([m for m in range(n) if m != i], 2):
            clearance = hull_clearance(centers[i], (radii[j], radii[k]), (centers[j], centers[k]))
            if clearance <= radii[i]:
                return False
    return True


def equilateral_config(side: float, radius: float = 1.0, count: int = 3) -> ObstacleConfig:
    """Discs on the vertices of a regular polygon with the given side."""
    circumradius = side / (2.0 * math.sin(math.pi / count))
    angles = math.pi / 2 + 2.0 * math.pi * np.arange(count) / count
    centers = circumradius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return ObstacleConfig.from_arrays(centers, radius)


def random_config(rng: np.random.Generator, count: int = 3, box: float = 10.0,
                  rmin: float = 0.3, rmax: float = 1.5, max_tries: int = 1000) -> ObstacleConfig:
    """Random pairwise-disjoint discs inside ``[-box, box]^2``.

    No-eclipse is *not* enforced; callers filter with :func:`check_no_eclipse`.
    """
    for _ in range(max_tries):
        centers = rng.uniform(-box, box, size=(count, 2))
        radii = rng.uniform(rmin, rmax, size=count)
        config = ObstacleConfig.from_arrays(centers, radii)
        if check_disjoint(config):
            return config
    raise InvalidConfig("could not draw a disjoint configuration")


def load_config(path) -> ObstacleConfig:
    text = Path(path).read_text()
    return parse_config(text)


def parse_config(text: str) -> ObstacleConfig:
    obstacles = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = [f for f in line.replace(",", " ").split()]
        if [f.lower() for f in fields] == ["cx", "cy", "r"]:
            continue
        if len(fields) != 3:
            raise ConfigError(f"expected 3 fields 'cx cy r', got {len(fields)}", line=lineno)
        try:
            cx, cy, r = (float(f) for f in fields)
        except ValueError as exc:
            raise ConfigError(f"non-numeric field: {exc}", line=lineno) from None
        if not r > 0:
            raise ConfigError("radius must be positive", line=lineno, field="r")
        obstacles.append(DiscObstacle((cx, cy), r))
    if len(obstacles) < 2:
        raise ConfigError(f"need at least two obstacles, found {len(obstacles)}")
    return ObstacleConfig(obstacles)


def dump_config(config: ObstacleConfig) -> str:
    lines = ["cx,cy,r"]
    lines += [f"{o.center[0]!r},{o.center[1]!r},{o.radius!r}" for o in config.obstacles]
    return "\n".join(lines) + "\n"
