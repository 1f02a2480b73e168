"""A small zoo of nonexpansive self-maps with known fixed points.

Each map carries the space it acts on, a designated fixed point ``p`` and a
descriptor, so harness code can sweep the zoo deterministically and rate
formulas can pull the distance bounds they need from the start data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .spaces import (
    EuclideanSpace,
    L1Space,
    LinfSpace,
    Point,
    Space,
    StarTreeSpace,
    _NormedSpace,
)

__all__ = [
    "OPERATOR_KINDS",
    "ConfigError",
    "NonexpansiveMap",
    "make_operator",
    "sample_nonexpansiveness",
    "BoundConstants",
    "bound_constants",
    "ZooInstance",
    "default_zoo",
]

OPERATOR_KINDS = (
    "negation",
    "contraction-to-c",
    "euclidean-projection-onto-box",
    "rotation",
    "tree-halving",
)


class ConfigError(ValueError):
    """Descriptor does not fit the target space."""


@dataclass(frozen=True)
class NonexpansiveMap:
    space: Space
    kind: str
    params: dict
    fixed_point: Point
    _fn: Callable[[Point], Point]

    def __call__(self, p: Point) -> Point:
        return self._fn(p)

    def describe(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}


def _as_vector(value, dim: int, name: str) -> tuple:
    if isinstance(value, (int, float)):
        return (float(value),) * dim
    vec = tuple(float(c) for c in value)
    if len(vec) != dim:
        raise ConfigError(f"{name} must have {dim} coordinates, got {len(vec)}")
    return vec


def make_operator(kind: str, params: dict, space: Space, validate: bool = True) -> NonexpansiveMap:
    """Instantiate a zoo map; raises ConfigError on kind/space mismatch."""
    params = dict(params or {})

    if kind == "negation":
        if not isinstance(space, _NormedSpace):
            raise ConfigError("negation requires a normed model")
        fn = lambda p: tuple(-c for c in p)
        fixed: Point = (0.0,) * space.dim

    elif kind == "contraction-to-c":
        if "c" not in params:
            raise ConfigError("contraction-to-c requires a target point 'c'")
        c = space.validate_point(params["c"])
        rho = float(params.get("rho", 0.5))
        if not 0.0 <= rho <= 1.0:
            raise ConfigError(f"rho must lie in [0, 1], got {rho}")
        params = {"c": list(c), "rho": rho}
        fn = lambda p: space.comb(c, p, rho)
        fixed = c

    elif kind == "euclidean-projection-onto-box":
        if not isinstance(space, _NormedSpace):
            raise ConfigError("box projection requires a normed model")
        lo = _as_vector(params.get("lo", 0.0), space.dim, "lo")
        hi = _as_vector(params.get("hi", 1.0), space.dim, "hi")
        if any(a > b for a, b in zip(lo, hi)):
            raise ConfigError("box must satisfy lo <= hi componentwise")
        params = {"lo": list(lo), "hi": list(hi)}
        fn = lambda p: tuple(min(max(c, a), b) for c, a, b in zip(p, lo, hi))
        fixed = tuple(0.5 * (a + b) for a, b in zip(lo, hi))

    elif kind == "rotation":
        if not isinstance(space, EuclideanSpace) or space.dim < 2:
            raise ConfigError("rotation requires a euclidean model of dim >= 2")
        theta = float(params.get("theta", math.pi / 3))
        params = {"theta": theta}
        co, si = math.cos(theta), math.sin(theta)

        def fn(p, co=co, si=si):
            a, b = p[0], p[1]
            return (co * a - si * b, si * a + co * b) + p[2:]

        fixed = (0.0,) * space.dim

    elif kind == "tree-halving":
        if not isinstance(space, StarTreeSpace):
            raise ConfigError("tree-halving requires the star-tree model")
        factor = float(params.get("factor", 0.5))
        if not 0.0 <= factor <= 1.0:
            raise ConfigError(f"factor must lie in [0, 1], got {factor}")
        params = {"factor": factor}

        def fn(p, factor=factor):
            ray, s = p
            v = s * factor
            return (0, 0.0) if v == 0.0 else (ray, v)

        fixed = (0, 0.0)

    else:
        raise ConfigError(f"unknown operator kind {kind!r}")

    op = NonexpansiveMap(space, kind, params, fixed, fn)
    if validate:
        worst = sample_nonexpansiveness(op, trials=100, rng=0)
        if worst > 1e-9:
            raise ConfigError(f"{kind} failed the nonexpansiveness sample check ({worst:.3e})")
        if space.dist(op(op.fixed_point), op.fixed_point) > 1e-12:
            raise ConfigError(f"{kind} does not fix its designated point")
    return op


def sample_nonexpansiveness(
    op: NonexpansiveMap,
    trials: int = 10_000,
    rng: np.random.Generator | int | None = None,
) -> float:
    """Worst d(Tx,Ty) - d(x,y) over sampled pairs (<= 0 means nonexpansive)."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    space = op.space
    worst = -math.inf
    for _ in range(trials):
        x = space.random_point(rng)
        y = space.random_point(rng)
        worst = max(worst, space.dist(op(x), op(y)) - space.dist(x, y))
    return worst


@dataclass(frozen=True)
class BoundConstants:
    """Distance bounds derived from the start data of a run.

    ``radius`` bounds d(x_0, p) and d(u, p), hence every iterate's distance to
    the fixed point; ``tm_bound`` is its integer cover (>= 1); ``mh_bound`` is
    an integer >= 4 max{d(u,p), d(y_0,p)}, the constant the anchored-Halpern
    rate formulas consume.
    """

    radius: float
    tm_bound: int
    mh_bound: int


def _int_cover(value: float) -> int:
    return max(1, math.ceil(value))


def bound_constants(op: NonexpansiveMap, u: Point, x0: Point, y0: Point) -> BoundConstants:
    space, p = op.space, op.fixed_point
    du = space.dist(u, p)
    radius = max(space.dist(x0, p), du)
    return BoundConstants(
        radius=radius,
        tm_bound=_int_cover(radius),
        mh_bound=_int_cover(4.0 * max(du, space.dist(y0, p))),
    )


@dataclass(frozen=True)
class ZooInstance:
    """One deterministic benchmark instance: space, map and start points."""

    name: str
    space: Space
    op: NonexpansiveMap
    u: Point
    x0: Point
    y0: Point = field(default=None)  # standalone Halpern start; defaults to x0

    def __post_init__(self):
        if self.y0 is None:
            object.__setattr__(self, "y0", self.x0)


def default_zoo() -> list[ZooInstance]:
    """The fixed instance list swept by the harness and the acceptance suite."""
    e1 = EuclideanSpace(1)
    e2 = EuclideanSpace(2)
    e3 = EuclideanSpace(3)
    tree5 = StarTreeSpace(5)
    tree8 = StarTreeSpace(8)
    l1 = L1Space(2)
    linf = LinfSpace(2)

    zoo = [
        ZooInstance("line-negation", e1, make_operator("negation", {}, e1),
                    u=(0.5,), x0=(1.0,)),
        ZooInstance("line-negation-tight", e1, make_operator("negation", {}, e1),
                    u=(0.1,), x0=(0.2,)),
        ZooInstance("plane-rotation", e2,
                    make_operator("rotation", {"theta": math.pi / 3}, e2),
                    u=(0.3, 0.2), x0=(0.5, -0.4)),
        # anchors within 1/4 of the fixed point keep the integer Halpern
        # bound at 1, the only regime where divergence-route certificate
        # indices fit inside desk-scale horizons
        ZooInstance("plane-rotation-tight", e2,
                    make_operator("rotation", {"theta": 2.0}, e2),
                    u=(0.15, -0.1), x0=(-0.12, 0.18)),
        ZooInstance("plane-box-projection", e2,
                    make_operator("euclidean-projection-onto-box", {"lo": 0.0, "hi": 1.0}, e2),
                    u=(2.0, -1.0), x0=(1.5, 2.0)),
        ZooInstance("space-contraction", e3,
                    make_operator("contraction-to-c", {"c": (0.2, 0.0, -0.1), "rho": 0.9}, e3),
                    u=(1.0, 1.0, 1.0), x0=(-0.5, 0.8, 0.3)),
        ZooInstance("taxicab-negation", l1, make_operator("negation", {}, l1),
                    u=(0.4, -0.3), x0=(0.8, 0.6)),
        ZooInstance("maxnorm-box-projection", linf,
                    make_operator("euclidean-projection-onto-box", {"lo": -0.5, "hi": 0.5}, linf),
                    u=(1.2, 0.3), x0=(-0.9, 1.1)),
        ZooInstance("tree-halving", tree5, make_operator("tree-halving", {}, tree5),
                    u=(1, 1.5), x0=(3, 2.0)),
        ZooInstance("tree-contraction", tree8,
                    make_operator("contraction-to-c", {"c": (2, 0.5), "rho": 0.5}, tree8),
                    u=(0, 1.0), x0=(4, 2.5)),
    ]
    return zoo
