"""Geodesic space models with an explicit convex-combination operation.

Every space couples a metric ``dist`` with a combination map ``comb`` so that
``comb(x, y, t)`` is the point a fraction ``t`` of the way along the geodesic
from ``x`` to ``y``.  Models: R^d under the euclidean, l1 or sup norm (linear
combination), and a star-shaped metric tree (rays glued at a hub).  The module
also ships randomized checkers for the combination axioms and for the
nonpositive-curvature midpoint inequality.

Points are plain tuples: coordinates for the normed models, ``(ray, s)`` for
the star tree with ``s >= 0`` the distance from the hub.  The hub is
canonically ``(0, 0.0)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

Point = tuple

DEFAULT_AXIOM_TOL = 1e-9

AXIOM_NAMES = ("W1", "W2", "W3", "W4", "W5", "W6", "W7", "CAT0")


class ShapeError(ValueError):
    """Point does not belong to the space (wrong model or dimension)."""


class DomainError(ValueError):
    """Scalar argument outside its admissible range."""


def _check_fraction(t: float) -> None:
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"combination fraction must lie in [0, 1], got {t!r}")


class Space:
    """Base class: a metric plus a geodesic convex combination."""

    model: str = "abstract"

    def dist(self, x: Point, y: Point) -> float:
        raise NotImplementedError

    def comb(self, x: Point, y: Point, t: float) -> Point:
        """Point at parameter ``t`` on the geodesic from ``x`` to ``y``."""
        raise NotImplementedError

    def validate_point(self, p) -> Point:
        """Coerce ``p`` to this space's point type, raising ShapeError if unfit."""
        raise NotImplementedError

    def random_point(self, rng: np.random.Generator) -> Point:
        raise NotImplementedError

    def point_jsonable(self, p: Point):
        return list(p)

    def point_labels(self) -> list[str]:
        """CSV column names for one point."""
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


class _NormedSpace(Space):
    """R^d with the linear combination (1-t)x + ty; subclasses fix the norm."""

    def __init__(self, dim: int):
        if dim < 1:
            raise DomainError(f"dimension must be >= 1, got {dim}")
        self.dim = int(dim)

    def _norm(self, diff: Sequence[float]) -> float:
        raise NotImplementedError

    def validate_point(self, p) -> Point:
        try:
            q = tuple(float(c) for c in p)
        except (TypeError, ValueError) as exc:
            raise ShapeError(f"not a coordinate point: {p!r}") from exc
        if len(q) != self.dim:
            raise ShapeError(f"expected {self.dim} coordinates, got {len(q)}")
        return q

    def dist(self, x: Point, y: Point) -> float:
        if len(x) != self.dim or len(y) != self.dim:
            raise ShapeError(f"points must have {self.dim} coordinates")
        return self._norm([a - b for a, b in zip(x, y)])

    def comb(self, x: Point, y: Point, t: float) -> Point:
        _check_fraction(t)
        if len(x) != self.dim or len(y) != self.dim:
            raise ShapeError(f"points must have {self.dim} coordinates")
        if t == 0.0:
            return x
        if t == 1.0:
            return y
        s = 1.0 - t
        return tuple(s * a + t * b for a, b in zip(x, y))

    def random_point(self, rng: np.random.Generator) -> Point:
        return tuple(rng.uniform(-10.0, 10.0, self.dim).tolist())

    def point_labels(self) -> list[str]:
        return [f"c{i}" for i in range(self.dim)]

    def describe(self) -> dict:
        return {"model": self.model, "dim": self.dim}


class EuclideanSpace(_NormedSpace):
    model = "euclidean"

    def _norm(self, diff):
        return math.hypot(*diff)

    def dist(self, x: Point, y: Point) -> float:
        if len(x) != self.dim or len(y) != self.dim:
            raise ShapeError(f"points must have {self.dim} coordinates")
        return math.dist(x, y)


class L1Space(_NormedSpace):
    model = "normed-l1"

    def _norm(self, diff):
        return sum(abs(c) for c in diff)


class LinfSpace(_NormedSpace):
    model = "normed-linf"

    def _norm(self, diff):
        return max(abs(c) for c in diff)


class StarTreeSpace(Space):
    """Rays [0, inf) glued at a common hub; geodesics run through the hub.

    A point is ``(ray, s)`` with ``s >= 0``; ``s == 0`` is the hub on every
    ray and is canonicalized to ray 0.
    """

    model = "star-tree"

    def __init__(self, rays: int):
        if rays < 2:
            raise DomainError(f"star tree needs >= 2 rays, got {rays}")
        self.rays = int(rays)

    def validate_point(self, p) -> Point:
        try:
            ray, s = p
            ray = int(ray)
            s = float(s)
        except (TypeError, ValueError) as exc:
            raise ShapeError(f"not a (ray, s) point: {p!r}") from exc
        if not 0 <= ray < self.rays:
            raise ShapeError(f"ray index {ray} outside 0..{self.rays - 1}")
        if s < 0.0:
            raise ShapeError(f"ray coordinate must be >= 0, got {s}")
        return (0, 0.0) if s == 0.0 else (ray, s)

    def dist(self, x: Point, y: Point) -> float:
        i, s = x
        j, t = y
        if i == j:
            return abs(s - t)
        return s + t

    def comb(self, x: Point, y: Point, t: float) -> Point:
        _check_fraction(t)
        i, s = x
        j, u = y
        if i == j:
            if s == u:
                return x
            v = (1.0 - t) * s + t * u
            return (0, 0.0) if v == 0.0 else (i, v)
        total = s + u
        if total == 0.0:
            return x
        arc = t * total
        if arc < s:
            return (i, s - arc)
        if arc > s:
            return (j, arc - s)
        return (0, 0.0)

    def random_point(self, rng: np.random.Generator) -> Point:
        ray = int(rng.integers(0, min(self.rays, 8)))
        s = float(rng.uniform(0.0, 10.0))
        return (0, 0.0) if s == 0.0 else (ray, s)

    def point_jsonable(self, p: Point):
        return {"ray": p[0], "s": p[1]}

    def point_labels(self) -> list[str]:
        return ["ray", "s"]

    def describe(self) -> dict:
        return {"model": self.model, "rays": self.rays}


_MODEL_ALIASES = {
    "euclidean": "euclidean",
    "l1": "normed-l1",
    "normed-l1": "normed-l1",
    "linf": "normed-linf",
    "normed-linf": "normed-linf",
    "star-tree": "star-tree",
}


def make_space(model: str, dim: int | None = None, rays: int | None = None) -> Space:
    """Build a space from a config-style description."""
    kind = _MODEL_ALIASES.get(model)
    if kind is None:
        raise DomainError(f"unknown space model {model!r}")
    if kind == "star-tree":
        if rays is None:
            raise DomainError("star-tree model requires 'rays'")
        return StarTreeSpace(rays)
    if dim is None:
        raise DomainError(f"model {model!r} requires 'dim'")
    cls = {"euclidean": EuclideanSpace, "normed-l1": L1Space, "normed-linf": LinfSpace}[kind]
    return cls(dim)


@dataclass
class AxiomResult:
    axiom: str
    passed: bool
    worst_violation: float
    witness: dict | None

    def to_jsonable(self) -> dict:
        return {
            "axiom": self.axiom,
            "pass": self.passed,
            "worst_violation": self.worst_violation,
            "witness": self.witness,
        }


@dataclass
class AxiomReport:
    model: str
    trials: int
    tol: float
    results: list[AxiomResult]

    def result(self, axiom: str) -> AxiomResult:
        for r in self.results:
            if r.axiom == axiom:
                return r
        raise KeyError(axiom)

    def passed(self, expect: dict[str, bool] | None = None) -> bool:
        """True iff every axiom matches its expectation (default: all pass)."""
        expect = expect or {}
        return all(r.passed == expect.get(r.axiom, True) for r in self.results)

    def to_json(self, indent: int = 2) -> str:
        payload = {
            "model": self.model,
            "trials": self.trials,
            "tol": self.tol,
            "axioms": [r.to_jsonable() for r in self.results],
        }
        return json.dumps(payload, indent=indent)


def _midpoint_defect(space: Space, x: Point, y: Point, z: Point) -> float:
    # nonpositive curvature: d(z, mid)^2 <= d(z,x)^2/2 + d(z,y)^2/2 - d(x,y)^2/4
    mid = space.comb(x, y, 0.5)
    lhs = space.dist(z, mid) ** 2
    rhs = 0.5 * space.dist(z, x) ** 2 + 0.5 * space.dist(z, y) ** 2 - 0.25 * space.dist(x, y) ** 2
    return lhs - rhs


def check_axioms(
    space: Space,
    trials: int = 10_000,
    tol: float = DEFAULT_AXIOM_TOL,
    rng: np.random.Generator | int | None = None,
    sampler: Callable[[np.random.Generator], Point] | None = None,
) -> AxiomReport:
    """Probe the combination axioms and the midpoint inequality on random tuples.

    Each trial draws points x, y, z, w and fractions t, t2 and evaluates every
    axiom's defining (in)equality; the worst signed violation and its witness
    are recorded per axiom.  A report entry fails when the worst violation
    exceeds ``tol``.
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    draw = sampler or space.random_point
    pj = space.point_jsonable

    worst = {name: (-math.inf, None) for name in AXIOM_NAMES}

    def note(name: str, violation: float, witness: dict) -> None:
        if violation > worst[name][0]:
            worst[name] = (violation, witness)

    for _ in range(trials):
        x, y, z, w = draw(rng), draw(rng), draw(rng), draw(rng)
        t = float(rng.uniform(0.0, 1.0))
        t2 = float(rng.uniform(0.0, 1.0))
        dxy = space.dist(x, y)
        m = space.comb(x, y, t)

        note("W1", space.dist(z, m) - ((1 - t) * space.dist(z, x) + t * space.dist(z, y)),
             {"x": pj(x), "y": pj(y), "z": pj(z), "t": t})
        m2 = space.comb(x, y, t2)
        note("W2", abs(space.dist(m, m2) - abs(t - t2) * dxy),
             {"x": pj(x), "y": pj(y), "t": t, "t2": t2})
        note("W3", space.dist(m, space.comb(y, x, 1.0 - t)),
             {"x": pj(x), "y": pj(y), "t": t})
        note("W4", space.dist(space.comb(x, z, t), space.comb(y, w, t))
             - ((1 - t) * space.dist(x, y) + t * space.dist(z, w)),
             {"x": pj(x), "y": pj(y), "z": pj(z), "w": pj(w), "t": t})
        note("W5", max(space.dist(space.comb(x, y, 0.0), x), space.dist(space.comb(x, y, 1.0), y)),
             {"x": pj(x), "y": pj(y)})
        note("W6", space.dist(space.comb(x, x, t), x), {"x": pj(x), "t": t})
        note("W7", max(abs(space.dist(x, m) - t * dxy), abs(space.dist(y, m) - (1 - t) * dxy)),
             {"x": pj(x), "y": pj(y), "t": t})
        note("CAT0", _midpoint_defect(space, x, y, z),
             {"x": pj(x), "y": pj(y), "z": pj(z)})

    results = []
    for name in AXIOM_NAMES:
        violation, witness = worst[name]
        ok = violation <= tol
        results.append(AxiomResult(name, ok, violation, None if ok else witness))
    return AxiomReport(space.model, trials, tol, results)


def check_metric(
    space: Space,
    trials: int = 10_000,
    tol: float = DEFAULT_AXIOM_TOL,
    rng: np.random.Generator | int | None = None,
) -> float:
    """Worst violation of symmetry, triangle inequality and d(x,x)=0 on samples."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    worst = -math.inf
    for _ in range(trials):
        x, y, z = space.random_point(rng), space.random_point(rng), space.random_point(rng)
        dxy = space.dist(x, y)
        worst = max(
            worst,
            -dxy,
            abs(dxy - space.dist(y, x)),
            space.dist(x, z) - (dxy + space.dist(y, z)),
            space.dist(x, x),
        )
    return worst
