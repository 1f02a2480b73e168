"""The two anchored fixed-point iterations and their exact linkage.

Anchored Mann (``tikhonov_mann_run``): x_{n+1} = (1-lam_n) u_n + lam_n T u_n
with companion u_n = (1-beta_n) u + beta_n x_n pulled toward the anchor u.

Anchored Halpern (``modified_halpern_run``): y_{n+1} = (1-beta_{n+1}) u +
beta_{n+1} v_n with companion v_n = (1-lam_n) y_n + lam_n T y_n; lam_n = 1
recovers the classical Halpern scheme, beta_n = 1 the plain Mann scheme.

Starting the Halpern run at y_0 = (1-beta_0) u + beta_0 x_0 makes the two
runs interchangeable: u_n = y_n and x_{n+1} = v_n at every index, which
``check_link`` replays and measures.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .operators import NonexpansiveMap
from .schedules import Schedule
from .spaces import DomainError, Point, Space

MAX_TRAJECTORY_POINTS = 2_000_000

TIKHONOV_MANN = "tikhonov-mann"
MODIFIED_HALPERN = "modified-halpern"


@dataclass
class Trajectory:
    """A finite run of one iteration, its companions and cached residuals.

    ``points[n]`` is x_n (or y_n); ``companions[n]`` is u_n (or v_n);
    residual caches are filled during the run when requested, never patched
    afterwards.  Companion points are stored, not recomputed, so linkage
    claims can be replayed exactly.
    """

    kind: str
    space: Space
    op: NonexpansiveMap
    schedule: Schedule
    anchor: Point
    points: list[Point]
    companions: list[Point]
    step_residuals: np.ndarray | None = None
    fixed_point_residuals: np.ndarray | None = None
    _companion_cache: dict = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def last_index(self) -> int:
        return len(self.points) - 1

    def companion_gap(self) -> np.ndarray:
        """d(points_n, companions_n) per index (anchored-Mann: d(x_n, u_n))."""
        key = "gap"
        if key not in self._companion_cache:
            d = self.space.dist
            self._companion_cache[key] = np.array(
                [d(a, b) for a, b in zip(self.points, self.companions)]
            )
        return self._companion_cache[key]

    def companion_step_residuals(self) -> np.ndarray:
        key = "step"
        if key not in self._companion_cache:
            d = self.space.dist
            cs = self.companions
            self._companion_cache[key] = np.array(
                [d(cs[n], cs[n + 1]) for n in range(len(cs) - 1)]
            )
        return self._companion_cache[key]

    def companion_fixed_point_residuals(self) -> np.ndarray:
        key = "fp"
        if key not in self._companion_cache:
            d = self.space.dist
            self._companion_cache[key] = np.array(
                [d(c, self.op(c)) for c in self.companions]
            )
        return self._companion_cache[key]

    def to_csv(self, path: str | Path) -> None:
        """Write n, point coordinates, step residual and map residual rows."""
        labels = self.space.point_labels()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", *labels, "d_step", "d_T_residual"])
            for n, p in enumerate(self.points):
                step = ""
                if self.step_residuals is not None and n < len(self.step_residuals):
                    step = _fmt(self.step_residuals[n])
                fp = ""
                if self.fixed_point_residuals is not None and n < len(self.fixed_point_residuals):
                    fp = _fmt(self.fixed_point_residuals[n])
                writer.writerow([n, *(_fmt(c) for c in p), step, fp])


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _check_steps(n_steps: int) -> None:
    if n_steps < 0:
        raise DomainError(f"n_steps must be >= 0, got {n_steps}")
    if n_steps + 1 > MAX_TRAJECTORY_POINTS:
        raise DomainError(
            f"trajectory of {n_steps + 1} points exceeds the cap {MAX_TRAJECTORY_POINTS}"
        )


def tikhonov_mann_run(
    space: Space,
    op: NonexpansiveMap,
    u: Point,
    x0: Point,
    schedule: Schedule,
    n_steps: int,
    with_residuals: bool = True,
) -> Trajectory:
    """Run the anchored Mann iteration for ``n_steps`` steps."""
    _check_steps(n_steps)
    u = space.validate_point(u)
    x = space.validate_point(x0)
    points = [x]
    companions = []
    step_res = [] if with_residuals else None
    fp_res = [] if with_residuals else None

    for n in range(n_steps):
        un = space.comb(u, x, schedule.beta(n))
        x_next = space.comb(un, op(un), schedule.lam(n))
        companions.append(un)
        if with_residuals:
            fp_res.append(space.dist(x, op(x)))
            step_res.append(space.dist(x, x_next))
        points.append(x_next)
        x = x_next

    companions.append(space.comb(u, x, schedule.beta(n_steps)))
    if with_residuals:
        fp_res.append(space.dist(x, op(x)))

    return Trajectory(
        kind=TIKHONOV_MANN,
        space=space,
        op=op,
        schedule=schedule,
        anchor=u,
        points=points,
        companions=companions,
        step_residuals=None if step_res is None else np.array(step_res),
        fixed_point_residuals=None if fp_res is None else np.array(fp_res),
    )


def modified_halpern_run(
    space: Space,
    op: NonexpansiveMap,
    u: Point,
    y0: Point,
    schedule: Schedule,
    n_steps: int,
    with_residuals: bool = True,
) -> Trajectory:
    """Run the anchored Halpern iteration for ``n_steps`` steps."""
    _check_steps(n_steps)
    u = space.validate_point(u)
    y = space.validate_point(y0)
    points = [y]
    companions = []
    step_res = [] if with_residuals else None
    fp_res = [] if with_residuals else None

    for n in range(n_steps):
        ty = op(y)
        vn = space.comb(y, ty, schedule.lam(n))
        y_next = space.comb(u, vn, schedule.beta(n + 1))
        companions.append(vn)
        if with_residuals:
            fp_res.append(space.dist(y, ty))
            step_res.append(space.dist(y, y_next))
        points.append(y_next)
        y = y_next

    companions.append(space.comb(y, op(y), schedule.lam(n_steps)))
    if with_residuals:
        fp_res.append(space.dist(y, op(y)))

    return Trajectory(
        kind=MODIFIED_HALPERN,
        space=space,
        op=op,
        schedule=schedule,
        anchor=u,
        points=points,
        companions=companions,
        step_residuals=None if step_res is None else np.array(step_res),
        fixed_point_residuals=None if fp_res is None else np.array(fp_res),
    )


def linked_start(space: Space, u: Point, x0: Point, schedule: Schedule) -> Point:
    """The Halpern start y_0 = (1-beta_0) u + beta_0 x_0 that aligns both runs."""
    return space.comb(u, x0, schedule.beta(0))


def residuals(traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """Freshly recomputed (step, map) residuals of the trajectory's main sequence."""
    if len(traj.points) < 1:
        raise DomainError("empty trajectory")
    d = traj.space.dist
    pts = traj.points
    step = np.array([d(pts[n], pts[n + 1]) for n in range(len(pts) - 1)])
    fp = np.array([d(p, traj.op(p)) for p in pts])
    return step, fp


@dataclass
class LinkReport:
    n_steps: int
    max_companion_deviation: float
    max_step_deviation: float
    tol: float

    @property
    def passed(self) -> bool:
        return (
            self.max_companion_deviation <= self.tol
            and self.max_step_deviation <= self.tol
        )


def check_link(
    space: Space,
    op: NonexpansiveMap,
    u: Point,
    x0: Point,
    schedule: Schedule,
    n_steps: int,
    tol: float = 1e-9,
) -> LinkReport:
    """Run both iterations with the aligned start and measure their agreement.

    Reports max_n d(u_n, y_n) and max_n d(x_{n+1}, v_n); both are zero in
    exact arithmetic.
    """
    tm = tikhonov_mann_run(space, op, u, x0, schedule, n_steps, with_residuals=False)
    y0 = linked_start(space, u, x0, schedule)
    mh = modified_halpern_run(space, op, u, y0, schedule, n_steps, with_residuals=False)

    d = space.dist
    comp_dev = max(d(un, yn) for un, yn in zip(tm.companions, mh.points))
    if n_steps > 0:
        step_dev = max(d(tm.points[n + 1], mh.companions[n]) for n in range(n_steps))
    else:
        step_dev = 0.0
    return LinkReport(n_steps, comp_dev, step_dev, tol)
