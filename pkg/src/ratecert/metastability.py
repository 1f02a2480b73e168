"""Metastability rates: finitary Cauchy certificates and their transfer.

A ``MetaRate`` maps a precision level k and a counter function g to a bound
B such that some window [N, N + g(N)] with N <= B has pairwise oscillation
at most 1/(k+1).  The module provides the transfer of such rates across the
companion linkage, a brute-force window-search oracle, and a verifier that
checks any claimed rate against a concrete trajectory.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .iterations import MODIFIED_HALPERN, TIKHONOV_MANN, Trajectory
from .rates import COMPANION_GAP, SUBJECT_MH, SUBJECT_TM, ConsistencyError, RateCertificate

Counter = Callable[[int], int]


@dataclass(frozen=True)
class MetaRate:
    """Total (k, g) -> bound function with the audited window claim."""

    name: str
    subject: str
    eval_fn: Callable[[int, Counter], int]
    provenance: dict

    def __call__(self, k: int, g: Counter) -> int:
        if k < 0:
            raise ValueError(f"precision level must be >= 0, got {k}")
        return int(self.eval_fn(k, g))


def counter_preset(spec) -> tuple[str, Counter]:
    """Named counter functions: 'const:c', 'n', '2n', 'affine:a,b' or an int."""
    if isinstance(spec, int):
        return f"const:{spec}", lambda n, c=spec: c
    text = str(spec).strip()
    if text == "n":
        return "n", lambda n: n
    if text == "2n":
        return "2n", lambda n: 2 * n
    if text.startswith("const:"):
        c = int(text.split(":", 1)[1])
        return f"const:{c}", lambda n, c=c: c
    if text.startswith("affine:"):
        a, b = (float(part) for part in text.split(":", 1)[1].split(","))
        return f"affine:{a:g},{b:g}", lambda n, a=a, b=b: max(0, int(a * n + b))
    raise ValueError(f"unknown counter preset {spec!r}")


def shifted_counter(g: Counter, q: int) -> Counter:
    """g_q(n) = g(n + q) + q, the counter the transferred rate feeds through."""
    return lambda n: g(n + q) + q


def transform_meta(omega: MetaRate, gap: RateCertificate) -> MetaRate:
    """Transfer a metastability rate across the companion linkage.

    The target sequence gets omega(3k+2, g_q) + q with q the companion-gap
    index at level 3k+2; valid between the companion pair always, and across
    the two schemes under the aligned start.
    """
    if gap.kind != COMPANION_GAP:
        raise ConsistencyError("second argument must be a companion-gap rate")

    def ev(k: int, g: Counter) -> int:
        q = gap(3 * k + 2)
        return omega(3 * k + 2, shifted_counter(g, q)) + q

    subject = SUBJECT_MH if omega.subject == SUBJECT_TM else SUBJECT_TM
    return MetaRate(
        name=f"{omega.name}>transfer",
        subject=subject,
        eval_fn=ev,
        provenance={"from": omega.name, "gap": gap.provenance},
    )


def _sequence_points(traj: Trajectory, sequence: str) -> list:
    if sequence == "main":
        return traj.points
    if sequence == "companion":
        if traj.kind != TIKHONOV_MANN:
            raise ValueError("companion sequence oscillation is meaningful for anchored-Mann runs")
        return traj.companions
    raise ValueError(f"unknown sequence {sequence!r}")


def _window_within(space, pts, start: int, end: int, thresh: float) -> bool:
    # all pairs, early exit on the first pair too far apart
    dist = space.dist
    for i in range(start, end + 1):
        pi = pts[i]
        for j in range(i + 1, end + 1):
            if dist(pi, pts[j]) > thresh:
                return False
    return True


def empirical_meta(
    traj: Trajectory,
    k: int,
    g: Counter,
    cap: int,
    sequence: str = "main",
    tol: float = 0.0,
) -> int | None:
    """Least N <= cap whose window [N, N + g(N)] has oscillation <= 1/(k+1).

    Returns None when no such window exists within the cap or fits inside the
    trajectory; the brute-force oracle grounding every metastability claim.
    """
    pts = _sequence_points(traj, sequence)
    thresh = 1.0 / (k + 1) + tol
    for start in range(min(cap, len(pts) - 1) + 1):
        end = start + g(start)
        if end >= len(pts):
            continue
        if _window_within(traj.space, pts, start, end, thresh):
            return start
    return None


@dataclass
class MetaCheck:
    k: int
    bound: int
    least_n: int | None
    inconclusive: bool

    @property
    def passed(self) -> bool:
        return self.least_n is not None


def verify_meta(
    traj: Trajectory,
    omega: MetaRate,
    k: int,
    g: Counter,
    tol: float = 1e-9,
    sequence: str = "main",
) -> MetaCheck:
    """Search N = 0..omega(k, g) for a quiet window; pass iff one exists.

    Candidates whose window sticks out past the trajectory are skipped; if
    none passes and some were skipped the result is inconclusive rather than
    a failure.
    """
    pts = _sequence_points(traj, sequence)
    bound = omega(k, g)
    thresh = 1.0 / (k + 1) + tol
    truncated = False
    for start in range(bound + 1):
        end = start + g(start)
        if end >= len(pts):
            truncated = True
            continue
        if _window_within(traj.space, pts, start, end, thresh):
            return MetaCheck(k, bound, start, False)
    return MetaCheck(k, bound, None, truncated)


def empirical_meta_rate(
    traj: Trajectory, cap: int, sequence: str = "main", name: str = "empirical"
) -> MetaRate:
    """Metastability rate read off a trajectory by brute-force window search.

    Valid for this trajectory only; evaluation raises when no window within
    the cap satisfies the requested level.
    """
    subject = SUBJECT_MH if (traj.kind == MODIFIED_HALPERN or sequence == "companion") else SUBJECT_TM
    cache: dict = {}

    def ev(k: int, g: Counter) -> int:
        key = (k, g)
        if key not in cache:
            least = empirical_meta(traj, k, g, cap, sequence=sequence)
            if least is None:
                raise ValueError(
                    f"no metastable window at level {k} within cap {cap}; extend the trajectory"
                )
            cache[key] = least
        return cache[key]

    return MetaRate(name, subject, ev, {"empirical": True, "cap": cap, "sequence": sequence})


@dataclass
class MetaRow:
    k: int
    preset: str
    bound: int
    least_n: int | None
    status: str  # "pass" | "fail" | "inconclusive" | "none" | "found"


def meta_rows_to_csv(rows: list[MetaRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "g", "bound", "least_n", "status"])
        for row in rows:
            writer.writerow([
                row.k, row.preset, row.bound,
                "" if row.least_n is None else row.least_n, row.status,
            ])
