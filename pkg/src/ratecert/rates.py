"""Closed-form rate certificates for the anchored iterations.

A ``RateCertificate`` maps a precision level k to an index N with the audited
claim that the certified residual stays below 1/(k+1) from N on.  This module
builds every certificate from schedule moduli and integer distance bounds:

* the companion-gap rate for d(x_n, u_n);
* step-residual rates for the anchored Halpern scheme, via either the
  divergence modulus or the coefficient-product modulus;
* the step -> map-residual upgrade using the lambda floor;
* both transfer directions between the two schemes (each composes the gap
  rate with a 3k+2 precision split);
* O(1/n) envelopes for the two-over-n coefficient family; and
* an empirical verifier that replays any certificate against a trajectory.

Certificates carry provenance and refuse to compose when the coupling they
were derived under (e.g. the 4x bound relation between the two schemes) does
not hold.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .iterations import MODIFIED_HALPERN, TIKHONOV_MANN, Trajectory
from .schedules import Modulus, Schedule, ScheduleError, ScheduleModuli, psi_from_schedule

STEP = "step"
FIXED_POINT = "fixed-point"
COMPANION_GAP = "companion-gap"

SUBJECT_TM = "tm"
SUBJECT_MH = "mh"


class ConsistencyError(ValueError):
    """Certificate composition with mismatched provenance."""


@dataclass(frozen=True)
class RateCertificate:
    """Total function k -> N certifying residual_n <= 1/(k+1) for n >= N."""

    name: str
    kind: str      # step | fixed-point | companion-gap
    subject: str   # tm | mh
    eval_fn: Callable[[int], int]
    provenance: dict

    def __call__(self, k: int) -> int:
        if k < 0:
            raise ValueError(f"precision level must be >= 0, got {k}")
        n = self.eval_fn(k)
        return int(n)

    def table(self, k_max: int) -> list[int]:
        return [self(k) for k in range(k_max + 1)]


def ceil_log(x: float) -> int:
    """Upper integer bound for ln(x), safe against float landing on an integer.

    Exact at x = 1; elsewhere rounds one ulp upward before the ceiling so a
    representation accident can only overestimate (a larger index keeps a
    certificate valid, a smaller one would not be justified).
    """
    if x <= 0:
        raise ValueError(f"ceil_log needs x > 0, got {x}")
    if x == 1:
        return 0
    v = math.log(x)
    return math.ceil(v + math.ulp(v))


def companion_gap_rate(moduli: ScheduleModuli, tm_bound: int) -> RateCertificate:
    """Rate for d(x_n, u_n) -> 0: the coefficient-to-one modulus at 2K(k+1)-1."""
    if tm_bound < 1:
        raise ConsistencyError(f"tm_bound must be a positive integer, got {tm_bound}")
    s4 = moduli.beta_to_one
    return RateCertificate(
        name="companion-gap",
        kind=COMPANION_GAP,
        subject=SUBJECT_TM,
        eval_fn=lambda k: s4(2 * tm_bound * (k + 1) - 1),
        provenance={"tm_bound": tm_bound},
    )


def _flip(subject: str) -> str:
    return SUBJECT_MH if subject == SUBJECT_TM else SUBJECT_TM


def transfer_rate(cert: RateCertificate, gap: RateCertificate) -> RateCertificate:
    """Move a (step or map) residual rate across the linkage.

    The other sequence inherits max{gap(3k+2), cert(3k+2)}; valid in the
    companion direction always, and in the cross-scheme direction whenever the
    runs share the aligned start.
    """
    if gap.kind != COMPANION_GAP:
        raise ConsistencyError("second argument must be a companion-gap rate")
    if cert.kind not in (STEP, FIXED_POINT):
        raise ConsistencyError(f"cannot transfer a {cert.kind} certificate")
    return RateCertificate(
        name=f"{cert.name}>transfer",
        kind=cert.kind,
        subject=_flip(cert.subject),
        eval_fn=lambda k: max(gap(3 * k + 2), cert(3 * k + 2)),
        provenance={"from": cert.name, "gap": gap.provenance},
    )


def mh_tail_index(moduli: ScheduleModuli, mh_bound: int) -> Modulus:
    """Index after which both coefficient-difference tails are small enough."""
    s2, s3 = moduli.beta_diff_cauchy, moduli.lambda_diff_cauchy
    return lambda k: max(s2(8 * mh_bound * (k + 1) - 1), s3(4 * mh_bound * (k + 1) - 1))


def mh_step_rate_div(moduli: ScheduleModuli, mh_bound: int) -> RateCertificate:
    """Step-residual rate for the anchored Halpern run, divergence route."""
    if mh_bound < 1:
        raise ConsistencyError(f"mh_bound must be a positive integer, got {mh_bound}")
    tail = mh_tail_index(moduli, mh_bound)
    s1 = moduli.beta_sum_divergence

    def ev(k: int) -> int:
        return s1(tail(k) + ceil_log(mh_bound * (k + 1)) + 1) + 1

    return RateCertificate(
        name="mh-step/divergence",
        kind=STEP,
        subject=SUBJECT_MH,
        eval_fn=ev,
        provenance={"mh_bound": mh_bound, "route": "divergence"},
    )


def mh_step_rate_prod(moduli: ScheduleModuli, mh_bound: int, psi: Modulus) -> RateCertificate:
    """Step-residual rate, product route; psi must bound the reciprocal of the
    coefficient product up to ``mh_tail_index(moduli, mh_bound)``."""
    if mh_bound < 1:
        raise ConsistencyError(f"mh_bound must be a positive integer, got {mh_bound}")
    s1star = moduli.beta_product_decay
    return RateCertificate(
        name="mh-step/product",
        kind=STEP,
        subject=SUBJECT_MH,
        eval_fn=lambda k: s1star(mh_bound * psi(k) * (k + 1) - 1) + 1,
        provenance={"mh_bound": mh_bound, "route": "product"},
    )


def mh_psi(schedule: Schedule, moduli: ScheduleModuli, mh_bound: int) -> Modulus:
    """The reciprocal-product bound matched to ``mh_step_rate_prod``."""
    return psi_from_schedule(schedule, mh_tail_index(moduli, mh_bound))


def mh_fixed_point_rate(
    step_cert: RateCertificate, moduli: ScheduleModuli, mh_bound: int
) -> RateCertificate:
    """Upgrade a Halpern step rate to a map-residual rate via the lambda floor."""
    if step_cert.kind != STEP or step_cert.subject != SUBJECT_MH:
        raise ConsistencyError("need a step-residual rate for the Halpern sequence")
    lf, nf = moduli.lambda_floor, moduli.lambda_floor_from
    s4 = moduli.beta_to_one

    def ev(k: int) -> int:
        return max(nf, step_cert(2 * lf * (k + 1) - 1), s4(2 * mh_bound * lf * (k + 1) - 1))

    return RateCertificate(
        name=f"{step_cert.name}>fixed-point",
        kind=FIXED_POINT,
        subject=SUBJECT_MH,
        eval_fn=ev,
        provenance={"mh_bound": mh_bound, "from": step_cert.name},
    )


def tm_rates_from_mh(
    moduli: ScheduleModuli, tm_bound: int, mh_step_cert: RateCertificate
) -> tuple[RateCertificate, RateCertificate]:
    """Anchored-Mann step and map-residual rates from a Halpern step rate.

    The Halpern certificate must have been built with mh_bound = 4 * tm_bound
    (the aligned start lies within tm_bound of the fixed point, so the 4x
    bound covers it); anything else is refused.
    """
    if mh_step_cert.kind != STEP or mh_step_cert.subject != SUBJECT_MH:
        raise ConsistencyError("need a step-residual rate for the Halpern sequence")
    if mh_step_cert.provenance.get("mh_bound") != 4 * tm_bound:
        raise ConsistencyError(
            f"transfer requires mh_bound == 4*tm_bound == {4 * tm_bound}, "
            f"certificate has {mh_step_cert.provenance.get('mh_bound')}"
        )
    s4 = moduli.beta_to_one
    lf, nf = moduli.lambda_floor, moduli.lambda_floor_from

    step = RateCertificate(
        name="tm-step/from-mh",
        kind=STEP,
        subject=SUBJECT_TM,
        eval_fn=lambda k: max(s4(6 * tm_bound * (k + 1) - 1), mh_step_cert(3 * k + 2)),
        provenance={"tm_bound": tm_bound, "from": mh_step_cert.name},
    )

    def ev_fp(k: int) -> int:
        return max(
            s4(6 * tm_bound * (k + 1) - 1),
            nf,
            mh_step_cert(6 * lf * (k + 1) - 1),
            s4(24 * tm_bound * lf * (k + 1) - 1),
        )

    fixed = RateCertificate(
        name="tm-fixed-point/from-mh",
        kind=FIXED_POINT,
        subject=SUBJECT_TM,
        eval_fn=ev_fp,
        provenance={"tm_bound": tm_bound, "from": mh_step_cert.name},
    )
    return step, fixed


@dataclass(frozen=True)
class MhFromTmRates:
    """Halpern-sequence rates obtained through the reverse transfer.

    Product-route members are None when a vanishing coefficient makes the
    reciprocal-product bound impossible.
    """

    step_div: RateCertificate
    fixed_div: RateCertificate
    step_prod: RateCertificate | None
    fixed_prod: RateCertificate | None


def mh_rates_from_tm(
    moduli: ScheduleModuli,
    anchor_bound: int,
    schedule: Schedule | None = None,
) -> MhFromTmRates:
    """Rates for the Halpern sequence derived through the Mann-side results.

    ``anchor_bound`` is an integer >= max{d(u,p), d(y_0,p)}.  The derivation
    runs the linked Mann iteration started at y_0 with beta_0 forced to 1,
    which never changes the Halpern sequence itself.  The product route needs
    the schedule to compute the reciprocal-product bound.
    """
    if anchor_bound < 1:
        raise ConsistencyError(f"anchor_bound must be a positive integer, got {anchor_bound}")
    K = anchor_bound
    s1, s1star = moduli.beta_sum_divergence, moduli.beta_product_decay
    s2, s3, s4 = moduli.beta_diff_cauchy, moduli.lambda_diff_cauchy, moduli.beta_to_one
    lf, nf = moduli.lambda_floor, moduli.lambda_floor_from

    def chi(k: int) -> int:
        return max(s2(8 * K * (k + 1) - 1), s3(8 * K * (k + 1) - 1))

    def theta(k: int) -> int:
        return s4(6 * K * (k + 1) - 1)

    def ev_step_div(k: int) -> int:
        return max(theta(k), s1(chi(9 * k + 8) + 2 + ceil_log(18 * K * (k + 1))) + 1)

    step_div = RateCertificate(
        name="mh-step/from-tm-divergence",
        kind=STEP,
        subject=SUBJECT_MH,
        eval_fn=ev_step_div,
        provenance={"anchor_bound": K, "route": "divergence"},
    )

    def upgraded(step_cert: RateCertificate, name: str) -> RateCertificate:
        def ev(k: int) -> int:
            return max(theta(k), nf, step_cert(6 * lf * (k + 1) - 1),
                       s4(12 * K * lf * (k + 1) - 1))

        return RateCertificate(
            name=name,
            kind=FIXED_POINT,
            subject=SUBJECT_MH,
            eval_fn=ev,
            provenance={"anchor_bound": K, "from": step_cert.name},
        )

    fixed_div = upgraded(step_div, "mh-fixed-point/from-tm-divergence")

    step_prod = fixed_prod = None
    if schedule is not None:
        try:
            psi = psi_from_schedule(schedule, lambda j: chi(3 * j + 2))
            psi(0)  # probe for vanishing coefficients
        except Exception:
            psi = None
        if psi is not None:

            def ev_step_prod(k: int) -> int:
                psi_star = 18 * K * (k + 1) * psi(3 * k + 2)
                return max(theta(k), s1star(psi_star - 1) + 1, chi(9 * k + 8) + 2)

            step_prod = RateCertificate(
                name="mh-step/from-tm-product",
                kind=STEP,
                subject=SUBJECT_MH,
                eval_fn=ev_step_prod,
                provenance={"anchor_bound": K, "route": "product"},
            )
            fixed_prod = upgraded(step_prod, "mh-fixed-point/from-tm-product")

    return MhFromTmRates(step_div, fixed_div, step_prod, fixed_prod)


@dataclass
class RecurrenceReport:
    """Outcome of the averaged-recurrence envelope check."""

    hypothesis_ok: bool
    conclusion_ok: bool
    hypothesis_witness: dict | None
    conclusion_witness: dict | None

    @property
    def passed(self) -> bool:
        return self.hypothesis_ok and self.conclusion_ok


def sabach_shtern_check(
    a: Sequence[float], c: Sequence[float], L: float, horizon: int, tol: float = 1e-12
) -> RecurrenceReport:
    """Audit the averaged recurrence a_{n+1} <= (1-b_{n+1}) a_n + (b_n - b_{n+1}) c_n
    with b_n = min{2/n, 1}, and its 2L/n conclusion, on indices 1..horizon.

    Sequences are indexed by n (entry 0 is ignored).  Hypothesis violations
    and conclusion violations are reported separately: a conclusion violation
    on an instance whose hypothesis holds falsifies the envelope itself.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if len(a) < horizon + 1:
        raise ValueError(f"need a_1..a_{horizon}, got {len(a) - 1} entries")

    hyp_witness = None
    if a[1] > L + tol:
        hyp_witness = {"what": "a_1 > L", "a_1": float(a[1]), "L": L}
    if hyp_witness is None:
        for n in range(1, horizon):
            if n < len(c) and c[n] > L + tol:
                hyp_witness = {"what": "c_n > L", "n": n, "c_n": float(c[n])}
                break
            bn = min(2.0 / n, 1.0)
            bn1 = min(2.0 / (n + 1), 1.0)
            cn = c[n] if n < len(c) else 0.0
            bound = (1.0 - bn1) * a[n] + (bn - bn1) * cn
            if a[n + 1] > bound + tol:
                hyp_witness = {
                    "what": "recurrence", "n": n,
                    "a_next": float(a[n + 1]), "bound": float(bound),
                }
                break

    conc_witness = None
    for n in range(1, horizon + 1):
        if a[n] > 2.0 * L / n + tol:
            conc_witness = {"n": n, "a_n": float(a[n]), "bound": 2.0 * L / n}
            break

    return RecurrenceReport(hyp_witness is None, conc_witness is None, hyp_witness, conc_witness)


LINEAR_KINDS = ("mh", "tm", "tm-from-mh", "mh-from-tm")


@dataclass(frozen=True)
class LinearEnvelope:
    """O(1/n) residual bounds for the two-over-n coefficient family."""

    kind: str
    subject: str
    lam: float
    constant: int
    valid_from: int
    step_fn: Callable[[int], float]
    fixed_point_fn: Callable[[int], float]

    def step_bound(self, n: int) -> float:
        return self.step_fn(n)

    def fixed_point_bound(self, n: int) -> float:
        return self.fixed_point_fn(n)


def linear_envelopes(kind: str, constant: int, schedule: Schedule) -> LinearEnvelope:
    """The explicit O(1/n) bounds; ``constant`` is the mh_bound for kind
    'mh' and the tm/anchor bound for the other kinds."""
    if schedule.family != "sabach":
        raise ConsistencyError(
            f"linear envelopes hold for the 'sabach' family only, got {schedule.family!r}"
        )
    if constant < 1:
        raise ConsistencyError(f"constant must be a positive integer, got {constant}")
    lam = schedule.lam(0)

    if kind == "mh":
        return LinearEnvelope(
            kind, SUBJECT_MH, lam, constant, 0,
            step_fn=lambda n: 2.0 * constant / (n + 1),
            fixed_point_fn=lambda n: 4.0 * constant / (lam * (n + 1)),
        )
    if kind == "tm":
        return LinearEnvelope(
            kind, SUBJECT_TM, lam, constant, 1,
            step_fn=lambda n: 4.0 * constant / n,
            fixed_point_fn=lambda n: 8.0 * constant / (lam * n),
        )
    if kind == "tm-from-mh":
        return LinearEnvelope(
            kind, SUBJECT_TM, lam, constant, 1,
            step_fn=lambda n: 16.0 * constant / n,
            fixed_point_fn=lambda n: 24.0 * constant / (lam * n),
        )
    if kind == "mh-from-tm":
        return LinearEnvelope(
            kind, SUBJECT_MH, lam, constant, 1,
            step_fn=lambda n: 12.0 * constant / n,
            fixed_point_fn=lambda n: 16.0 * constant / (lam * n),
        )
    raise ConsistencyError(f"unknown linear envelope kind {kind!r}")


def check_envelope(
    traj: Trajectory, env: LinearEnvelope, tol: float = 1e-9
) -> tuple[float, dict | None]:
    """Minimum slack of bound - residual over the run (negative => violation)."""
    step = _residual_series(traj, env.subject, STEP)
    fixed = _residual_series(traj, env.subject, FIXED_POINT)
    worst = math.inf
    witness = None
    for n in range(env.valid_from, len(step)):
        slack = env.step_bound(n) - step[n]
        if slack < worst:
            worst, witness = slack, {"series": "step", "n": n, "residual": float(step[n])}
    for n in range(env.valid_from, len(fixed)):
        slack = env.fixed_point_bound(n) - fixed[n]
        if slack < worst:
            worst, witness = slack, {"series": "fixed-point", "n": n, "residual": float(fixed[n])}
    return worst, (witness if worst < -tol else None)


def _residual_series(traj: Trajectory, subject: str, kind: str) -> np.ndarray:
    """Pick the residual series a certificate talks about from a trajectory.

    Subject 'mh' resolves to the companion sequence of an anchored-Mann run:
    those companions are exactly the Halpern sequence started at the aligned
    y_0, so certificates for it can be audited from either run.
    """
    if traj.kind == TIKHONOV_MANN:
        if subject == SUBJECT_TM:
            if kind == STEP:
                if traj.step_residuals is None:
                    raise ValueError("trajectory was run without residuals")
                return traj.step_residuals
            if kind == FIXED_POINT:
                if traj.fixed_point_residuals is None:
                    raise ValueError("trajectory was run without residuals")
                return traj.fixed_point_residuals
            if kind == COMPANION_GAP:
                return traj.companion_gap()
        if subject == SUBJECT_MH:
            if kind == STEP:
                return traj.companion_step_residuals()
            if kind == FIXED_POINT:
                return traj.companion_fixed_point_residuals()
    if traj.kind == MODIFIED_HALPERN and subject == SUBJECT_MH:
        if kind == STEP:
            if traj.step_residuals is None:
                raise ValueError("trajectory was run without residuals")
            return traj.step_residuals
        if kind == FIXED_POINT:
            if traj.fixed_point_residuals is None:
                raise ValueError("trajectory was run without residuals")
            return traj.fixed_point_residuals
    raise ConsistencyError(
        f"cannot resolve subject {subject!r}/{kind!r} on a {traj.kind} trajectory"
    )


@dataclass
class CertificateRow:
    k: int
    index: int
    margin: float | None
    status: str  # "pass" | "fail" | "skipped"
    witness: dict | None = None


@dataclass
class CertificateReport:
    certificate: str
    rows: list[CertificateRow]
    horizon: int
    tol: float

    @property
    def passed(self) -> bool:
        return all(row.status != "fail" for row in self.rows)

    @property
    def checked(self) -> int:
        return sum(1 for row in self.rows if row.status != "skipped")

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "N", "empirical_margin", "status"])
            for row in self.rows:
                margin = "" if row.margin is None else f"{row.margin:.17g}"
                writer.writerow([row.k, row.index, margin, row.status])


def verify_certificate(
    traj: Trajectory,
    cert: RateCertificate,
    k_max: int,
    horizon: int | None = None,
    tol: float = 1e-9,
) -> CertificateReport:
    """Check residual_n <= 1/(k+1) + tol for all n in [cert(k), horizon].

    Levels whose index exceeds the horizon (or the trajectory) are reported
    as skipped; the margin is the smallest slack over the tail.
    """
    series = _residual_series(traj, cert.subject, cert.kind)
    limit = len(series) - 1
    if horizon is not None:
        limit = min(limit, horizon)
    if limit < 0:
        raise ValueError("trajectory too short to verify anything")

    # suffix_max[n] = max residual over [n, limit]; one O(1) lookup per level
    suffix = np.maximum.accumulate(series[: limit + 1][::-1])[::-1]

    rows = []
    for k in range(k_max + 1):
        idx = cert(k)
        if idx > limit:
            rows.append(CertificateRow(k, idx, None, "skipped"))
            continue
        bound = 1.0 / (k + 1) + tol
        worst = float(suffix[idx])
        margin = bound - worst
        if worst <= bound:
            rows.append(CertificateRow(k, idx, margin, "pass"))
        else:
            n_bad = idx + int(np.argmax(series[idx : limit + 1] > bound))
            rows.append(CertificateRow(k, idx, margin, "fail",
                        {"n": n_bad, "residual": float(series[n_bad])}))
    return CertificateReport(cert.name, rows, limit, tol)


def empirical_rate_table(series: np.ndarray, k_max: int) -> list[int | None]:
    """Least index from which the series stays within 1/(k+1), per level.

    Brute-force suffix scan; the independent oracle the closed-form
    certificates are compared against.
    """
    suffix = np.maximum.accumulate(series[::-1])[::-1]
    table: list[int | None] = []
    for k in range(k_max + 1):
        hits = np.nonzero(suffix <= 1.0 / (k + 1))[0]
        table.append(int(hits[0]) if hits.size else None)
    return table


def standard_certificates(
    schedule: Schedule,
    moduli: ScheduleModuli,
    tm_bound: int,
    mh_bound: int,
    anchor_bound: int,
    k_full: int,
    k_div: int,
) -> list[tuple[RateCertificate, str, int]]:
    """Every closed-form certificate the given family supports.

    Returns (certificate, subject, level range) triples; divergence-route
    certificates get the smaller range since their indices grow exponentially.
    The product route drops out silently when a vanishing coefficient makes
    the reciprocal-product bound impossible.
    """
    suite: list[tuple[RateCertificate, str, int]] = []
    suite.append((companion_gap_rate(moduli, tm_bound), SUBJECT_TM, k_full))

    div = mh_step_rate_div(moduli, mh_bound)
    suite.append((div, SUBJECT_MH, k_div))
    suite.append((mh_fixed_point_rate(div, moduli, mh_bound), SUBJECT_MH, k_div))

    try:
        psi = mh_psi(schedule, moduli, mh_bound)
        psi(0)
    except ScheduleError:
        psi = None
    if psi is not None:
        prod = mh_step_rate_prod(moduli, mh_bound, psi)
        suite.append((prod, SUBJECT_MH, k_full))
        suite.append((mh_fixed_point_rate(prod, moduli, mh_bound), SUBJECT_MH, k_full))

        psi4 = mh_psi(schedule, moduli, 4 * tm_bound)
        linked = mh_step_rate_prod(moduli, 4 * tm_bound, psi4)
        tm_step, tm_fixed = tm_rates_from_mh(moduli, tm_bound, linked)
        suite.append((tm_step, SUBJECT_TM, k_full))
        suite.append((tm_fixed, SUBJECT_TM, k_full))
    else:
        linked = mh_step_rate_div(moduli, 4 * tm_bound)
        tm_step, tm_fixed = tm_rates_from_mh(moduli, tm_bound, linked)
        suite.append((tm_step, SUBJECT_TM, k_div))
        suite.append((tm_fixed, SUBJECT_TM, k_div))

    reverse = mh_rates_from_tm(moduli, anchor_bound, schedule)
    suite.append((reverse.step_div, SUBJECT_MH, k_div))
    suite.append((reverse.fixed_div, SUBJECT_MH, k_div))
    if reverse.step_prod is not None:
        suite.append((reverse.step_prod, SUBJECT_MH, k_full))
        suite.append((reverse.fixed_prod, SUBJECT_MH, k_full))
    return suite


def empirical_certificate(
    traj: Trajectory, kind: str, subject: str, k_max: int, name: str = "empirical"
) -> RateCertificate:
    """Table-backed certificate read off a trajectory (valid for it only)."""
    series = _residual_series(traj, subject, kind)
    table = empirical_rate_table(series, k_max)
    if any(v is None for v in table):
        raise ValueError(f"series never settles below 1/(k+1) for some k <= {k_max}")

    def ev(k: int) -> int:
        if k >= len(table):
            raise ValueError(f"empirical certificate only covers k <= {len(table) - 1}")
        return table[k]

    return RateCertificate(name, kind, subject, ev, {"empirical": True, "k_max": k_max})
