"""Scalar coefficient schedules and their quantitative moduli.

A schedule is the pair of [0,1]-valued sequences (beta_n, lambda_n) driving
the iterations; the moduli quantify how fast the schedule's sums, products and
limits behave.  Rate formulas consume moduli only, so each family constructor
returns both, and ``validate_moduli`` audits every claimed modulus against the
actual partial sums/products.

Modulus conventions (all functions take k and return an index N):

* rate of convergence of a_n -> a:  |a_n - a| <= 1/(k+1) for every n >= N;
* Cauchy modulus of a series with partial sums s_m:  s_m - s_N <= 1/(k+1)
  for every m > N (tail summed from N+1);
* rate of divergence:  the partial sum up to N is >= k.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np

Modulus = Callable[[int], int]


class ScheduleError(ValueError):
    """Schedule family misuse or an impossible modulus request."""


def _ceil_exp(exponent: float) -> int:
    # smallest handy integer >= e**exponent; falls back to a coarse power
    # bound where exp() would overflow (any valid divergence rate works)
    if exponent <= 700:
        return max(1, math.ceil(math.exp(exponent)))
    return 3 ** math.ceil(exponent)


def _check_unit(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ScheduleError(f"{name} must lie in [0, 1], got {value}")
    return value


@dataclass(frozen=True)
class Schedule:
    """Coefficient pair (beta_n, lambda_n) with lazy formula evaluation.

    ``beta0`` overrides the family formula at n = 0 only; the anchored-Mann
    recursion reads beta_0 while the anchored-Halpern one never does, so both
    start conventions stay constructible from one family.
    """

    family: str
    beta_fn: Callable[[int], float]
    lambda_fn: Callable[[int], float]
    params: dict
    beta0: float | None = None
    beta_exact_fn: Callable[[int], Fraction] | None = None

    def beta(self, n: int) -> float:
        if n == 0 and self.beta0 is not None:
            return self.beta0
        return self.beta_fn(n)

    def lam(self, n: int) -> float:
        return self.lambda_fn(n)

    def beta_exact(self, n: int) -> Fraction:
        """beta_n as an exact rational (for product certificates)."""
        if n == 0 and self.beta0 is not None:
            return Fraction(self.beta0)
        if self.beta_exact_fn is not None:
            return self.beta_exact_fn(n)
        return Fraction(self.beta_fn(n))

    def with_beta0(self, value: float) -> "Schedule":
        return replace(self, beta0=_check_unit(value, "beta0"))

    def beta_array(self, upto: int) -> np.ndarray:
        """beta_0 .. beta_upto as one vector (validators, exports)."""
        return np.array([self.beta(n) for n in range(upto + 1)])

    def lambda_array(self, upto: int) -> np.ndarray:
        return np.array([self.lam(n) for n in range(upto + 1)])

    def describe(self) -> dict:
        d = {"family": self.family, **self.params}
        if self.beta0 is not None:
            d["beta0"] = self.beta0
        return d


@dataclass(frozen=True)
class ScheduleModuli:
    """Quantitative certificates for the schedule conditions.

    beta_sum_divergence   rate of divergence of sum_{n>=2} (1 - beta_n)
    beta_product_decay    rate of convergence to 0 of prod_{n>=1} beta_{n+1}
    beta_diff_cauchy      Cauchy modulus of sum |beta_{n+1} - beta_n|
    lambda_diff_cauchy    Cauchy modulus of sum |lambda_{n+1} - lambda_n|
    beta_to_one           rate of convergence of beta_n -> 1
    lambda_floor          integer L with lambda_n >= 1/L ...
    lambda_floor_from     ... for every n >= this index
    lambda_to_one         optional rate of lambda_n -> 1; carried as metadata
                          only, no implemented rate consumes it
    """

    beta_sum_divergence: Modulus
    beta_product_decay: Modulus
    beta_diff_cauchy: Modulus
    lambda_diff_cauchy: Modulus
    beta_to_one: Modulus
    lambda_floor: int
    lambda_floor_from: int
    lambda_to_one: Modulus | None = None


def _lambda_floor(lam: float) -> int:
    return max(1, math.ceil(1.0 / lam))


def harmonic_schedule(lambda_const: float, beta0: float | None = None) -> tuple[Schedule, ScheduleModuli]:
    """beta_n = 1 - 1/(n+1) with a constant lambda; quadratic-rate family."""
    lam = float(lambda_const)
    if not 0.0 < lam <= 1.0:
        raise ScheduleError(f"lambda must lie in (0, 1], got {lam}")
    schedule = Schedule(
        family="harmonic",
        beta_fn=lambda n: 1.0 - 1.0 / (n + 1),
        lambda_fn=lambda n, lam=lam: lam,
        params={"lambda": lam},
        beta0=None if beta0 is None else _check_unit(beta0, "beta0"),
        beta_exact_fn=lambda n: Fraction(n, n + 1),
    )
    moduli = ScheduleModuli(
        beta_sum_divergence=lambda k: _ceil_exp(k + 1),
        beta_product_decay=lambda k: 2 * k,
        beta_diff_cauchy=lambda k: k,
        lambda_diff_cauchy=lambda k: 0,
        beta_to_one=lambda k: k,
        lambda_floor=_lambda_floor(lam),
        lambda_floor_from=0,
    )
    return schedule, moduli


def sabach_schedule(lambda_const: float, beta0: float | None = 0.0) -> tuple[Schedule, ScheduleModuli]:
    """beta_1 = 0, beta_n = 1 - 2/n for n >= 2; the linear-rate family.

    Extends to n = 0 with beta_0 = 0 by default (matching 1 - beta_n =
    min{2/n, 1}); pass another beta0 for a different start convention.
    """
    lam = float(lambda_const)
    if not 0.0 < lam <= 1.0:
        raise ScheduleError(f"lambda must lie in (0, 1], got {lam}")

    def beta(n: int) -> float:
        return 0.0 if n < 2 else 1.0 - 2.0 / n

    schedule = Schedule(
        family="sabach",
        beta_fn=beta,
        lambda_fn=lambda n, lam=lam: lam,
        params={"lambda": lam},
        beta0=None if beta0 is None else _check_unit(beta0, "beta0"),
        beta_exact_fn=lambda n: Fraction(0) if n < 2 else Fraction(n - 2, n),
    )
    moduli = ScheduleModuli(
        beta_sum_divergence=lambda k: _ceil_exp(0.5 * k + 1),
        beta_product_decay=lambda k: 1,  # beta_2 = 0 kills every partial product
        beta_diff_cauchy=lambda k: 2 * k + 1,
        lambda_diff_cauchy=lambda k: 0,
        beta_to_one=lambda k: 2 * (k + 1),
        lambda_floor=_lambda_floor(lam),
        lambda_floor_from=0,
    )
    return schedule, moduli


def constant_schedule(beta_const: float, lambda_const: float) -> Schedule:
    """Constant coefficients (plain Mann/Halpern degenerations); no moduli."""
    b = _check_unit(beta_const, "beta")
    lam = _check_unit(lambda_const, "lambda")
    return Schedule(
        family="constant",
        beta_fn=lambda n, b=b: b,
        lambda_fn=lambda n, lam=lam: lam,
        params={"beta": b, "lambda": lam},
        beta_exact_fn=lambda n, b=b: Fraction(b),
    )


def affine_modulus(a: float, b: float) -> Modulus:
    """k -> ceil(a*k + b), floored at 0; the config form for custom moduli."""

    def fn(k: int) -> int:
        return max(0, math.ceil(a * k + b))

    return fn


def custom_schedule(
    betas,
    lambdas,
    moduli: ScheduleModuli | None = None,
    name: str = "custom",
) -> tuple[Schedule, ScheduleModuli | None]:
    """Table-backed schedule; queries beyond the table raise ScheduleError."""
    bt = [_check_unit(b, "beta") for b in betas]
    lt = [_check_unit(x, "lambda") for x in lambdas]
    if len(bt) != len(lt):
        raise ScheduleError("beta and lambda tables must have equal length")
    if not bt:
        raise ScheduleError("empty schedule table")

    def lookup(table, n):
        if n >= len(table):
            raise ScheduleError(f"schedule table ends at n = {len(table) - 1}, queried {n}")
        return table[n]

    schedule = Schedule(
        family=name,
        beta_fn=lambda n: lookup(bt, n),
        lambda_fn=lambda n: lookup(lt, n),
        params={"length": len(bt)},
    )
    return schedule, moduli


def load_schedule_table(path: str | Path) -> tuple[list[float], list[float]]:
    """Read a CSV with columns n, beta, lambda (header optional, n sorted)."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                n, b, lam = int(row[0]), float(row[1]), float(row[2])
            except ValueError:
                continue  # header line
            rows.append((n, b, lam))
    rows.sort()
    if [n for n, _, _ in rows] != list(range(len(rows))):
        raise ScheduleError(f"{path}: table must cover n = 0..N without gaps")
    return [b for _, b, _ in rows], [lam for _, _, lam in rows]


def psi_from_schedule(schedule: Schedule, gamma: Modulus) -> Modulus:
    """Least integer reciprocal bound for the running coefficient product.

    Returns psi with 1/psi(k) <= prod_{n=0..gamma(k)} beta_{n+1}, computed in
    exact rational arithmetic; raises ScheduleError when a zero coefficient
    makes the product vanish (no valid psi exists).
    """
    cache: dict[int, int] = {}

    def psi(k: int) -> int:
        if k in cache:
            return cache[k]
        upto = gamma(k)
        prod = Fraction(1)
        for n in range(upto + 1):
            b = schedule.beta_exact(n + 1)
            if b <= 0:
                raise ScheduleError(
                    f"beta_{n + 1} = 0: the coefficient product vanishes, no psi exists"
                )
            prod *= b
        value = max(1, -((-prod.denominator) // prod.numerator))  # ceil(1/prod)
        cache[k] = value
        return value

    return psi


@dataclass
class ModulusCheck:
    condition: str
    passed: bool
    inconclusive: bool
    witness: dict | None

    @property
    def violated(self) -> bool:
        return not self.passed and not self.inconclusive


@dataclass
class ModuliReport:
    k_max: int
    horizon: int
    checks: list[ModulusCheck]

    def check(self, condition: str) -> ModulusCheck:
        for c in self.checks:
            if c.condition == condition:
                return c
        raise KeyError(condition)

    @property
    def violations(self) -> list[ModulusCheck]:
        return [c for c in self.checks if c.violated]

    @property
    def passed(self) -> bool:
        return not self.violations


def validate_moduli(
    schedule: Schedule,
    moduli: ScheduleModuli,
    k_max: int = 50,
    horizon: int = 100_000,
    tol: float = 1e-12,
) -> ModuliReport:
    """Audit every claimed modulus against partial sums/products to ``horizon``.

    A claim whose modulus exceeds the horizon is flagged inconclusive rather
    than failed; everything decidable is checked for every k <= k_max.
    """
    betas = schedule.beta_array(horizon + 1)
    lams = schedule.lambda_array(horizon + 1)
    one_minus = 1.0 - betas

    # prefix sums: dsum_b[m] = sum_{n=0}^{m-1} |beta_{n+1}-beta_n|
    dsum_b = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(betas)))])
    dsum_l = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(lams)))])
    # div_sum[m] = sum_{n=2}^{m} (1-beta_n)
    div_sum = np.cumsum(one_minus)
    div_sum = div_sum - div_sum[1]
    # prod[m] = prod_{n=1}^{m} beta_{n+1}
    prods = np.concatenate([[1.0], np.cumprod(betas[2 : horizon + 2])])

    checks: list[ModulusCheck] = []

    def run(condition: str, per_k: Callable[[int], tuple[bool, bool, dict | None]]) -> None:
        # a violation at any k fails the condition; with none found, any
        # undecidable k leaves it inconclusive
        first_inconclusive = None
        for k in range(k_max + 1):
            ok, inconclusive, witness = per_k(k)
            if not ok:
                checks.append(ModulusCheck(condition, False, False, witness))
                return
            if inconclusive and first_inconclusive is None:
                first_inconclusive = witness
        checks.append(ModulusCheck(condition, True, first_inconclusive is not None, first_inconclusive))

    def check_divergence(k):
        m = moduli.beta_sum_divergence(k)
        if m > horizon:
            return True, True, {"k": k, "modulus": m, "horizon": horizon}
        total = div_sum[m] if m >= 2 else 0.0
        if total < k - tol:
            return False, False, {"k": k, "modulus": m, "partial_sum": float(total)}
        return True, False, None

    def check_product(k):
        m0 = moduli.beta_product_decay(k)
        if m0 > horizon:
            return True, True, {"k": k, "modulus": m0, "horizon": horizon}
        bound = 1.0 / (k + 1) + tol
        tail = prods[m0:]
        bad = np.nonzero(tail > bound)[0]
        if bad.size:
            m = m0 + int(bad[0])
            return False, False, {"k": k, "m": m, "product": float(prods[m])}
        return True, False, None

    def cauchy_checker(dsum):
        # dsum[j] = sum of the first j successive differences, so the tail
        # sum_{n=N+1..m} equals dsum[m+1] - dsum[N+1]
        def check(k, modulus):
            start = modulus(k)
            if start > horizon:
                return True, True, {"k": k, "modulus": start, "horizon": horizon}
            bound = 1.0 / (k + 1) + tol
            tails = dsum[start + 2 :] - dsum[start + 1]
            bad = np.nonzero(tails > bound)[0]
            if bad.size:
                m = start + 1 + int(bad[0])
                return False, False, {"k": k, "m": m, "tail_sum": float(dsum[m + 1] - dsum[start + 1])}
            return True, False, None

        return check

    cb = cauchy_checker(dsum_b)
    cl = cauchy_checker(dsum_l)

    def check_beta_to_one(k):
        start = moduli.beta_to_one(k)
        if start > horizon:
            return True, True, {"k": k, "modulus": start, "horizon": horizon}
        bound = 1.0 / (k + 1) + tol
        tail = one_minus[start : horizon + 1]
        bad = np.nonzero(tail > bound)[0]
        if bad.size:
            n = start + int(bad[0])
            return False, False, {"k": k, "n": n, "one_minus_beta": float(one_minus[n])}
        return True, False, None

    run("beta-sum-divergence", check_divergence)
    run("beta-product-decay", check_product)
    run("beta-diff-cauchy", lambda k: cb(k, moduli.beta_diff_cauchy))
    run("lambda-diff-cauchy", lambda k: cl(k, moduli.lambda_diff_cauchy))
    run("beta-to-one", check_beta_to_one)

    floor = 1.0 / moduli.lambda_floor - tol
    tail = lams[moduli.lambda_floor_from : horizon + 1]
    bad = np.nonzero(tail < floor)[0]
    if bad.size:
        n = moduli.lambda_floor_from + int(bad[0])
        checks.append(ModulusCheck("lambda-floor", False, False,
                                   {"n": n, "lambda": float(lams[n])}))
    else:
        checks.append(ModulusCheck("lambda-floor", True, False, None))

    return ModuliReport(k_max, horizon, checks)
