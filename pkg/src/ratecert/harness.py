"""Config-driven experiment commands behind the CLI.

Each command reads an ExperimentConfig, writes CSV/JSON artifacts into an
output directory and returns the process exit code: 0 when every check
passes, 1 when a mathematical check failed (the report carries a witness),
with config problems raised as ConfigError for the CLI to map to 2.

Outputs are byte-deterministic for a fixed config and seed: all randomness
flows through one seeded generator and floats are serialized with 17
significant digits.
"""

from __future__ import annotations

import csv
import time
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .iterations import (
    Trajectory,
    check_link,
    linked_start,
    modified_halpern_run,
    tikhonov_mann_run,
)
from .metastability import (
    MetaRow,
    counter_preset,
    empirical_meta,
    empirical_meta_rate,
    meta_rows_to_csv,
    transform_meta,
    verify_meta,
)
from .operators import ConfigError, bound_constants
from .rates import (
    FIXED_POINT,
    STEP,
    SUBJECT_MH,
    SUBJECT_TM,
    RateCertificate,
    check_envelope,
    companion_gap_rate,
    empirical_certificate,
    linear_envelopes,
    standard_certificates,
    verify_certificate,
)
from .schedules import ScheduleError
from .spaces import DomainError, check_axioms


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _say(quiet: bool, message: str) -> None:
    if not quiet:
        print(message)


def cmd_axioms(cfg: ExperimentConfig, out_dir: Path, quiet: bool = False) -> int:
    """Run the axiom checker on the configured space; nonzero iff an
    expected-pass axiom fails."""
    started = time.perf_counter()
    report = check_axioms(
        cfg.space, trials=cfg.axioms.trials, tol=cfg.axioms.tol,
        rng=np.random.default_rng(cfg.seed),
    )
    path = out_dir / f"axioms_{cfg.space.model}.json"
    path.write_text(report.to_json() + "\n")

    ok = report.passed(cfg.axioms.expect)
    for res in report.results:
        expected = cfg.axioms.expect.get(res.axiom, True)
        mark = "ok" if res.passed == expected else "UNEXPECTED"
        _say(quiet, f"{res.axiom}: pass={res.passed} expected={expected} [{mark}]")
    _say(quiet, f"wrote {path} ({time.perf_counter() - started:.2f}s)")
    return 0 if ok else 1


def _require_run_inputs(cfg: ExperimentConfig) -> None:
    cfg.require("operator", "schedule", "u", "x0")


def _resolved_y0(cfg: ExperimentConfig):
    if cfg.y0_spec == "link":
        return linked_start(cfg.space, cfg.u, cfg.x0, cfg.schedule)
    return cfg.y0_spec


def _run_pair(cfg: ExperimentConfig, n_steps: int) -> tuple[Trajectory, Trajectory]:
    y0 = _resolved_y0(cfg)
    try:
        tm = tikhonov_mann_run(cfg.space, cfg.operator, cfg.u, cfg.x0, cfg.schedule, n_steps)
        mh = modified_halpern_run(cfg.space, cfg.operator, cfg.u, y0, cfg.schedule, n_steps)
    except (DomainError, ScheduleError) as exc:
        raise ConfigError(str(exc)) from exc
    return tm, mh


def cmd_run(cfg: ExperimentConfig, out_dir: Path, quiet: bool = False) -> int:
    """Run both iterations with the aligned start; write trajectories and
    the linkage deviations."""
    _require_run_inputs(cfg)
    started = time.perf_counter()
    tm, mh = _run_pair(cfg, cfg.n_steps)

    tm_path = out_dir / "tm_trajectory.csv"
    mh_path = out_dir / "mh_trajectory.csv"
    tm.to_csv(tm_path)
    mh.to_csv(mh_path)

    d = cfg.space.dist
    link_path = out_dir / "link.csv"
    worst_comp = worst_step = 0.0
    with open(link_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "d_companion_vs_halpern", "d_step_vs_companion"])
        for n in range(cfg.n_steps + 1):
            dc = d(tm.companions[n], mh.points[n])
            worst_comp = max(worst_comp, dc)
            if n < cfg.n_steps:
                ds = d(tm.points[n + 1], mh.companions[n])
                worst_step = max(worst_step, ds)
                writer.writerow([n, _fmt(dc), _fmt(ds)])
            else:
                writer.writerow([n, _fmt(dc), ""])

    ok = worst_comp <= 1e-9 and worst_step <= 1e-9
    _say(quiet, f"link deviations: companion {worst_comp:.3e}, step {worst_step:.3e}")
    _say(quiet, f"wrote {tm_path}, {mh_path}, {link_path} "
                f"({time.perf_counter() - started:.2f}s)")
    return 0 if ok else 1


def build_certificate_suite(cfg: ExperimentConfig):
    """All closed-form certificates applicable to the configured family."""
    if cfg.moduli is None:
        raise ConfigError("schedule family carries no moduli; certificates unavailable")
    y0 = _resolved_y0(cfg)
    bc = bound_constants(cfg.operator, cfg.u, cfg.x0, y0)
    # the reverse transfer needs an integer bound on the Halpern start data only
    anchor_bound = bound_constants(cfg.operator, cfg.u, y0, y0).tm_bound
    suite = standard_certificates(
        cfg.schedule, cfg.moduli, bc.tm_bound, bc.mh_bound, anchor_bound,
        cfg.certify.k_max, cfg.certify.k_max_divergence,
    )
    return suite, bc


ENVELOPE_KINDS = ("mh", "tm", "tm-from-mh", "mh-from-tm")


def _corrupted_suite(tm: Trajectory, mh: Trajectory, k_max: int):
    """Empirical certificates with halved indices: invalid by construction."""
    suite = []
    for traj, subject in ((tm, SUBJECT_TM), (mh, SUBJECT_MH)):
        for kind in (STEP, FIXED_POINT):
            try:
                honest = empirical_certificate(traj, kind, subject, k_max)
            except ValueError:
                continue
            halved = RateCertificate(
                name=f"{honest.name}-{subject}-{kind}/halved",
                kind=kind,
                subject=subject,
                eval_fn=lambda k, h=honest: h(k) // 2,
                provenance={"corrupted": True},
            )
            suite.append((halved, subject, k_max))
    return suite


def cmd_certify(cfg: ExperimentConfig, out_dir: Path, quiet: bool = False) -> int:
    """Build every applicable certificate, verify against fresh runs, write
    the level/index/margin table; nonzero on any violation."""
    _require_run_inputs(cfg)
    started = time.perf_counter()
    horizon = cfg.certify.horizon
    tm, mh = _run_pair(cfg, horizon + 1)

    if cfg.certify.inject_corruption:
        suite = _corrupted_suite(tm, mh, cfg.certify.k_max)
        bc = None
    else:
        suite, bc = build_certificate_suite(cfg)

    rows_out = []
    failures = 0
    for cert, subject, k_max in suite:
        traj = tm if subject == SUBJECT_TM else mh
        report = verify_certificate(traj, cert, k_max=k_max, horizon=horizon)
        if not report.passed:
            failures += 1
        checked = report.checked
        _say(quiet, f"{cert.name}: {'PASS' if report.passed else 'FAIL'} "
                    f"({checked} levels checked, {len(report.rows) - checked} skipped)")
        for row in report.rows:
            rows_out.append((cert.name, row.k, row.index,
                             "" if row.margin is None else _fmt(row.margin), row.status))

    cert_path = out_dir / "certificates.csv"
    with open(cert_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["certificate", "k", "N", "empirical_margin", "status"])
        writer.writerows(rows_out)

    wrote = [str(cert_path)]
    if not cfg.certify.inject_corruption and cfg.schedule.family == "sabach":
        env_path = out_dir / "envelopes.csv"
        failures += _write_envelopes(cfg, tm, mh, bc, env_path, quiet)
        wrote.append(str(env_path))

    _say(quiet, f"wrote {', '.join(wrote)} ({time.perf_counter() - started:.2f}s)")
    return 0 if failures == 0 else 1


def _sample_grid(n_max: int) -> list[int]:
    grid = set(range(1, min(10, n_max) + 1))
    scale = 10
    while scale <= n_max:
        for mult in (1, 2, 5):
            if mult * scale <= n_max:
                grid.add(mult * scale)
        scale *= 10
    grid.add(n_max)
    return sorted(grid)


def _write_envelopes(cfg, tm, mh, bc, path: Path, quiet: bool) -> int:
    from .rates import _residual_series

    failures = 0
    rows = []
    for kind in ENVELOPE_KINDS:
        constant = bc.mh_bound if kind == "mh" else bc.tm_bound
        env = linear_envelopes(kind, constant, cfg.schedule)
        traj = tm if env.subject == SUBJECT_TM else mh
        slack, witness = check_envelope(traj, env)
        ok = witness is None
        if not ok:
            failures += 1
        _say(quiet, f"envelope {kind}: {'PASS' if ok else 'FAIL'} (min slack {slack:.3e})")
        step = _residual_series(traj, env.subject, STEP)
        fixed = _residual_series(traj, env.subject, FIXED_POINT)
        n_max = min(len(step) - 1, len(fixed) - 1)
        for n in _sample_grid(n_max):
            if n < env.valid_from:
                continue
            rows.append((kind, n,
                         _fmt(step[n]), _fmt(env.step_bound(n)),
                         _fmt(fixed[n]), _fmt(env.fixed_point_bound(n))))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "n", "step_residual", "step_bound",
                         "fp_residual", "fp_bound"])
        writer.writerows(rows)
    return failures


def cmd_meta(cfg: ExperimentConfig, out_dir: Path, quiet: bool = False) -> int:
    """Metastability report: empirical window search, or the transfer of an
    empirically derived rate across the linkage, audited on the target."""
    _require_run_inputs(cfg)
    started = time.perf_counter()
    meta = cfg.meta

    try:
        presets = [counter_preset(spec) for spec in meta.g_presets]
    except ValueError as exc:
        raise ConfigError(f"meta.g_presets: {exc}") from exc

    tm, _ = _run_pair(cfg, meta.n_steps)
    rows = []
    failures = 0

    if meta.mode == "empirical":
        for name, g in presets:
            for k in range(meta.k_max + 1):
                least = empirical_meta(tm, k, g, cap=meta.cap, sequence=meta.source)
                rows.append(MetaRow(k, name, meta.cap, least,
                                    "found" if least is not None else "none"))
                _say(quiet, f"k={k} g={name}: least N = {least}")
    else:
        if cfg.moduli is None:
            raise ConfigError("meta.mode=transform needs a schedule family with moduli")
        y0 = _resolved_y0(cfg)
        bc = bound_constants(cfg.operator, cfg.u, cfg.x0, y0)
        gap = companion_gap_rate(cfg.moduli, bc.tm_bound)
        omega = empirical_meta_rate(tm, cap=meta.cap, sequence=meta.source)
        moved = transform_meta(omega, gap)
        target = "main" if meta.source == "companion" else "companion"
        for name, g in presets:
            for k in range(meta.k_max + 1):
                try:
                    check = verify_meta(tm, moved, k, g, sequence=target)
                except ValueError as exc:
                    raise ConfigError(f"meta: {exc}") from exc
                if check.passed:
                    status = "pass"
                    cross = empirical_meta(tm, k, g, cap=check.bound,
                                           sequence=target, tol=1e-9)
                    if cross is None or cross > check.bound:
                        status, failures = "fail", failures + 1
                elif check.inconclusive:
                    status = "inconclusive"
                else:
                    status, failures = "fail", failures + 1
                rows.append(MetaRow(k, name, check.bound, check.least_n, status))
                _say(quiet, f"k={k} g={name}: bound {check.bound}, "
                            f"least N {check.least_n}, {status}")

    path = out_dir / "meta.csv"
    meta_rows_to_csv(rows, path)
    _say(quiet, f"wrote {path} ({time.perf_counter() - started:.2f}s)")
    return 0 if failures == 0 else 1
