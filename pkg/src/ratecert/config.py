"""Experiment configuration: a single JSON file, validated with keyed paths.

Every harness command reads the same document and uses the sections it
needs; unknown models, kinds or malformed values raise ConfigError with the
offending key path so CLI users get exact positions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .operators import ConfigError, NonexpansiveMap, make_operator
from .schedules import (
    Schedule,
    ScheduleError,
    ScheduleModuli,
    affine_modulus,
    constant_schedule,
    custom_schedule,
    harmonic_schedule,
    load_schedule_table,
    sabach_schedule,
)
from .spaces import DomainError, Point, Space, make_space

_MISSING = object()


def _get(section: dict, key: str, types, path: str, default=_MISSING):
    if not isinstance(section, dict):
        raise ConfigError(f"{path}: expected an object")
    if key not in section:
        if default is _MISSING:
            raise ConfigError(f"{path}.{key}: required key missing")
        return default
    value = section[key]
    if types is not None and not isinstance(value, types):
        raise ConfigError(f"{path}.{key}: expected {types}, got {type(value).__name__}")
    if isinstance(value, bool) and types == (int, float):
        raise ConfigError(f"{path}.{key}: expected a number, got a boolean")
    return value


NUMBER = (int, float)


@dataclass
class AxiomsSection:
    trials: int = 10_000
    tol: float = 1e-9
    expect: dict = field(default_factory=dict)


@dataclass
class CertifySection:
    k_max: int = 20
    k_max_divergence: int = 5
    horizon: int = 200_000
    inject_corruption: bool = False


@dataclass
class MetaSection:
    mode: str = "transform"  # or "empirical"
    k_max: int = 5
    g_presets: list = field(default_factory=lambda: ["const:1", "const:10", "n", "2n"])
    cap: int = 4_000
    n_steps: int = 15_000
    source: str = "companion"


@dataclass
class ExperimentConfig:
    seed: int
    space: Space
    operator: NonexpansiveMap | None
    schedule: Schedule | None
    moduli: ScheduleModuli | None
    u: Point | None
    x0: Point | None
    y0_spec: object  # "link" or an explicit point
    n_steps: int
    axioms: AxiomsSection
    certify: CertifySection
    meta: MetaSection

    def require(self, *names: str) -> None:
        for name in names:
            if getattr(self, name) is None:
                raise ConfigError(f"this command needs the {name!r} section of the config")


def _build_space(doc: dict) -> Space:
    section = _get(doc, "space", dict, "config")
    model = _get(section, "model", str, "space")
    dim = _get(section, "dim", int, "space", default=None)
    rays = _get(section, "rays", int, "space", default=None)
    try:
        return make_space(model, dim=dim, rays=rays)
    except DomainError as exc:
        raise ConfigError(f"space: {exc}") from exc


def _build_operator(doc: dict, space: Space) -> NonexpansiveMap | None:
    section = doc.get("operator")
    if section is None:
        return None
    kind = _get(section, "kind", str, "operator")
    params = _get(section, "params", dict, "operator", default={})
    try:
        return make_operator(kind, params, space)
    except (ConfigError, ValueError) as exc:
        raise ConfigError(f"operator: {exc}") from exc


_MODULI_KEYS = (
    "beta_sum_divergence",
    "beta_product_decay",
    "beta_diff_cauchy",
    "lambda_diff_cauchy",
    "beta_to_one",
)


def _build_custom_moduli(section: dict) -> ScheduleModuli:
    spec = _get(section, "moduli", dict, "schedule")
    kwargs = {}
    for key in _MODULI_KEYS:
        entry = _get(spec, key, dict, "schedule.moduli")
        a = _get(entry, "a", NUMBER, f"schedule.moduli.{key}")
        b = _get(entry, "b", NUMBER, f"schedule.moduli.{key}")
        kwargs[key] = affine_modulus(a, b)
    kwargs["lambda_floor"] = _get(spec, "lambda_floor", int, "schedule.moduli")
    kwargs["lambda_floor_from"] = _get(spec, "lambda_floor_from", int, "schedule.moduli", default=0)
    return ScheduleModuli(**kwargs)


def _build_schedule(doc: dict, base_dir: Path) -> tuple[Schedule | None, ScheduleModuli | None]:
    section = doc.get("schedule")
    if section is None:
        return None, None
    family = _get(section, "family", str, "schedule")
    beta0 = _get(section, "beta0", NUMBER, "schedule", default=None)
    try:
        if family in ("harmonic", "sabach"):
            lam = _get(section, "lambda", NUMBER, "schedule")
            maker = harmonic_schedule if family == "harmonic" else sabach_schedule
            if beta0 is None:
                schedule, moduli = maker(lam)
            else:
                schedule, moduli = maker(lam, beta0=beta0)
        elif family == "constant":
            beta = _get(section, "beta", NUMBER, "schedule")
            lam = _get(section, "lambda", NUMBER, "schedule")
            schedule, moduli = constant_schedule(beta, lam), None
        elif family == "custom":
            table = _get(section, "beta_table", str, "schedule")
            betas, lambdas = load_schedule_table(base_dir / table)
            moduli = _build_custom_moduli(section) if "moduli" in section else None
            schedule, moduli = custom_schedule(betas, lambdas, moduli)
            if beta0 is not None:
                schedule = schedule.with_beta0(beta0)
        else:
            raise ConfigError(f"schedule.family: unknown family {family!r}")
    except ScheduleError as exc:
        raise ConfigError(f"schedule: {exc}") from exc
    return schedule, moduli


def _build_anchor(section: dict, key: str, space: Space, required: bool):
    value = section.get(key)
    if value is None:
        if required:
            raise ConfigError(f"anchors.{key}: required key missing")
        return None
    try:
        return space.validate_point(value)
    except Exception as exc:
        raise ConfigError(f"anchors.{key}: {exc}") from exc


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")

    seed = _get(doc, "seed", int, "config", default=0)
    space = _build_space(doc)
    operator = _build_operator(doc, space)
    schedule, moduli = _build_schedule(doc, path.parent)

    u = x0 = None
    y0_spec = "link"
    anchors = doc.get("anchors")
    if anchors is not None:
        u = _build_anchor(anchors, "u", space, required=True)
        x0 = _build_anchor(anchors, "x0", space, required=True)
        raw_y0 = anchors.get("y0", "link")
        y0_spec = "link" if raw_y0 == "link" else space.validate_point(raw_y0)

    run_section = doc.get("run", {})
    n_steps = _get(run_section, "n_steps", int, "run", default=1000)
    if n_steps < 0:
        raise ConfigError("run.n_steps: must be >= 0")

    ax = doc.get("axioms", {})
    expect = _get(ax, "expect", dict, "axioms", default={})
    for key, val in expect.items():
        if key not in ("W1", "W2", "W3", "W4", "W5", "W6", "W7", "CAT0"):
            raise ConfigError(f"axioms.expect.{key}: unknown axiom")
        if not isinstance(val, bool):
            raise ConfigError(f"axioms.expect.{key}: expected a boolean")
    axioms = AxiomsSection(
        trials=_get(ax, "trials", int, "axioms", default=10_000),
        tol=_get(ax, "tol", NUMBER, "axioms", default=1e-9),
        expect=expect,
    )
    if axioms.trials < 1:
        raise ConfigError("axioms.trials: must be >= 1")

    ct = doc.get("certify", {})
    certify = CertifySection(
        k_max=_get(ct, "k_max", int, "certify", default=20),
        k_max_divergence=_get(ct, "k_max_divergence", int, "certify", default=5),
        horizon=_get(ct, "horizon", int, "certify", default=200_000),
        inject_corruption=_get(ct, "inject_corruption", bool, "certify", default=False),
    )
    if certify.horizon > 2_000_000:
        raise ConfigError("certify.horizon: exceeds the 2e6 trajectory cap")

    mt = doc.get("meta", {})
    meta = MetaSection(
        mode=_get(mt, "mode", str, "meta", default="transform"),
        k_max=_get(mt, "k_max", int, "meta", default=5),
        g_presets=_get(mt, "g_presets", list, "meta", default=["const:1", "const:10", "n", "2n"]),
        cap=_get(mt, "cap", int, "meta", default=4_000),
        n_steps=_get(mt, "n_steps", int, "meta", default=15_000),
        source=_get(mt, "source", str, "meta", default="companion"),
    )
    if meta.mode not in ("transform", "empirical"):
        raise ConfigError("meta.mode: expected 'transform' or 'empirical'")
    if meta.source not in ("companion", "main"):
        raise ConfigError("meta.source: expected 'companion' or 'main'")

    return ExperimentConfig(
        seed=seed,
        space=space,
        operator=operator,
        schedule=schedule,
        moduli=moduli,
        u=u,
        x0=x0,
        y0_spec=y0_spec,
        n_steps=n_steps,
        axioms=axioms,
        certify=certify,
        meta=meta,
    )
