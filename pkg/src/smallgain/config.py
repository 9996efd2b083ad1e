"""Scenario configuration documents: parsing, validation, resolution.

Configs are JSON documents.  Validation collects every violated
invariant instead of stopping at the first; resolution turns the
document into concrete model objects, resolving the "auto" placeholders
(step size, horizons, sampled-controller constants, disturbance
periods) from the scenario parameters.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional

from .gains import MaxPreservingMap, gain_from_spec
from .models.chemostat import ChemostatParams, DelayFunctional, validate_params
from .models.ex32 import PlanarSampledParams, ScalarFn, select_constants
from .models.growth import GrowthModel, YieldModel
from .sim.signals import DisturbanceSignal, GENERATORS

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "parse_config",
    "load_config",
    "build_plan",
    "set_by_path",
    "map_from_spec",
]

SCENARIOS = (
    "chemostat",
    "chemostat_transformed",
    "ex31_comparison",
    "ex31_concrete",
    "ex32_sampled",
)

CHECK_NAMES = (
    "convergence",
    "positivity",
    "monotone_transformed_y",
    "transient_entry",
    "small_gain_estimate",
    "ios_envelope",
)


class ConfigError(ValueError):
    """Invalid configuration; carries the full list of violations."""

    def __init__(self, errors: List[str]):
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(errors))
        self.errors = list(errors)


@dataclass
class ScenarioConfig:
    doc: dict
    path: Optional[str] = None

    @property
    def scenario(self) -> str:
        return self.doc["scenario"]

    @property
    def seed(self) -> int:
        return int(self.doc["seed"])

    def to_json(self) -> str:
        return json.dumps(self.doc, indent=2, sort_keys=True)


def _growth_from_spec(spec: dict) -> GrowthModel:
    kind = spec.get("kind")
    if kind == "monod":
        return GrowthModel.monod(float(spec["mu_max"]), float(spec["k_s"]))
    if kind == "haldane":
        return GrowthModel.haldane(
            float(spec["mu_max"]), float(spec["k_s"]), float(spec["k_i"])
        )
    if kind == "table":
        return GrowthModel.table(spec["knots"])
    raise ValueError(f"unknown growth kind {kind!r}")


def _yield_from_spec(spec: dict) -> YieldModel:
    kind = spec.get("kind")
    if kind == "constant":
        return YieldModel.constant(float(spec["value"]))
    if kind == "table":
        return YieldModel.table(spec["knots"])
    raise ValueError(f"unknown yield kind {kind!r}")


def _functional_from_spec(spec: dict, r: float) -> DelayFunctional:
    kind = spec.get("kind")
    if kind == "point_delay":
        tau = spec.get("tau", "r")
        tau = r if tau == "r" else float(tau)
        return DelayFunctional("point_delay", tau=tau)
    if kind in ("window_min", "window_max"):
        return DelayFunctional(kind)
    if kind == "convex_mix":
        return DelayFunctional(
            "convex_mix",
            lam=float(spec.get("lam", 1.0)),
            weights=tuple(float(w) for w in spec.get("weights", ())),
            delays=tuple(
                r if d == "r" else float(d) for d in spec.get("delays", ())
            ),
            kernel=tuple(
                (float(a), float(b)) for a, b in spec.get("kernel", ())
            ),
        )
    raise ValueError(f"unknown delay functional kind {kind!r}")


def _signal_from_spec(spec: dict, seed: int, generator: str, r: float) -> DisturbanceSignal:
    kind = spec.get("kind")
    if kind == "constant":
        return DisturbanceSignal("constant", value=float(spec["value"]))
    if kind == "bang_bang":
        period = spec.get("period", "auto")
        period = 2.0 * r + 1.0 if period == "auto" else float(period)
        return DisturbanceSignal(
            "bang_bang",
            period=period,
            low=float(spec.get("low", 0.0)),
            high=float(spec.get("high", 1.0)),
        )
    if kind == "piecewise_random":
        return DisturbanceSignal(
            "piecewise_random",
            dwell=float(spec.get("dwell", 1.0)),
            low=float(spec.get("low", 0.0)),
            high=float(spec.get("high", 1.0)),
            seed=int(spec.get("seed", seed)),
            generator=generator,
        )
    raise ValueError(f"unknown disturbance kind {kind!r}")


def _history_fn(spec: dict, r: float) -> Callable[[float], float]:
    """History profile on [-r, 0]: constant, affine or sinusoid."""
    kind = spec.get("kind", "constant")
    if kind == "constant":
        v = float(spec["value"])
        return lambda th: v
    if kind == "affine":
        v0 = float(spec["start"])  # value at theta = -r
        v1 = float(spec["end"])  # value at theta = 0
        if r == 0.0:
            return lambda th: v1
        return lambda th: v0 + (v1 - v0) * (th + r) / r
    if kind == "sinusoid":
        center = float(spec["center"])
        amp = float(spec["amplitude"])
        period = float(spec.get("period", max(r, 1.0)))
        return lambda th: center + amp * math.sin(2.0 * math.pi * th / period)
    raise ValueError(f"unknown history kind {kind!r}")


def map_from_spec(spec: dict) -> MaxPreservingMap:
    entries = spec.get("entries")
    if not entries:
        raise ValueError("gain map needs a nonempty entries grid")
    rows = [[gain_from_spec(e) for e in row] for row in entries]
    return MaxPreservingMap.from_rows(rows)


def parse_config(doc: dict, path: Optional[str] = None) -> ScenarioConfig:
    """Normalize and validate a scenario document, collecting all errors."""
    errors: List[str] = []
    doc = copy.deepcopy(doc)

    scenario = doc.get("scenario")
    if scenario not in SCENARIOS:
        errors.append(f"scenario {scenario!r} unknown; choose from {SCENARIOS}")
        raise ConfigError(errors)

    doc.setdefault("seed", 0)
    doc.setdefault("generator", "philox")
    if doc["generator"] not in GENERATORS:
        errors.append(f"generator {doc['generator']!r} unknown; choose from {GENERATORS}")
    doc.setdefault("integrator", {})
    doc["integrator"].setdefault("h", "auto")
    doc.setdefault("checks", [])

    if scenario in ("chemostat", "chemostat_transformed"):
        doc["integrator"].setdefault("t_end", 150.0)
        doc.setdefault("feedback", True)
        doc.setdefault(
            "delay_functional", {"kind": "point_delay", "tau": "r"}
        )
        doc.setdefault("disturbance", {"kind": "constant", "value": 0.0})
        pspec = doc.get("params")
        if not isinstance(pspec, dict):
            errors.append("chemostat scenarios need a params mapping")
        else:
            try:
                params = _chemostat_params(pspec)
                errors.extend(validate_params(params))
            except (ValueError, KeyError) as exc:
                errors.append(f"params: {exc}")
        dspec = doc["disturbance"]
        try:
            lo, hi = _signal_from_spec(dspec, 0, doc["generator"], 1.0).bounds()
            if lo < 0.0 or hi > 1.0:
                errors.append(
                    f"uncertainty d range [{lo}, {hi}] must stay inside [0, 1]"
                )
        except ValueError as exc:
            errors.append(f"disturbance: {exc}")
        init = doc.get("initial", {})
        key = "X" if scenario == "chemostat" else "x"
        hist_key = "S_history" if scenario == "chemostat" else "y_history"
        if key not in init:
            errors.append(f"initial condition needs {key!r}")
        if hist_key not in init:
            errors.append(f"initial condition needs a {hist_key!r} profile")
    elif scenario == "ex31_comparison":
        doc["integrator"].setdefault("t_end", 200.0)
        init = doc.get("initial", {})
        if "v" not in init or "w" not in init:
            errors.append("initial condition needs 'v' and 'w'")
        elif float(init["v"]) < 0.0 or float(init["w"]) < 0.0:
            errors.append("comparison state must start in the nonnegative quadrant")
    elif scenario == "ex31_concrete":
        doc["integrator"].setdefault("t_end", 100.0)
        doc.setdefault("disturbance", {"kind": "constant", "value": 0.0})
        init = doc.get("initial", {})
        if "x" not in init or "y" not in init:
            errors.append("initial condition needs 'x' and 'y'")
        try:
            lo, hi = _signal_from_spec(
                doc["disturbance"], 0, doc["generator"], 1.0
            ).bounds()
            if lo < -1.0 or hi > 1.0:
                errors.append(f"disturbance range [{lo}, {hi}] must stay in [-1, 1]")
        except ValueError as exc:
            errors.append(f"disturbance: {exc}")
    elif scenario == "ex32_sampled":
        doc["integrator"].setdefault("t_end", 20.0)
        doc.setdefault("disturbance", {"kind": "constant", "value": 0.0})
        doc.setdefault("params", {})
        p = doc["params"]
        p.setdefault("f", {"kind": "square", "coef": 1.0})
        p.setdefault("g", {"kind": "linear", "coef": 1.0})
        p.setdefault("eps", 0.5)
        p.setdefault("M", "auto")
        p.setdefault("r", "auto")
        if not float(p["eps"]) < 1.0 / math.sqrt(2.0):
            errors.append(
                f"target gain eps={p['eps']} must be below 1/sqrt(2); the x/y "
                "gain cycle contracts only below that threshold"
            )
        try:
            lo, hi = _signal_from_spec(
                doc["disturbance"], 0, doc["generator"], 1.0
            ).bounds()
            if lo < 0.0:
                errors.append("schedule perturbation w must be nonnegative")
        except ValueError as exc:
            errors.append(f"disturbance: {exc}")
        init = doc.get("initial", {})
        if "x" not in init or "y" not in init:
            errors.append("initial condition needs 'x' and 'y'")

    for chk in doc["checks"]:
        cname = chk.get("name")
        if cname not in CHECK_NAMES:
            errors.append(f"unknown check {cname!r}; choose from {CHECK_NAMES}")
        chk.setdefault("expect", "pass")
        if chk["expect"] not in ("pass", "fail"):
            errors.append(f"check {cname!r}: expect must be 'pass' or 'fail'")

    if errors:
        raise ConfigError(errors)
    return ScenarioConfig(doc=doc, path=path)


def _chemostat_params(pspec: dict) -> ChemostatParams:
    return ChemostatParams(
        S_i=float(pspec["S_i"]),
        b=float(pspec["b"]),
        r=float(pspec["r"]),
        mu=_growth_from_spec(pspec["mu"]),
        K=_yield_from_spec(pspec["K"]),
        S_s=float(pspec["S_s"]),
        a=float(pspec["a"]),
        S_star=float(pspec["S_star"]),
    )


def load_config(path) -> ScenarioConfig:
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config is not valid JSON: {exc}"]) from None
    return parse_config(doc, path=str(p))


@dataclass
class RunPlan:
    """Everything a single run needs, with placeholders resolved."""

    scenario: str
    seed: int
    h: float
    t_end: float
    checks: list
    chem_params: Optional[ChemostatParams] = None
    functional: Optional[DelayFunctional] = None
    disturbance: Optional[DisturbanceSignal] = None
    feedback: bool = True
    d_const: float = 0.0
    initial: dict = field(default_factory=dict)
    history: Optional[Callable[[float], float]] = None
    ex32_params: Optional[PlanarSampledParams] = None
    ex32_bounds: tuple = ()


def build_plan(cfg: ScenarioConfig) -> RunPlan:
    doc = cfg.doc
    scenario = cfg.scenario
    seed = cfg.seed
    generator = doc["generator"]
    integ = doc["integrator"]
    t_end = float(integ["t_end"])

    if scenario in ("chemostat", "chemostat_transformed"):
        params = _chemostat_params(doc["params"])
        h = integ["h"]
        if h == "auto":
            h = params.r / 50.0 if params.r > 0.0 else 1e-2
        h = float(h)
        functional = _functional_from_spec(doc["delay_functional"], params.r)
        dist = _signal_from_spec(doc["disturbance"], seed, generator, params.r)
        init = doc["initial"]
        if scenario == "chemostat":
            hist = _history_fn(init["S_history"], params.r)
            x0 = float(init["X"])
        else:
            hist = _history_fn(init["y_history"], params.r)
            x0 = float(init["x"])
        return RunPlan(
            scenario=scenario,
            seed=seed,
            h=h,
            t_end=t_end,
            checks=doc["checks"],
            chem_params=params,
            functional=functional,
            disturbance=dist,
            feedback=bool(doc.get("feedback", True)),
            d_const=float(doc.get("D_const", 0.0)),
            initial={"x0": x0},
            history=hist,
        )

    if scenario == "ex31_comparison":
        h = 1e-2 if integ["h"] == "auto" else float(integ["h"])
        init = doc["initial"]
        return RunPlan(
            scenario=scenario,
            seed=seed,
            h=h,
            t_end=t_end,
            checks=doc["checks"],
            initial={"v": float(init["v"]), "w": float(init["w"])},
        )

    if scenario == "ex31_concrete":
        h = 1e-2 if integ["h"] == "auto" else float(integ["h"])
        init = doc["initial"]
        dist = _signal_from_spec(doc["disturbance"], seed, generator, 1.0)
        return RunPlan(
            scenario=scenario,
            seed=seed,
            h=h,
            t_end=t_end,
            checks=doc["checks"],
            disturbance=dist,
            initial={"x": float(init["x"]), "y": float(init["y"])},
        )

    # ex32_sampled
    pspec = doc["params"]
    f = ScalarFn(pspec["f"]["kind"], float(pspec["f"].get("coef", 1.0)))
    g = ScalarFn(pspec["g"]["kind"], float(pspec["g"].get("coef", 1.0)))
    eps = float(pspec["eps"])
    p_bound, q_bound, m_auto, r_auto = select_constants(f, g, eps)
    m_gain = m_auto if pspec["M"] == "auto" else float(pspec["M"])
    r_nom = r_auto if pspec["r"] == "auto" else float(pspec["r"])
    params = PlanarSampledParams(f=f, g=g, M=m_gain, r=r_nom, eps=eps)
    h = params.r / 10.0 if integ["h"] == "auto" else float(integ["h"])
    dist = _signal_from_spec(doc["disturbance"], seed, generator, params.r)
    init = doc["initial"]
    return RunPlan(
        scenario=scenario,
        seed=seed,
        h=h,
        t_end=t_end,
        checks=doc["checks"],
        disturbance=dist,
        ex32_params=params,
        ex32_bounds=(p_bound, q_bound),
        initial={"x": float(init["x"]), "y": float(init["y"])},
    )


def set_by_path(doc: dict, dotted: str, value) -> None:
    """Assign into a nested mapping by dotted path, e.g. 'params.r'."""
    parts = dotted.split(".")
    node = doc
    for key in parts[:-1]:
        if not isinstance(node, dict) or key not in node:
            raise KeyError(f"path {dotted!r} not present in the config")
        node = node[key]
    if not isinstance(node, dict) or parts[-1] not in node:
        raise KeyError(f"path {dotted!r} not present in the config")
    node[parts[-1]] = value
