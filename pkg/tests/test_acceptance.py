"""Acceptance suite: one test per criterion, each printing a PASS/FAIL
line (run with -s to see them).  Tolerances are pinned here, not
deferred anywhere."""

import itertools
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from smallgain.cli import main as cli_main
from smallgain.config import load_config
from smallgain.gains import (
    LinearGain,
    MaxPreservingMap,
    SaturatingRationalGain,
    ZeroGain,
    apply_map,
    check_cyclic_small_gain,
    check_facts,
    gain_to_spec,
    iterate_gamma,
    q_operator,
    vec_max,
)
from smallgain.models.chemostat import (
    DelayFunctional,
    default_params,
    derived_constants,
    equilibrium,
)
from smallgain.models.ex31 import certification_margins, comparison_w_gain
from smallgain.models.ex32 import ScalarFn, default_instance, select_constants
from smallgain.scenarios import run_config
from smallgain.sim.integrators import integrate_dde, integrate_ode
from smallgain.sim.runner import run_chemostat, run_ex31_comparison, run_ex32
from smallgain.sim.signals import DisturbanceSignal
from smallgain.verify import (
    KLFunction,
    TrajectoryCheckSpec,
    check_ios_envelope,
    check_monotone_abs,
    check_small_gain_estimate,
    convergence_report,
    gamma21_gain_table,
)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
CANONICAL = [
    "chemostat_point_delay",
    "chemostat_window_min",
    "chemostat_window_max",
    "ex31",
    "ex32",
]


def report(criterion: str, ok: bool, detail: str = ""):
    tag = "PASS" if ok else "FAIL"
    print(f"[{tag}] {criterion}" + (f" ({detail})" if detail else ""))
    assert ok, f"{criterion}: {detail}"


def random_contracting_map(rng, n):
    """Entries bounded by slope 0.85, so every cycle contracts."""
    rows = []
    for _ in range(n):
        row = []
        for _ in range(n):
            pick = rng.random()
            if pick < 0.35:
                row.append(ZeroGain())
            elif pick < 0.7:
                row.append(LinearGain(float(rng.uniform(0.0, 0.85))))
            else:
                beta = float(rng.uniform(0.5, 3.0))
                row.append(SaturatingRationalGain(0.85 * beta, beta,
                                                  float(rng.uniform(0.0, 2.0))))
        rows.append(tuple(row))
    return MaxPreservingMap(tuple(rows))


def test_criterion_1_gain_algebra_suite():
    """MAX-preservation plus the Q-operator facts on 1000 random samples
    for 5 small-gain-satisfying maps, under 5 seconds."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    maps = [random_contracting_map(rng, n) for n in (1, 2, 3, 4, 3)]
    for gmap in maps:
        assert check_cyclic_small_gain(gmap).satisfied
        n = gmap.n
        samples = [
            (rng.uniform(0.0, 10.0, n), rng.uniform(0.0, 10.0, n))
            for _ in range(1000)
        ]
        # MAX-preservation of the map itself
        for x, y in samples[:200]:
            lhs = apply_map(gmap, vec_max([x, y]))
            rhs = vec_max([apply_map(gmap, x), apply_map(gmap, y)])
            assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-14)
        facts = check_facts(gmap, samples)
        assert facts.passed, facts.failures
        # iterates decay to zero and never leave the Q envelope
        for x, _ in samples[:20]:
            seq, converged = iterate_gamma(gmap, x, 400, 1e-9)
            assert converged
            q = q_operator(gmap, x)
            assert np.all(seq <= q + 1e-12 * np.abs(q) + 1e-14)
    elapsed = time.perf_counter() - t0
    report("criterion 1: gain algebra suite", elapsed < 5.0,
           f"zero failures in {elapsed:.2f}s")


def test_criterion_2_linear_checker_oracle():
    """The checker agrees exactly with the brute-force product-of-slopes
    criterion on 100 random all-linear maps."""
    rng = np.random.default_rng(202)
    agreements = 0
    for _ in range(100):
        n = int(rng.integers(1, 5))
        slopes = rng.uniform(0.0, 1.3, size=(n, n))
        gmap = MaxPreservingMap(
            tuple(tuple(LinearGain(float(s)) for s in row) for row in slopes)
        )
        verdict = check_cyclic_small_gain(gmap).satisfied
        brute = True
        for r in range(1, n + 1):
            for cyc in itertools.permutations(range(n), r):
                prod = 1.0
                for k in range(r):
                    prod *= slopes[cyc[k], cyc[(k + 1) % r]]
                if prod >= 1.0:
                    brute = False
        assert verdict == brute
        agreements += 1
    report("criterion 2: cyclic checker oracle equivalence", agreements == 100,
           f"{agreements}/100 maps agree")


def chemostat_grid_cases():
    functionals = {
        "point_delay": lambda r: DelayFunctional(
            "point_delay", tau=r if r > 0 else 0.0
        ),
        "window_min": lambda r: DelayFunctional("window_min"),
        "window_max": lambda r: DelayFunctional("window_max"),
    }
    disturbances = {
        "d0": lambda r: DisturbanceSignal("constant", value=0.0),
        "d1": lambda r: DisturbanceSignal("constant", value=1.0),
        "bang": lambda r: DisturbanceSignal(
            "bang_bang", period=2.0 * r + 1.0, low=0.0, high=1.0
        ),
    }

    def histories(x_s, s_s, s_i, r):
        period = max(r, 1.0)
        return {
            "low_biomass": (0.1 * x_s, lambda th: 0.9 * s_i),
            "high_biomass": (10.0 * x_s, lambda th: 0.05 * s_i),
            "affine": (x_s, lambda th: 1.0 + (9.0 - 1.0) * (th + r) / r
                       if r > 0 else 9.0),
            "sinusoid": (2.0 * x_s,
                         lambda th: s_s + 1.2 * math.sin(2.0 * math.pi * th / period)),
        }

    return functionals, disturbances, histories


def test_criterion_3_chemostat_stabilization_grid():
    """108-run grid over delay, functional, uncertainty and starts: the
    feedback settles every run, positivity never breaks, the transformed
    substrate deviation never grows."""
    # warm the kernels so the timing covers the grid itself
    p_warm = default_params(r=1.0)
    run_chemostat(p_warm, DelayFunctional("window_min"),
                  DisturbanceSignal("constant", value=0.0), 15.0,
                  lambda th: 2.0, 0.02, 1.0)

    functionals, disturbances, histories = chemostat_grid_cases()
    horizons = {0.0: (1e-2, 100.0), 1.0: (0.02, 100.0), 5.0: (0.1, 150.0)}
    t0 = time.perf_counter()
    n_runs = 0
    for r, (h, t_end) in horizons.items():
        params = default_params(r=r)
        d_s, x_s = equilibrium(params)
        assert d_s == pytest.approx(0.75, rel=1e-12)
        assert x_s == pytest.approx(15.0, rel=1e-12)
        target = np.array([x_s, params.S_s])
        hists = histories(x_s, params.S_s, params.S_i, r)
        for f_name, f_make in functionals.items():
            for d_name, d_make in disturbances.items():
                for h_name, (x0, s_hist) in hists.items():
                    traj = run_chemostat(
                        params, f_make(r), d_make(r), x0, s_hist, h, t_end
                    )
                    label = f"r={r} {f_name} {d_name} {h_name}"
                    conv = convergence_report(traj.times, traj.states, target,
                                              1e-3, 0.2)
                    assert conv.passed, f"{label}: no settling ({conv.details})"
                    x_arr = traj.column("X")
                    s_arr = traj.column("S")
                    assert np.all(x_arr > 0.0), label
                    assert np.all((s_arr > 0.0) & (s_arr < params.S_i)), label
                    m = traj.aux["m"]
                    y_full = traj.aux["y_full"]
                    mono = check_monotone_abs(
                        traj.times, y_full[m:], tol=1e-8,
                        init_sup=float(np.max(np.abs(y_full[: m + 1]))),
                    )
                    assert mono.passed, f"{label}: |y| grew ({mono.worst_residual})"
                    n_runs += 1
    elapsed = time.perf_counter() - t0
    report("criterion 3: chemostat stabilization grid",
           n_runs == 108 and elapsed < 60.0,
           f"{n_runs} runs in {elapsed:.1f}s")


def test_criterion_4_transient_and_small_gain(tmp_path):
    """Worst default run: finite entry time for the delayed region
    bound, small-gain estimate within 1e-6, and the gain pair passes
    the checker at eps = 0.1."""
    cfg = load_config(CONFIG_DIR / "chemostat_point_delay.json")
    traj, rows, _ = run_config(cfg)
    by_name = {r["name"]: r for r in rows}

    params = default_params(r=5.0)
    der = derived_constants(params)
    assert der["c"] == pytest.approx(math.log((10.0 - 0.1) / (0.1 * 4.0)), rel=1e-12)

    entry = by_name["transient_entry"]
    assert entry["ok"] and math.isfinite(entry["details"]["xi"])
    sg = by_name["small_gain_estimate"]
    assert sg["ok"] and sg["worst_residual"] <= 1e-6

    gamma21 = gamma21_gain_table(params, sigma_rate=0.1, eps=0.1, s_max=10.0)
    doc = {
        "gains_check": {
            "map": {"entries": [
                [None, {"kind": "linear", "slope": 0.001}],
                [gain_to_spec(gamma21), None],
            ]},
            "grid": {"min": 1e-6, "max": 10.0, "points": 60},
            "iterate": {"starts": [[1.0, 1.0]], "k_max": 500, "tol": 1e-9},
        }
    }
    path = tmp_path / "pair.json"
    path.write_text(json.dumps(doc))
    res = CliRunner().invoke(cli_main, ["gains-check", "--config", str(path)])
    report("criterion 4: transient entry and small-gain estimate",
           res.exit_code == 0,
           f"xi={entry['details']['xi']:.3g}, residual={sg['worst_residual']:.1e}, "
           f"gains-check exit {res.exit_code}")


def test_criterion_5_comparison_system():
    """Comparison pair converges from a 5x5 grid of starts, the concrete
    instance certifies on the inequality grids, and the transient-plus-
    gain envelope holds for the v-component."""
    worst = 0.0
    for v0 in np.linspace(0.0, 10.0, 5):
        for w0 in np.linspace(0.0, 10.0, 5):
            traj = run_ex31_comparison(float(v0), float(w0), 0.01, 200.0)
            worst = max(worst, float(np.linalg.norm(traj.final_state)))
    assert worst < 1e-6

    worst_v, worst_w = certification_margins(n=200, box=10.0)
    assert worst_v <= 0.0 and worst_w <= 0.0

    traj = run_ex31_comparison(10.0, 10.0, 0.01, 200.0)
    env = check_ios_envelope(
        traj.times, traj.column("v"),
        x0_norm=10.0,
        sigma=KLFunction.exponential(scale=1.0, rate=0.1),
        beta=1.0,
        gamma=comparison_w_gain(0.5),
        input_series=traj.column("w"),
        combine="max",
        tol=1e-6,
    )
    report("criterion 5: comparison-system example",
           worst < 1e-6 and env.passed,
           f"worst final norm {worst:.2e}, certification {worst_v:.1e}/{worst_w:.1e}")


def test_criterion_6_sampled_data_example():
    """Derived constants re-verify, the loop settles under three
    schedule perturbations, the zero-gain envelope holds, and the
    linear gain cycle contracts."""
    p_bound, q_bound, m_gain, r_nom = select_constants(
        ScalarFn("square"), ScalarFn("linear"), 0.5
    )
    assert (m_gain, r_nom) == (60.0, 0.005)
    assert m_gain >= 2.0 + 2.0 * q_bound + 9.0 * p_bound**2 / (2.0 * 0.25)
    assert 3.0 * (m_gain + q_bound) * r_nom * math.exp(q_bound * r_nom) <= 1.0

    params = default_instance(0.5)
    signals = {
        "zero": DisturbanceSignal("constant", value=0.0),
        "log2": DisturbanceSignal("constant", value=math.log(2.0)),
        "random": DisturbanceSignal("piecewise_random", dwell=0.25, low=0.0,
                                    high=math.log(2.0), seed=7),
    }
    finals = {}
    envelopes = {}
    for name, w in signals.items():
        traj = run_ex32(params, w, 1.0, 1.0, None, 20.0)
        finals[name] = float(np.sum(np.abs(traj.final_state)))
        env = check_ios_envelope(
            traj.times, np.linalg.norm(traj.states, axis=1),
            x0_norm=float(np.linalg.norm([1.0, 1.0])),
            sigma=KLFunction.exponential(scale=1.0, rate=0.1),
            beta=1.0, gamma=None, input_series=None, combine="sum", tol=1e-6,
        )
        envelopes[name] = env.passed
    assert all(v < 1e-6 for v in finals.values()), finals
    assert all(envelopes.values()), envelopes

    cycle = MaxPreservingMap.from_rows(
        [[ZeroGain(), LinearGain(math.sqrt(2.0))],
         [LinearGain(0.5), ZeroGain()]]
    )
    rep = check_cyclic_small_gain(cycle)
    report("criterion 6: sampled-data example",
           rep.satisfied,
           f"finals {max(finals.values()):.1e}, cycle margin {rep.margin:.3f}")


def test_criterion_7_negative_controls():
    """The open loop must fail convergence; synthetic violating series
    must fail their checks.  No false passes."""
    params = default_params(r=5.0)
    d_s, x_s = equilibrium(params)
    traj = run_chemostat(
        params, DelayFunctional("point_delay", tau=5.0),
        DisturbanceSignal("constant", value=0.0),
        1.2 * x_s, lambda th: params.S_s, 0.1, 150.0,
        feedback=False, d_const=d_s,
    )
    conv = convergence_report(traj.times, traj.states,
                              np.array([x_s, params.S_s]), 1e-3, 0.2)
    assert not conv.passed, "open loop must not settle"

    times = np.linspace(0.0, 10.0, 101)
    rising = check_monotone_abs(times, 1.0 + 0.1 * times, tol=1e-8)
    assert not rising.passed

    v = np.column_stack([np.exp(0.07 * times), np.exp(0.07 * times)])
    spec = TrajectoryCheckSpec(
        V=v, L=np.sum(v, axis=1), gamma_map=MaxPreservingMap.zero(2),
        sigma=KLFunction.exponential(), sigma_fit=True,
    )
    doubling = check_small_gain_estimate(times, spec, 0.0)
    assert not doubling.passed
    report("criterion 7: negative controls", True,
           "open loop, rising series and growing estimate all flagged")


def test_criterion_8_numerics():
    """Fourth-order convergence on the linear test problem and the
    piecewise-polynomial delayed solution to 1e-8."""

    def err(h):
        traj = integrate_ode(lambda t, x: -x, [1.0], (0.0, 1.0), h)
        return abs(traj.states[-1, 0] - math.exp(-1.0))

    ratio = err(0.05) / err(0.025)
    assert 15.0 <= ratio <= 17.0

    def rhs(t, x, hist):
        return -hist.value_at(t - 1.0)

    traj = integrate_dde(rhs, 1.0, np.array([1.0]), (0.0, 1.0), 0.01)
    dde_err = float(np.max(np.abs(traj.states[:, 0] - (1.0 - traj.times))))
    report("criterion 8: integrator order and delayed closed form",
           dde_err <= 1e-8, f"order ratio {ratio:.2f}, delay error {dde_err:.1e}")


def test_criterion_9_determinism(tmp_path):
    """Repeated runs of every canonical config produce byte-identical
    trajectory and report files."""
    runner = CliRunner()
    for name in CANONICAL:
        out = tmp_path / name
        first = {}
        for attempt in range(2):
            res = runner.invoke(cli_main, [
                "run", "--config", str(CONFIG_DIR / f"{name}.json"),
                "--out", str(out),
            ])
            assert res.exit_code == 0, f"{name}: {res.output}"
            blobs = {
                "csv": (out / "trajectory.csv").read_bytes(),
                "report": (out / "report.json").read_bytes(),
            }
            if attempt == 0:
                first = blobs
            else:
                assert blobs == first, f"{name}: outputs differ between runs"
    report("criterion 9: determinism", True,
           f"{len(CANONICAL)} configs byte-identical")
