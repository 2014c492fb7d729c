"""Scenario catalogue: parameter schemas and the experiment behind each name."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .. import multichannel as mc
from .. import standard_parts as sp
from ..corridor import CorridorScene, VehicleState
from ..steering import (
    ReceptorArray,
    SampledSchedule,
    closed_form_eigenvalues,
    contraction_sup,
    convergence_time,
    critical_gain,
    iterate_map_g_prime,
    simulate_noisy_array,
    simulate_sampled,
    simulate_two_pixel,
)
from .config import Param


@dataclass
class ScenarioResult:
    """What a scenario hands to the writers.

    ``columns``/``rows`` become trajectory.csv; ``plot(fig)`` draws plot.svg.
    """

    summary: dict
    columns: list
    rows: np.ndarray
    plot: Callable


@dataclass
class Scenario:
    name: str
    doc: str
    schema: dict
    runner: Callable
    checks: Callable | None = None

    def cross_check(self, params: dict) -> list[str]:
        return [] if self.checks is None else self.checks(params)

    def run(self, params: dict, seed: int) -> ScenarioResult:
        return self.runner(params, seed)


def _cplx(z) -> list:
    return [float(np.real(z)), float(np.imag(z))]


# corridor family -------------------------------------------------------------

def _corridor_schema(**defaults):
    schema = {
        "f": Param("float", "focal length", 1.0, low=0.0, low_open=True),
        "R": Param("float", "corridor half-width", 2.0, low=0.0, low_open=True),
        "v": Param("float", "forward speed", 1.0, low=0.0, low_open=True),
        "k": Param("float", "steering gain", 0.2, low=0.0, low_open=True),
        "x0": Param("float", "initial lateral position", 1.0),
        "y0": Param("float", "initial position along the corridor", 0.0),
        "theta0_deg": Param("float", "initial heading in degrees (90 = along the corridor)", 100.0),
        "t_end": Param("float", "simulated time in seconds", 60.0, low=0.0, low_open=True),
        "dt": Param("float", "integration step in seconds", 1e-3, low=0.0, low_open=True),
    }
    for key, value in defaults.items():
        schema[key] = Param(schema[key].kind, schema[key].doc, value, low=schema[key].low,
                            low_open=schema[key].low_open)
    return schema


def _corridor_checks(p: dict) -> list[str]:
    out = []
    if abs(p["x0"]) >= p["R"]:
        out.append(f"parameters.x0: {p['x0']} is outside the corridor (-R, R) with R={p['R']}")
    th = math.radians(p["theta0_deg"])
    if math.sin(th) - p["f"] * abs(math.cos(th)) <= 0:
        lo = math.degrees(math.atan(p["f"]))
        out.append(f"parameters.theta0_deg: {p['theta0_deg']} is outside the critical cone "
                   f"({lo:.4f}, {180 - lo:.4f})")
    if p["dt"] > p["t_end"]:
        out.append("parameters.dt: larger than t_end")
    if "h" in p and p["dt"] > p["h"]:
        out.append(f"parameters.dt: {p['dt']} exceeds the sampling interval h={p['h']}")
    return out


def _scene_and_start(p):
    scene = CorridorScene(R=p["R"], f=p["f"], v=p["v"])
    return scene, VehicleState(p["x0"], p["y0"], math.radians(p["theta0_deg"]))


def _corridor_plot(traj, title):
    def draw(fig):
        ax1, ax2 = fig.subplots(2, 1, sharex=True)
        ax1.plot(traj.times, traj.states[:, 0], lw=1.0)
        ax1.set_ylabel("x")
        ax1.set_title(title)
        ax2.plot(traj.times, traj.states[:, 2] - math.pi / 2, lw=1.0, color="C1")
        ax2.set_ylabel("theta - pi/2 (rad)")
        ax2.set_xlabel("t (s)")
    return draw


def _corridor_summary(traj, scene, k) -> dict:
    final = traj.final
    lam = closed_form_eigenvalues(scene, k)
    return {
        "status": traj.meta["status"],
        "t_stop": traj.t_final,
        "final_state": [float(v) for v in final],
        "final_abs_x": float(abs(final[0])),
        "final_heading_error": float(abs(final[2] - math.pi / 2)),
        "convergence_time": convergence_time(traj),
        "linearized_eigenvalues": [_cplx(z) for z in lam],
        "k_crit": critical_gain(scene),
        "backend": traj.meta["backend"],
    }


def _corridor_rows(traj):
    return ["t", "x", "y", "theta", "u"], np.column_stack([traj.times, traj.states, traj.controls])


def run_corridor(p, seed):
    scene, s0 = _scene_and_start(p)
    traj = simulate_two_pixel(s0, scene, p["k"], p["t_end"], p["dt"])
    cols, rows = _corridor_rows(traj)
    return ScenarioResult(_corridor_summary(traj, scene, p["k"]), cols, rows,
                          _corridor_plot(traj, "two-pixel tau balance"))


def run_corridor_sampled(p, seed):
    scene, s0 = _scene_and_start(p)
    traj = simulate_sampled(s0, scene, p["k"], SampledSchedule(p["h"]), p["t_end"], p["dt"])
    summary = _corridor_summary(traj, scene, p["k"])
    h = traj.meta["h"]
    summary.update(h=h, hk=h * p["k"],
                   g_prime_centered=iterate_map_g_prime(0.0, 0.0, scene, p["k"], h),
                   contraction_sup=contraction_sup(scene, p["k"], h, p["phi_max"]))
    cols, rows = _corridor_rows(traj)
    return ScenarioResult(summary, cols, rows, _corridor_plot(traj, f"sample-and-hold, h={h:g}"))


def run_corridor_noisy(p, seed):
    scene, s0 = _scene_and_start(p)
    finals, first = [], None
    starved = []
    for i in range(p["n_runs"]):
        arr = ReceptorArray(p["n_per_side"], p["dropout_prob"], p["tau_noise_sigma"],
                            seed + i, p["jitter"])
        traj = simulate_noisy_array(s0, scene, p["k"], arr, p["t_end"], p["dt"])
        if first is None:
            first = traj
        starved.append(traj.meta["starved_fraction"])
        finals.append(abs(traj.final[0]) if traj.meta["status"] == "ok" else None)
    ok = [x for x in finals if x is not None]
    summary = _corridor_summary(first, scene, p["k"])
    summary.update(
        runs=p["n_runs"], seeds=[seed, seed + p["n_runs"] - 1],
        failed_runs=len(finals) - len(ok),
        terminal_abs_x=finals,
        median_terminal_abs_x=float(np.median(ok)) if ok else None,
        runs_within_0p1=sum(1 for x in ok if x < 0.1),
        mean_starved_fraction=float(np.mean(starved)),
    )
    cols, rows = _corridor_rows(first)
    return ScenarioResult(summary, cols, rows,
                          _corridor_plot(first, f"{p['n_per_side']} noisy receptors per side (seed {seed})"))


# linear systems --------------------------------------------------------------

_SYSTEM_PARAMS = {
    "channels": Param("int", "example double-integrator system with 1, 2 or 3 input channels "
                      "(ignored when A and B are given)", 3, choices=(1, 2, 3)),
    "A": Param("mat", "drift matrix; overrides the example system together with B", None),
    "B": Param("mat", "input matrix; overrides the example system together with A", None),
}


def _system(p) -> mc.LtiSystem:
    if p.get("A") is not None:
        return mc.LtiSystem(np.array(p["A"], float), np.array(p["B"], float))
    return mc.example_channel_systems()[p["channels"]]


def _system_checks(p) -> list[str]:
    A, B = p.get("A"), p.get("B")
    if (A is None) != (B is None):
        return ["parameters.A/B: give both A and B or neither"]
    if A is None:
        return []
    out = []
    if len(A) != len(A[0]):
        out.append("parameters.A: must be square")
    if len(B) != len(A):
        out.append(f"parameters.B: must have {len(A)} rows like A")
    return out


def _pattern_checks(p, m) -> list[str]:
    if p.get("pattern") is None:
        return []
    pat = mc.ProjectionPattern.parse(p["pattern"])
    if pat.m != m:
        return [f"parameters.pattern: {pat} has {pat.m} bits, the system has {m} inputs"]
    return []


def _min_energy_checks(p):
    out = _system_checks(p)
    if out:
        return out
    n = len(p["A"]) if p.get("A") is not None else 2
    m = len(p["B"][0]) if p.get("B") is not None else p["channels"]
    for key in ("x0", "x1"):
        if p.get(key) is not None and len(p[key]) != n:
            out.append(f"parameters.{key}: expected {n} entries")
    return out + _pattern_checks(p, m)


def run_min_energy(p, seed):
    sys = _system(p)
    x0 = np.zeros(sys.n) if p["x0"] is None else np.array(p["x0"], float)
    task = mc.SteeringTask(x0, np.array(p["x1"], float), p["T"])
    plan = mc.min_energy_plan(sys, task, p["pattern"])
    traj = mc.simulate_min_energy(sys, plan, task, p["dt"])
    summary = {
        "pattern": str(plan.pattern),
        "cost": plan.cost_eta,
        "realized_cost": traj.meta["realized_cost"],
        "endpoint_miss": traj.meta["endpoint_miss"],
        "final_state": [float(v) for v in traj.final],
        "gramian": plan.gramian.W.tolist(),
        "gramian_condition": plan.gramian.condition,
    }
    cols = ["t"] + [f"x{i + 1}" for i in range(sys.n)] + [f"u{j + 1}" for j in range(sys.m)]
    rows = np.column_stack([traj.times, traj.states, traj.controls])

    def draw(fig):
        ax = fig.subplots()
        ax.plot(traj.states[:, 0], traj.states[:, 1], lw=1.0)
        ax.plot([x0[0]], [x0[1]], "o", color="k")
        ax.plot([task.x1[0]], [task.x1[1]], "*", color="C3", ms=10)
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        ax.set_title(f"minimum-energy path, {plan.pattern}, cost {plan.cost_eta:.4g}")
        ax.set_aspect("equal", adjustable="datalim")
    return ScenarioResult(summary, cols, rows, draw)


def run_cost_sweep(p, seed):
    systems = mc.example_channel_systems()
    phis = np.linspace(0.0, 2 * math.pi, p["n_phi"], endpoint=False)
    chans = sorted(set(p["channels"]))
    costs = {c: mc.cost_sweep(systems[c], phis, p["T"]) for c in chans}
    summary = {"n_phi": p["n_phi"], "T": p["T"], "channels": chans,
               "max_cost": {str(c): float(costs[c].max()) for c in chans},
               "min_cost": {str(c): float(costs[c].min()) for c in chans}}
    ordering = True
    for a, b in zip(chans, chans[1:]):
        ordering &= bool(np.all(costs[a] >= costs[b] - 1e-12))
        summary[f"max_ratio_{a}_to_{b}"] = float((costs[a] / costs[b]).max())
    summary["monotone_channel_ordering"] = ordering
    cols = ["phi"] + [f"eta_{c}ch" for c in chans]
    rows = np.column_stack([phis] + [costs[c] for c in chans])

    def draw(fig):
        ax = fig.subplots()
        for c in chans:
            ax.semilogy(phis, costs[c], label=f"{c} channel{'s' if c > 1 else ''}")
        ax.set_xlabel("phi (rad)")
        ax.set_ylabel("optimal cost")
        ax.set_title(f"cost to reach (cos phi, sin phi) from the origin, T={p['T']:g}")
        ax.legend()
    return ScenarioResult(summary, cols, rows, draw)


def run_channel_classify(p, seed):
    sys = _system(p)
    cls = mc.enumerate_patterns(sys, p["T"])
    rows, labels, floors = [], [], []
    for pat, ok in cls.verdicts.items():
        ev = mc.gramian(sys, p["T"], pat).eigenvalues
        rel = float(ev[0] / ev[-1]) if ev[-1] > 0 else 0.0
        rows.append(list(pat.bits) + [float(ok), rel])
        labels.append(str(pat))
        floors.append(max(rel, 1e-18))
    nonempty_bad = [str(q) for q in cls.uncontrollable if q.k > 0]
    summary = {"verdicts": cls.as_dict(), "controllable_count": len(cls.controllable),
               "uncontrollable_count": len(cls.uncontrollable),
               "nonempty_uncontrollable": nonempty_bad, "T": p["T"]}
    cols = [f"b{j + 1}" for j in range(sys.m)] + ["controllable", "gramian_relative_min_eig"]

    def draw(fig):
        ax = fig.subplots()
        colors = ["C2" if r[-2] else "C3" for r in rows]
        ax.bar(range(len(labels)), floors, color=colors)
        ax.set_yscale("log")
        ax.axhline(mc.SINGULAR_RTOL, color="k", ls="--", lw=0.8)
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, rotation=45, ha="right")
        ax.set_ylabel("smallest / largest Gramian eigenvalue")
        ax.set_title("channel-pattern controllability")
        fig.tight_layout()
    return ScenarioResult(summary, cols, np.array(rows, dtype=float), draw)


# standard parts --------------------------------------------------------------

_PARTS_SCHEMA = {
    "poles": Param("vec", "closed-loop poles placed under every two-channel pattern", [-1.0, -1.0], length=2),
    "hat_A": Param("mat", "drift factorization used by the hat_A construction",
                   sp.EXAMPLE_HAT_A.tolist()),
    "t_end": Param("float", "simulated time in seconds", 30.0, low=0.0, low_open=True),
    "dt": Param("float", "integration step in seconds", 1e-3, low=0.0, low_open=True),
}

_TWO_CHANNEL = ("P[0,1,1]", "P[1,0,1]", "P[1,1,0]")


def _example_gains(p):
    sys = sp.example_three_channel_system()
    return sys, sp.simultaneous_gains_solve(sys, _TWO_CHANNEL, p["poles"])


def _parts_checks(p):
    out = []
    poles = p.get("poles") or []
    if any(z >= 0 for z in poles):
        out.append("parameters.poles: must be negative")
    hat = np.array(p["hat_A"], dtype=float)
    sys = sp.example_three_channel_system()
    if hat.shape != (3, 2):
        out.append("parameters.hat_A: must be 3x2")
    elif np.abs(sys.B @ hat - sys.A).max() > sp.OFFSET_TOL:
        out.append("parameters.hat_A: does not satisfy B hat_A = A")
    if p.get("pattern") is not None:
        out += _pattern_checks(p, 3)
    for key in ("goal", "x0"):
        if p.get(key) is not None and len(p[key]) != 2:
            out.append(f"parameters.{key}: expected 2 entries")
    return out


def run_dropout(p, seed):
    sys, K = _example_gains(p)
    ctrl = sp.StandardPartsController.build(sys, K, p["goal"], p["construction"], np.array(p["hat_A"]))
    res = sp.simulate_dropout(ctrl, sys, p["pattern"], p["x0"], p["t_end"], p["dt"])
    traj = res.trajectory
    summary = {
        "verdict": res.verdict,
        "pattern": traj.meta["pattern"],
        "construction": p["construction"],
        "goal": [float(v) for v in ctrl.goal],
        "offsets": [float(v) for v in ctrl.v.v],
        "gains": K.K.tolist(),
        "hurwitz": res.hurwitz,
        "rest_point": None if res.rest_point is None else [float(v) for v in res.rest_point],
        "terminal_distance": res.terminal_distance,
        "final_state": [float(v) for v in traj.final],
    }
    cols = ["t", "x1", "x2", "u1", "u2", "u3"]
    rows = np.column_stack([traj.times, traj.states, traj.controls])

    def draw(fig):
        ax = fig.subplots()
        ax.plot(traj.states[:, 0], traj.states[:, 1], lw=1.0)
        ax.plot(*ctrl.goal, "*", color="C2", ms=10, label="goal")
        if res.rest_point is not None:
            ax.plot(*res.rest_point, "x", color="C3", ms=8, label="rest point")
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        ax.set_title(f"{p['construction']} offsets under {traj.meta['pattern']}: {res.verdict}")
        ax.legend()
        ax.set_aspect("equal", adjustable="datalim")
    return ScenarioResult(summary, cols, rows, draw)


def run_markov(p, seed):
    sys, K = _example_gains(p)
    hat = np.array(p["hat_A"])
    ctrls = tuple(sp.StandardPartsController.build(sys, K, g, p["construction"], hat)
                  for g in ((1.0, 0.0), (0.0, 1.0)))
    q = p["switch_prob"]
    P = np.array([[1 - q, q], [q, 1 - q]])
    pattern = mc.ProjectionPattern.parse(p["pattern"])
    results = []
    for s in range(seed, seed + p["n_seeds"]):
        plan = sp.MarkovSwitchPlan(ctrls, P, p["dwell"], s, pattern=pattern)
        results.append(sp.markov_modulate(plan, sys, p["x0"], p["t_end"], p["dt"], p["target"]))
    mins = np.array([r.min_distance for r in results])
    best = int(np.argmin(mins))
    br = results[best]
    summary = {
        "seeds": [seed, seed + p["n_seeds"] - 1],
        "best_seed": seed + best,
        "best_min_distance": float(mins[best]),
        "best_t_min": br.t_min,
        "median_min_distance": float(np.median(mins)),
        "median_terminal_distance": float(np.median([r.terminal_distance for r in results])),
        "pattern": str(pattern),
        "construction": p["construction"],
        "gains": K.K.tolist(),
    }
    traj = br.trajectory
    cols = ["t", "x1", "x2", "controller"]
    rows = np.column_stack([traj.times, traj.states, traj.controls])

    def draw(fig):
        ax = fig.subplots()
        ax.plot(traj.states[:, 0], traj.states[:, 1], lw=0.6)
        ax.plot(*p["target"], "*", color="C3", ms=10, label="target")
        ax.plot([1, 0], [0, 1], "o", color="C2", label="controller goals")
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        ax.set_title(f"Markov switching, best of {p['n_seeds']} seeds: {mins[best]:.3g}")
        ax.legend()
        ax.set_aspect("equal", adjustable="datalim")
    return ScenarioResult(summary, cols, rows, draw)


def _build_catalogue() -> dict:
    sampled = _corridor_schema(R=1.0, x0=0.2, theta0_deg=95.0, t_end=120.0)
    sampled["h"] = Param("float", "sampling (hold) interval in seconds", 0.5, low=0.0, low_open=True)
    sampled["phi_max"] = Param("float", "heading-offset half-range for the contraction estimate",
                               0.3, low=0.0, low_open=True)
    noisy = _corridor_schema(dt=1e-2)
    noisy.update(
        n_per_side=Param("int", "receptors per side", 200, low=1),
        dropout_prob=Param("float", "per-step receptor dropout probability", 0.3, low=0.0, high=0.999),
        tau_noise_sigma=Param("float", "std of the per-receptor transit-time noise", 0.2, low=0.0),
        jitter=Param("float", "uniform jitter of receptor image positions", 0.2, low=0.0, high=0.999),
        n_runs=Param("int", "seeded runs (seeds seed, seed+1, ...)", 1, low=1, high=10000),
    )
    min_energy = dict(_SYSTEM_PARAMS)
    min_energy.update(
        x1=Param("vec", "target state", required=True),
        x0=Param("vec", "initial state (origin when omitted)", None),
        T=Param("float", "horizon in seconds", 1.0, low=0.0, low_open=True),
        pattern=Param("pattern", "available channels (all when omitted)", None),
        dt=Param("float", "integration step in seconds", 1e-3, low=0.0, low_open=True),
    )
    classify = dict(_SYSTEM_PARAMS)
    classify["T"] = Param("float", "Gramian horizon in seconds", 1.0, low=0.0, low_open=True)
    dropout = dict(_PARTS_SCHEMA)
    dropout.update(
        goal=Param("vec", "goal state", required=True, length=2),
        construction=Param("str", "offset construction", "particular_R", choices=("offset_eq", "particular_R", "hat_A")),
        pattern=Param("pattern", "available channels", required=True),
        x0=Param("vec", "initial state", [0.0, 0.0], length=2),
    )
    markov = dict(_PARTS_SCHEMA)
    markov.update(
        construction=Param("str", "offset construction", "hat_A", choices=("offset_eq", "particular_R", "hat_A")),
        pattern=Param("pattern", "channels available to both controllers", "P[0,1,1]"),
        switch_prob=Param("float", "probability of switching controller at each dwell boundary",
                          0.5, low=0.0, high=1.0),
        dwell=Param("float", "dwell time between chain steps in seconds", 0.05, low=0.0, low_open=True),
        n_seeds=Param("int", "number of seeded chains", 200, low=1, high=100000),
        x0=Param("vec", "initial state", [0.0, 1.0], length=2),
        target=Param("vec", "point whose distance is tracked", [math.sqrt(0.5), math.sqrt(0.5)], length=2),
    )

    def cost_checks(p):
        bad = [c for c in p["channels"] if c not in (1, 2, 3) or c != int(c)]
        return [f"parameters.channels: entries must be 1, 2 or 3, got {bad}"] if bad else []

    def noisy_checks(p):
        out = _corridor_checks(p)
        if p["jitter"] >= 1.0:
            out.append("parameters.jitter: must be below the receptor position 1")
        return out

    entries = [
        Scenario("corridor", "Two-pixel tau-balance steering in a straight corridor.",
                 _corridor_schema(), run_corridor, _corridor_checks),
        Scenario("corridor-sampled", "Tau-balance steering with sample-and-hold turn rate.",
                 sampled, run_corridor_sampled, _corridor_checks),
        Scenario("corridor-noisy", "Tau balance averaged over many noisy, dropping-out receptors.",
                 noisy, run_corridor_noisy, noisy_checks),
        Scenario("min-energy", "Minimum-energy open-loop steering of a linear system.",
                 min_energy, run_min_energy, _min_energy_checks),
        Scenario("cost-sweep", "Optimal cost to unit-circle targets for 1, 2 and 3 channels.",
                 {"n_phi": Param("int", "number of target angles", 64, low=1, high=100000),
                  "T": Param("float", "horizon in seconds", 1.0, low=0.0, low_open=True),
                  "channels": Param("vec", "channel counts to compare", [1, 2, 3])},
                 run_cost_sweep, cost_checks),
        Scenario("channel-classify", "Controllability of every channel pattern.",
                 classify, run_channel_classify, _system_checks),
        Scenario("dropout", "Standard-parts controller with some channels missing.",
                 dropout, run_dropout, _parts_checks),
        Scenario("markov", "Markov switching between two standard-parts controllers.",
                 markov, run_markov, _parts_checks),
    ]
    return {s.name: s for s in entries}


CATALOGUE = _build_catalogue()


def list_scenarios() -> dict:
    """Name -> {doc, parameters: {name: description}} for every scenario."""
    return {name: {"doc": s.doc, "parameters": {k: v.describe() for k, v in s.schema.items()}}
            for name, s in CATALOGUE.items()}
