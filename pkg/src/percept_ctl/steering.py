"""Tau-balance steering: continuous, sample-and-hold and noisy receptor arrays.

All simulations integrate the unicycle ``(x, y, theta)' = (v cos, v sin, u)``
with fixed-step RK4 inside the backend kernels (compiled when available, see
``percept_ctl._backend``).  Runs that leave the critical cone or touch a wall
stop early and say so in ``trajectory.meta["status"]``; that is a result,
not an exception.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .corridor import CorridorScene, VehicleState, balance_rate, tau_balance_closed_form
from .errors import ConeViolationError, DomainError, ParameterError
from .numerics import OdeTrajectory, eig_small

log = logging.getLogger(__name__)

STATUS = {0: "ok", 1: "cone_exit", 2: "wall_contact", 3: "diverged"}
CONVERGENCE_TOL = 1e-3
CONVERGENCE_HOLD = 5.0
NOISY_CHUNK = 4096


@dataclass(frozen=True)
class SteeringGain:
    k: float

    def __post_init__(self):
        if not (math.isfinite(self.k) and self.k > 0):
            raise ParameterError(f"steering gain must be positive, got {self.k}")


@dataclass(frozen=True)
class SampledSchedule:
    h: float

    def __post_init__(self):
        if not (math.isfinite(self.h) and self.h > 0):
            raise ParameterError(f"sampling interval must be positive, got {self.h}")


@dataclass
class LinearizationReport:
    jacobian: np.ndarray
    eigenvalues: tuple[complex, complex]
    k_crit: float


@dataclass(frozen=True)
class ReceptorArray:
    """Noisy photoreceptor array model.

    Each side carries ``n_per_side`` receptors nominally at image coordinate
    -position (left) or +position (right).  Every step each receptor is
    redrawn: it drops out with ``dropout_prob``, its image coordinate is
    jittered uniformly by up to ``jitter``, and its transit time picks up
    Gaussian noise of standard deviation ``tau_noise_sigma``.
    """

    n_per_side: int
    dropout_prob: float
    tau_noise_sigma: float
    seed: int = 0
    jitter: float = 0.2
    position: float = 1.0

    def __post_init__(self):
        if int(self.n_per_side) != self.n_per_side or self.n_per_side < 1:
            raise ParameterError("n_per_side must be a positive integer")
        if not 0.0 <= self.dropout_prob < 1.0:
            raise ParameterError("dropout_prob must lie in [0, 1)")
        if self.tau_noise_sigma < 0 or self.jitter < 0:
            raise ParameterError("noise and jitter must be non-negative")
        if self.jitter >= self.position:
            raise ParameterError("jitter must be smaller than the receptor position")


def _gain(k) -> float:
    return SteeringGain(float(k.k if isinstance(k, SteeringGain) else k)).k


def _grid(t_end: float, dt: float) -> tuple[int, float]:
    if dt <= 0 or t_end <= 0:
        raise ParameterError("t_end and dt must be positive")
    n = max(1, int(math.ceil(t_end / dt - 1e-9)))
    return n, t_end / n


def _check_start(state0: VehicleState, scene: CorridorScene):
    if not scene.in_corridor(state0.x):
        raise DomainError(f"start x={state0.x} is outside the corridor (-{scene.R}, {scene.R})")
    if not scene.in_cone(state0.theta):
        raise ConeViolationError(f"start heading {state0.theta} is outside the critical cone")


def _package(states, controls, status, stop, dt, meta) -> OdeTrajectory:
    times = np.arange(stop + 1) * dt
    meta = dict(meta)
    meta.update(status=STATUS[status], t_stop=float(times[-1]), backend=_backend.BACKEND)
    return OdeTrajectory(times, states[: stop + 1].copy(), controls[: stop + 1].copy(), meta)


def reduced_field(x: float, theta: float, scene: CorridorScene, k) -> tuple[float, float]:
    """Right-hand side of the (x, theta) subsystem under the tau-balance law."""
    u = tau_balance_closed_form(VehicleState(x, 0.0, theta), scene, _gain(k))
    return scene.v * math.cos(theta), u


def simulate_two_pixel(state0: VehicleState, scene: CorridorScene, k, t_end: float,
                       dt: float = 1e-3) -> OdeTrajectory:
    """Continuous tau-balance steering from two ideal photoreceptors at image +-1."""
    k = _gain(k)
    _check_start(state0, scene)
    n, dt = _grid(t_end, dt)
    out = _backend.kernels.corridor_run(state0.x, state0.y, state0.theta,
                                        scene.f, scene.R, scene.v, k, dt, n, 0)
    return _package(*out, dt, {"law": "two_pixel", "k": k})


def simulate_sampled(state0: VehicleState, scene: CorridorScene, k, schedule: SampledSchedule,
                     t_end: float, dt: float = 1e-3) -> OdeTrajectory:
    """Sample-and-hold tau-balance steering with sampling interval ``schedule.h``."""
    k = _gain(k)
    h = schedule.h if isinstance(schedule, SampledSchedule) else SampledSchedule(schedule).h
    _check_start(state0, scene)
    if dt > h:
        raise ParameterError(f"integration step {dt} exceeds the sampling interval {h}")
    n, dt = _grid(t_end, dt)
    every = max(1, int(round(h / dt)))
    if abs(every * dt - h) > 1e-12 * max(1.0, h):
        log.warning("sampling interval %g rounded to %g (%d steps of %g)", h, every * dt, every, dt)
    out = _backend.kernels.corridor_run(state0.x, state0.y, state0.theta,
                                        scene.f, scene.R, scene.v, k, dt, n, every)
    return _package(*out, dt, {"law": "sampled", "k": k, "h": every * dt, "h_requested": h})


def convergence_time(traj: OdeTrajectory, tol: float = CONVERGENCE_TOL,
                     hold: float = CONVERGENCE_HOLD) -> float | None:
    """First time after which |x| and |theta - pi/2| stay below ``tol`` to the end.

    Returns ``None`` unless that final stretch lasts at least ``hold`` seconds
    and the run finished normally.
    """
    if traj.meta.get("status", "ok") != "ok":
        return None
    x = traj.states[:, 0]
    th = traj.states[:, 2]
    inside = (np.abs(x) < tol) & (np.abs(th - math.pi / 2) < tol)
    if not inside[-1]:
        return None
    outside = np.flatnonzero(~inside)
    first = 0 if outside.size == 0 else outside[-1] + 1
    t0 = traj.times[first]
    if traj.times[-1] - t0 < hold:
        return None
    return float(t0)


def closed_form_eigenvalues(scene: CorridorScene, k) -> tuple[complex, complex]:
    """Eigenvalues of the linearized reduced system at the centred rest point."""
    k = _gain(k)
    f, R, v = scene.f, scene.R, scene.v
    centre = -f * f * k * (1 + R) / v
    disc = f * k * (f ** 3 * k * (1 + R) ** 2 / v ** 2 - 2.0)
    root = complex(math.sqrt(disc)) if disc >= 0 else complex(0.0, math.sqrt(-disc))
    return centre - root, centre + root


def critical_gain(scene: CorridorScene) -> float:
    """Gain at which the linearized eigenvalues turn from complex to real."""
    return 2.0 * scene.v ** 2 / (scene.f ** 3 * (1 + scene.R) ** 2)


def linearize_reduced(scene: CorridorScene, k) -> LinearizationReport:
    k = _gain(k)
    f, R, v = scene.f, scene.R, scene.v
    J = np.array([[0.0, -v],
                  [2 * f * k / v, -2 * (k * f * f + k * R * f * f) / v]])
    return LinearizationReport(J, closed_form_eigenvalues(scene, k), critical_gain(scene))


def finite_diff_jacobian(scene: CorridorScene, k, at=(0.0, math.pi / 2), step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of the reduced (x, theta) field."""
    k = _gain(k)
    x0, th0 = at
    J = np.empty((2, 2))
    for col, (dx, dth) in enumerate(((step, 0.0), (0.0, step))):
        plus = reduced_field(x0 + dx, th0 + dth, scene, k)
        minus = reduced_field(x0 - dx, th0 - dth, scene, k)
        J[:, col] = (np.array(plus) - np.array(minus)) / (2 * step)
    return J


def oscillation_boundary(scene: CorridorScene, k_lo: float, k_hi: float, tol: float = 1e-9) -> float:
    """Locate, by bisection, the gain where the numerical Jacobian's eigenvalues become real."""

    def oscillatory(k):
        return any(lam.imag != 0.0 for lam in eig_small(finite_diff_jacobian(scene, k)))

    if not (oscillatory(k_lo) and not oscillatory(k_hi)):
        raise ParameterError("bracket must have complex eigenvalues at k_lo and real ones at k_hi")
    while k_hi - k_lo > tol:
        mid = 0.5 * (k_lo + k_hi)
        if oscillatory(mid):
            k_lo = mid
        else:
            k_hi = mid
    return 0.5 * (k_lo + k_hi)


def _heading_domain(phi: float, x: float, scene: CorridorScene):
    half = math.pi / 2 - scene.critical_angle
    if not abs(phi) < half:
        raise DomainError(f"heading offset {phi} outside (-{half}, {half})")
    if not abs(x) < scene.R:
        raise DomainError(f"x={x} outside the corridor")


def iterate_map_g(phi: float, x: float, scene: CorridorScene, k, h: float) -> float:
    """Heading offset phi = theta - pi/2 after one hold interval with x frozen."""
    k = _gain(k)
    _heading_domain(phi, x, scene)
    return phi + h * balance_rate(x, phi + math.pi / 2, scene.f, scene.R, scene.v, k)


def iterate_map_g_prime(phi: float, x: float, scene: CorridorScene, k, h: float) -> float:
    """Derivative of ``iterate_map_g`` with respect to phi.

    For f = v = 1 this is
    1 + hk (-2 - 3R cos phi + R cos 3phi + 3x sin phi + x sin 3phi) / cos^2(2 phi).
    """
    k = _gain(k)
    _heading_domain(phi, x, scene)
    f, R, v = scene.f, scene.R, scene.v
    th = phi + math.pi / 2
    c, s = math.cos(th), math.sin(th)
    num = f * c * (s + R) + x * s
    den = f * f * c * c - s * s
    dnum = f * (c * c - s * s - R * s) + x * c
    dden = -2.0 * s * c * (f * f + 1.0)
    du = -2.0 * f * k / v * (dnum * den - num * dden) / (den * den)
    return 1.0 + h * du


def iterate_g(phi0: float, x: float, scene: CorridorScene, k, h: float, n: int) -> np.ndarray:
    """Orbit of ``iterate_map_g`` from phi0; stops early if it leaves the domain."""
    out = [phi0]
    phi = phi0
    for _ in range(n):
        try:
            phi = iterate_map_g(phi, x, scene, k, h)
        except DomainError:
            break
        out.append(phi)
    return np.array(out)


def contraction_sup(scene: CorridorScene, k, h: float, phi_max: float, n_grid: int = 101) -> float:
    """sup |g'| over the grid [-phi_max, phi_max] x (-R, R)."""
    phis = np.linspace(-phi_max, phi_max, n_grid)
    xs = np.linspace(-scene.R, scene.R, n_grid + 2)[1:-1]
    return max(abs(iterate_map_g_prime(p, x, scene, k, h)) for p in phis for x in xs)


def box_muller_pair(rng: np.random.Generator, size) -> tuple[np.ndarray, np.ndarray]:
    """Two independent standard-normal arrays from one set of uniform pairs."""
    r = np.sqrt(-2.0 * np.log(1.0 - rng.random(size)))
    angle = 2.0 * math.pi * rng.random(size)
    return r * np.cos(angle), r * np.sin(angle)


def receptor_draws(array: ReceptorArray, rng: np.random.Generator, n_steps: int) -> dict:
    """Per-step receptor positions, survival masks and side noise normals.

    The two standard normals of each Box-Muller pair feed the left and right
    side respectively.
    """
    shape = (n_steps, array.n_per_side)
    out = {}
    for side, sign in (("left", -1.0), ("right", 1.0)):
        out[f"alive_{side}"] = (rng.random(shape) >= array.dropout_prob).astype(np.uint8)
        out[f"d_{side}"] = sign * array.position + array.jitter * (2.0 * rng.random(shape) - 1.0)
    out["z_left"], out["z_right"] = box_muller_pair(rng, n_steps)
    return out


def simulate_noisy_array(state0: VehicleState, scene: CorridorScene, k, array: ReceptorArray,
                         t_end: float, dt: float = 1e-2) -> OdeTrajectory:
    """Tau-balance steering driven by the mean of many noisy receptors per side.

    ``meta["starved_fraction"]`` is the fraction of steps on which one side
    had no surviving receptor and the previous turn rate was held.
    """
    k = _gain(k)
    _check_start(state0, scene)
    n, dt = _grid(t_end, dt)
    rng = np.random.default_rng(array.seed)
    x, y, th = state0.x, state0.y, state0.theta
    u_prev = 0.0
    states, controls = [np.array([[x, y, th]])], []
    starved = 0
    status = 0
    done = 0
    while done < n and status == 0:
        m = min(NOISY_CHUNK, n - done)
        draws = receptor_draws(array, rng, m)
        s, c, status, stop, st, u_prev = _backend.kernels.corridor_noisy_run(
            x, y, th, scene.f, scene.R, scene.v, k, dt, m,
            draws["d_left"], draws["d_right"], draws["alive_left"], draws["alive_right"],
            array.tau_noise_sigma, draws["z_left"], draws["z_right"], u_prev)
        states.append(s[1: stop + 1])
        controls.append(c[:stop])
        starved += st
        done += stop
        x, y, th = s[stop]
    controls.append(np.array([u_prev]))
    meta = {"law": "noisy_array", "k": k, "seed": array.seed,
            "starved_fraction": starved / max(done, 1)}
    return _package(np.concatenate(states), np.concatenate(controls), status, done, dt, meta)


def noisy_monte_carlo(state0: VehicleState, scene: CorridorScene, k, array: ReceptorArray,
                      seeds, t_end: float, dt: float = 1e-2) -> np.ndarray:
    """Terminal |x| of one noisy-array run per seed, indexed like ``seeds``.

    A run that stops early (wall or cone) reports ``inf``.
    """
    out = np.empty(len(seeds))
    for i, seed in enumerate(seeds):
        arr = ReceptorArray(array.n_per_side, array.dropout_prob, array.tau_noise_sigma,
                            int(seed), array.jitter, array.position)
        traj = simulate_noisy_array(state0, scene, k, arr, t_end, dt)
        out[i] = abs(traj.final[0]) if traj.meta["status"] == "ok" else math.inf
    return out
