"""Standard-parts controllers and their behaviour under channel dropout.

Every input channel runs the same fixed form ``u_j = v_j + sum_i k_ji x_i``.
The gain ``K`` makes ``A + B K`` Hurwitz and the offset ``v`` makes the goal
``x_g`` the rest point, ``(A + B K) x_g + B v = 0``.  When some channels drop
out (``B -> B P``) the loop becomes ``x' = A x + B P (K x + v)``; whether the
goal survives depends on how ``v`` was built.

Offsets come in three flavours:

* ``offset_eq``: the minimum-norm ``v`` solving the equilibrium condition;
* ``particular_R``: ``v = -(R + K) x_g`` with ``R = B^T (B B^T)^{-1} A``;
* ``hat_A``: ``v = -(A_hat + K) x_g`` for any ``A_hat`` with ``B A_hat = A``.

If ``P A_hat = A_hat`` the second kind keeps the goal under ``P``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from . import _backend
from .errors import (
    ConsistencyError,
    DimensionError,
    NoSolutionError,
    ParameterError,
    RankError,
)
from .multichannel import LtiSystem, ProjectionPattern, _pattern_for
from .numerics import OdeTrajectory, char_poly, is_hurwitz, matrix_rank, min_norm_solve, solve_linear

log = logging.getLogger(__name__)

OFFSET_TOL = 1e-10
INVARIANCE_TOL = 1e-12
REACHED_TOL = 1e-3
NEWTON_FD_STEP = 1e-7
NEWTON_MAX_ITER = 100
NEWTON_RESTARTS = 20
NEWTON_TOL = 1e-12


@dataclass(frozen=True)
class GainMatrix:
    """Feedback gains; row ``j`` holds ``k_j1 ... k_jn``."""

    K: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "K", np.atleast_2d(np.asarray(self.K, dtype=float)))

    @classmethod
    def for_system(cls, sys: LtiSystem, K) -> "GainMatrix":
        gain = cls(K)
        if gain.K.shape != (sys.m, sys.n):
            raise DimensionError(f"K must be {sys.m}x{sys.n}, got {gain.K.shape}")
        if not is_hurwitz(sys.A + sys.B @ gain.K):
            raise ParameterError("A + B K is not Hurwitz")
        return gain


@dataclass(frozen=True)
class OffsetVector:
    v: np.ndarray
    goal: np.ndarray
    construction: str

    def residual(self, sys: LtiSystem, K) -> float:
        K = K.K if isinstance(K, GainMatrix) else np.asarray(K, dtype=float)
        return float(np.abs((sys.A + sys.B @ K) @ self.goal + sys.B @ self.v).max())


@dataclass(frozen=True)
class DriftFactorization:
    """A solution ``hat_A`` of ``B hat_A = A`` with its family coordinates."""

    hat_A: np.ndarray
    params: tuple = ()


@dataclass
class DriftFamily:
    """All ``m x n`` solutions of ``B N = A``: ``particular + span(basis)``.

    ``basis`` is orthonormal in the Frobenius inner product and has
    ``(m - n) n`` members for full-row-rank ``B``.
    """

    particular: np.ndarray
    basis: list
    A: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def member(self, params=None) -> DriftFactorization:
        params = tuple(np.zeros(self.dimension) if params is None else np.asarray(params, dtype=float).ravel())
        if len(params) != self.dimension:
            raise DimensionError(f"family has {self.dimension} parameters, got {len(params)}")
        hat_A = self.particular + sum((p * N for p, N in zip(params, self.basis)), np.zeros_like(self.particular))
        return DriftFactorization(hat_A, tuple(float(p) for p in params))

    def coordinates(self, hat_A) -> DriftFactorization:
        """Locate a given solution in the family; rejects non-solutions."""
        hat_A = np.asarray(hat_A, dtype=float)
        if hat_A.shape != self.particular.shape:
            raise DimensionError(f"expected shape {self.particular.shape}, got {hat_A.shape}")
        if np.abs(self.B @ hat_A - self.A).max() > OFFSET_TOL:
            raise ParameterError("matrix does not satisfy B hat_A = A")
        diff = hat_A - self.particular
        params = tuple(float(np.sum(diff * N)) for N in self.basis)
        return DriftFactorization(hat_A, params)


def _full_row_rank(sys: LtiSystem):
    if matrix_rank(sys.B) < sys.n:
        sv = np.linalg.svd(sys.B, compute_uv=False)
        raise RankError(f"B ({sys.n}x{sys.m}) does not have full row rank", float(sv[-1]))


def pseudo_drift_R(sys: LtiSystem) -> np.ndarray:
    """Minimum-norm solution ``R = B^T (B B^T)^{-1} A`` of ``B R = A``."""
    _full_row_rank(sys)
    return min_norm_solve(sys.B, sys.A)


def _gain_matrix(K) -> np.ndarray:
    return K.K if isinstance(K, GainMatrix) else np.atleast_2d(np.asarray(K, dtype=float))


def _checked_offset(sys, K, goal, v, construction) -> OffsetVector:
    off = OffsetVector(np.asarray(v, dtype=float), goal, construction)
    res = off.residual(sys, K)
    if res > OFFSET_TOL * max(1.0, np.abs(goal).max()):
        raise ConsistencyError(f"{construction} offset misses the equilibrium condition by {res:.3e}")
    return off


def offset_equilibrium(sys: LtiSystem, K, x_g) -> OffsetVector:
    """Minimum-norm ``v`` with ``B v = -(A + B K) x_g``."""
    _full_row_rank(sys)
    K = _gain_matrix(K)
    goal = np.asarray(x_g, dtype=float).ravel()
    v = min_norm_solve(sys.B, -(sys.A + sys.B @ K) @ goal[:, None]).ravel()
    return _checked_offset(sys, K, goal, v, "offset_eq")


def offset_particular(sys: LtiSystem, K, x_g) -> OffsetVector:
    K = _gain_matrix(K)
    goal = np.asarray(x_g, dtype=float).ravel()
    v = -(pseudo_drift_R(sys) + K) @ goal
    return _checked_offset(sys, K, goal, v, "particular_R")


def drift_family(sys: LtiSystem) -> DriftFamily:
    _full_row_rank(sys)
    if sys.m <= sys.n:
        raise ParameterError("a drift family needs more inputs than states (m > n)")
    # B N for row-major flattened N is kron(B, I_n) vec(N)
    lin = np.kron(sys.B, np.eye(sys.n))
    null = scipy.linalg.null_space(lin)
    basis = [null[:, j].reshape(sys.m, sys.n) for j in range(null.shape[1])]
    return DriftFamily(pseudo_drift_R(sys), basis, sys.A, sys.B)


def invariance_check(fact, pattern) -> bool:
    """True when masking the rows outside ``pattern`` leaves ``hat_A`` unchanged."""
    hat_A = fact.hat_A if isinstance(fact, DriftFactorization) else np.asarray(fact, dtype=float)
    pattern = ProjectionPattern.parse(pattern)
    if pattern.m != hat_A.shape[0]:
        raise DimensionError(f"pattern {pattern} does not match {hat_A.shape[0]} rows")
    return bool(np.abs(pattern.matrix @ hat_A - hat_A).max() < INVARIANCE_TOL)


def offset_from_hat_A(fact, K, x_g, sys: LtiSystem | None = None) -> OffsetVector:
    """Offset ``v = -(hat_A + K) x_g``; checked against ``sys`` when given."""
    hat_A = fact.hat_A if isinstance(fact, DriftFactorization) else np.asarray(fact, dtype=float)
    K = _gain_matrix(K)
    goal = np.asarray(x_g, dtype=float).ravel()
    v = -(hat_A + K) @ goal
    if sys is None:
        return OffsetVector(v, goal, "hat_A")
    if np.abs(sys.B @ hat_A - sys.A).max() > OFFSET_TOL:
        raise ParameterError("hat_A does not satisfy B hat_A = A for this system")
    return _checked_offset(sys, K, goal, v, "hat_A")


def _gain_residual(sys, patterns, target, kvec) -> np.ndarray:
    K = kvec.reshape(sys.m, sys.n)
    parts = []
    for p in patterns:
        parts.append(char_poly(sys.A + sys.B @ p.matrix @ K)[1:] - target[1:])
    return np.concatenate(parts)


def _newton(sys, patterns, target, k0):
    k = k0.copy()
    r = _gain_residual(sys, patterns, target, k)
    norm = float(np.linalg.norm(r))
    for _ in range(NEWTON_MAX_ITER):
        if norm < NEWTON_TOL:
            return k, norm
        J = np.empty((r.size, k.size))
        for j in range(k.size):
            kp = k.copy()
            kp[j] += NEWTON_FD_STEP
            J[:, j] = (_gain_residual(sys, patterns, target, kp) - r) / NEWTON_FD_STEP
        step = np.linalg.lstsq(J, -r, rcond=None)[0]
        damping = 1.0
        while damping > 1e-6:
            trial = k + damping * step
            r_trial = _gain_residual(sys, patterns, target, trial)
            n_trial = float(np.linalg.norm(r_trial))
            if np.isfinite(n_trial) and n_trial < norm:
                break
            damping *= 0.5
        else:
            return k, norm
        k, r, norm = trial, r_trial, n_trial
    return k, norm


def simultaneous_gains_solve(sys: LtiSystem, pattern_set: Sequence, target_poles: Sequence,
                             K0=None, seed: int = 0, restarts: int = NEWTON_RESTARTS) -> GainMatrix:
    """One gain matrix placing the same poles under every pattern in ``pattern_set``.

    Damped Newton (least-squares steps, finite-difference Jacobian) on the
    stacked characteristic-polynomial coefficient residuals.  The supplied
    or zero initial guess is tried first, then ``restarts`` seeded random
    starts.

    Raises
    ------
    NoSolutionError
        No start converged; carries the best residual seen.
    ConsistencyError
        A converged gain fails the Hurwitz check on some pattern.
    """
    patterns = [_pattern_for(sys, p) for p in pattern_set]
    if not patterns:
        raise ParameterError("pattern_set is empty")
    poles = np.asarray(target_poles, dtype=complex)
    if poles.size != sys.n:
        raise DimensionError(f"need {sys.n} target poles, got {poles.size}")
    if np.any(poles.real >= 0):
        raise ParameterError("target poles must lie in the open left half plane")
    target = np.real_if_close(np.poly(poles))
    if np.iscomplexobj(target):
        raise ParameterError("target poles must be closed under conjugation")
    rng = np.random.default_rng(seed)
    starts = [np.zeros(sys.m * sys.n) if K0 is None else _gain_matrix(K0).ravel().astype(float)]
    starts += [rng.standard_normal(sys.m * sys.n) for _ in range(restarts)]
    best = math.inf
    for attempt, k0 in enumerate(starts):
        k, norm = _newton(sys, patterns, target, k0)
        best = min(best, norm)
        if norm < NEWTON_TOL:
            K = k.reshape(sys.m, sys.n)
            for p in patterns:
                if not is_hurwitz(sys.A + sys.B @ p.matrix @ K):
                    raise ConsistencyError(f"converged gains are not Hurwitz under {p}")
            log.debug("gain solve converged on start %d", attempt)
            return GainMatrix(K)
    raise NoSolutionError("simultaneous gain solve did not converge", best)


@dataclass(frozen=True)
class StandardPartsController:
    K: GainMatrix
    v: OffsetVector
    goal: np.ndarray

    @classmethod
    def build(cls, sys: LtiSystem, K, goal, construction: str = "particular_R",
              hat_A=None) -> "StandardPartsController":
        """Controller for ``goal``; the offset comes from ``construction``.

        ``construction`` is ``"offset_eq"``, ``"particular_R"`` or
        ``"hat_A"`` (which needs ``hat_A``).  Checks that ``A + B K`` is Hurwitz, so the goal is the
        unique rest point under full availability.
        """
        gain = GainMatrix.for_system(sys, _gain_matrix(K))
        if construction == "offset_eq":
            off = offset_equilibrium(sys, gain, goal)
        elif construction == "particular_R":
            off = offset_particular(sys, gain, goal)
        elif construction == "hat_A":
            if hat_A is None:
                raise ParameterError("hat_A construction needs a hat_A matrix")
            off = offset_from_hat_A(hat_A, gain, goal, sys)
        else:
            raise ParameterError(f"unknown offset construction {construction!r}")
        return cls(gain, off, off.goal)

    def closed_loop(self, sys: LtiSystem, pattern=None) -> tuple[np.ndarray, np.ndarray]:
        """``(M, c)`` with ``x' = M x + c`` when only ``pattern`` channels act."""
        BP = sys.B @ _pattern_for(sys, pattern).matrix
        return sys.A + BP @ self.K.K, BP @ self.v.v


@dataclass
class DropoutResult:
    trajectory: OdeTrajectory
    verdict: str  # "reached", "diverted" or "unstable"
    hurwitz: bool
    rest_point: np.ndarray | None
    terminal_distance: float


def _grid(t_end, dt):
    if t_end <= 0 or dt <= 0:
        raise ParameterError("t_end and dt must be positive")
    n = max(1, int(math.ceil(t_end / dt - 1e-9)))
    return n, t_end / n


def simulate_dropout(ctrl: StandardPartsController, sys: LtiSystem, pattern, x0,
                     t_end: float = 30.0, dt: float = 1e-3) -> DropoutResult:
    """Run the controller with only the channels in ``pattern`` and judge the outcome."""
    pattern = _pattern_for(sys, pattern)
    M, c = ctrl.closed_loop(sys, pattern)
    n, dt = _grid(t_end, dt)
    states, status, stop = _backend.kernels.affine_run(M[None], c[None], np.zeros(n, dtype=np.int_),
                                                       np.asarray(x0, dtype=float), dt)
    states = states[: stop + 1]
    times = np.arange(stop + 1) * dt
    K, v = ctrl.K.K, ctrl.v.v
    controls = (pattern.matrix @ (states @ K.T + v).T).T
    hurwitz = is_hurwitz(M)
    try:
        rest = -solve_linear(M, c)
    except ArithmeticError:
        rest = None
    dist = float(np.linalg.norm(states[-1] - ctrl.goal))
    if not hurwitz or status != 0:
        verdict = "unstable"
    elif dist < REACHED_TOL:
        verdict = "reached"
    else:
        verdict = "diverted"
    meta = {"kind": "dropout", "pattern": str(pattern), "verdict": verdict,
            "status": "ok" if status == 0 else "diverged", "backend": _backend.BACKEND}
    traj = OdeTrajectory(times, states, controls, meta)
    return DropoutResult(traj, verdict, hurwitz, rest, dist)


@dataclass(frozen=True)
class MarkovSwitchPlan:
    """Markov chain over controllers, stepped every ``dwell_dt`` seconds.

    ``pattern`` restricts every controller to the same channel subset.
    """

    controllers: tuple
    transition_matrix: np.ndarray
    dwell_dt: float = 0.05
    seed: int = 0
    initial: int = 0
    pattern: ProjectionPattern | None = None

    def __post_init__(self):
        P = np.asarray(self.transition_matrix, dtype=float)
        q = len(self.controllers)
        if q == 0:
            raise ParameterError("plan needs at least one controller")
        if P.shape != (q, q):
            raise DimensionError(f"transition matrix must be {q}x{q}, got {P.shape}")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-12):
            raise ParameterError("transition matrix rows must be non-negative and sum to 1")
        if not (math.isfinite(self.dwell_dt) and self.dwell_dt > 0):
            raise ParameterError("dwell_dt must be positive")
        if not 0 <= self.initial < q:
            raise ParameterError(f"initial controller {self.initial} out of range")
        object.__setattr__(self, "controllers", tuple(self.controllers))
        object.__setattr__(self, "transition_matrix", P)


@dataclass
class MarkovResult:
    trajectory: OdeTrajectory
    modes: np.ndarray
    min_distance: float
    t_min: float
    terminal_distance: float


def markov_chain_path(P: np.ndarray, n_dwells: int, rng: np.random.Generator, initial: int = 0) -> np.ndarray:
    """Controller index for each dwell period, starting in ``initial``."""
    cum = np.cumsum(P, axis=1)
    cum[:, -1] = 1.0
    draws = rng.random(n_dwells)
    path = np.empty(n_dwells, dtype=np.int_)
    state = initial
    for i in range(n_dwells):
        path[i] = state
        state = int(np.searchsorted(cum[state], draws[i], side="right"))
    return path


def markov_modulate(plan: MarkovSwitchPlan, sys: LtiSystem, x0, t_end: float, dt: float,
                    target) -> MarkovResult:
    """Switch controllers along a seeded Markov chain and track the distance to ``target``."""
    n, dt = _grid(t_end, dt)
    per_dwell = max(1, int(round(plan.dwell_dt / dt)))
    if abs(per_dwell * dt - plan.dwell_dt) > 1e-9 * plan.dwell_dt:
        log.warning("dwell %g rounded to %g (%d steps)", plan.dwell_dt, per_dwell * dt, per_dwell)
    n_dwells = -(-n // per_dwell)
    rng = np.random.default_rng(plan.seed)
    path = markov_chain_path(plan.transition_matrix, n_dwells, rng, plan.initial)
    modes = np.repeat(path, per_dwell)[:n]
    loops = [c.closed_loop(sys, plan.pattern) for c in plan.controllers]
    Ms = np.array([M for M, _ in loops])
    cs = np.array([c for _, c in loops])
    states, status, stop = _backend.kernels.affine_run(Ms, cs, modes, np.asarray(x0, dtype=float), dt)
    states = states[: stop + 1]
    times = np.arange(stop + 1) * dt
    target = np.asarray(target, dtype=float)
    dist = np.linalg.norm(states - target, axis=1)
    i_min = int(np.argmin(dist))
    meta = {"kind": "markov", "seed": plan.seed, "dwell": per_dwell * dt,
            "status": "ok" if status == 0 else "diverged", "backend": _backend.BACKEND}
    mode_col = np.append(modes[:stop], modes[stop - 1] if stop else plan.initial).astype(float)
    traj = OdeTrajectory(times, states, mode_col, meta)
    return MarkovResult(traj, modes[:stop], float(dist[i_min]), float(times[i_min]), float(dist[-1]))


def example_three_channel_system() -> LtiSystem:
    """Double integrator with three input channels ``(0,1)``, ``(1,0)``, ``(1,1)``."""
    return LtiSystem(np.array([[0.0, 1.0], [0.0, 0.0]]),
                     np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 1.0]]))


EXAMPLE_GAINS = np.array([[0.0, -1.0], [-1.0, 0.0], [-0.5, -0.5]])
EXAMPLE_HAT_A = np.array([[0.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
