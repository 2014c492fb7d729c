"""Minimum-energy steering of linear systems through subsets of input channels.

A system ``x' = A x + B u`` with ``m`` inputs can be driven through any
subset of its channels.  A subset is a :class:`ProjectionPattern`, i.e. the
0/1 diagonal of a projection ``P``; the available input matrix is then
``B P``.  The patterned controllability Gramian over ``[0, T]`` is

    W_P(T) = int_0^T e^{A s} B P B^T e^{A^T s} ds

and the cheapest (L2) control from ``x0`` to ``x1`` costs
``z^T W_P^{-1} z`` with ``z = x1 - e^{AT} x0``.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConsistencyError, DimensionError, NotControllableError, ParameterError
from .numerics import OdeTrajectory, as_matrix, integrate_ode, mat_exp, matrix_rank, quad_simpson

log = logging.getLogger(__name__)

GRAMIAN_PANELS = 512
SINGULAR_RTOL = 1e-10
# Kalman-matrix singular-value ratios above KALMAN_FULL are clearly full rank,
# below SINGULAR_RTOL clearly deficient; in between the Gramian floor decides
KALMAN_FULL = 1e-3
PLAN_COND_MAX = 1e12
ENDPOINT_TOL = 1e-4
COST_RTOL = 1e-4
MAX_ENUM_CHANNELS = 16


@dataclass(frozen=True)
class LtiSystem:
    """Linear time-invariant plant ``x' = A x + B u``."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        if A.shape[0] != A.shape[1]:
            raise DimensionError(f"A must be square, got {A.shape}")
        if B.ndim != 2 or B.shape[0] != A.shape[0]:
            raise DimensionError(f"B must have {A.shape[0]} rows, got shape {B.shape}")
        if B.shape[1] < 1:
            raise DimensionError("B needs at least one column")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def with_column(self, col) -> "LtiSystem":
        col = np.asarray(col, dtype=float).reshape(-1, 1)
        return LtiSystem(self.A, np.hstack([self.B, col]))


@dataclass(frozen=True)
class SteeringTask:
    x0: np.ndarray
    x1: np.ndarray
    horizon_T: float = 1.0

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float).ravel()
        x1 = np.asarray(self.x1, dtype=float).ravel()
        if x0.shape != x1.shape:
            raise DimensionError("x0 and x1 differ in dimension")
        if not (math.isfinite(self.horizon_T) and self.horizon_T > 0):
            raise ParameterError(f"horizon must be positive, got {self.horizon_T}")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "x1", x1)


@dataclass(frozen=True)
class ProjectionPattern:
    """Which input channels are available, as a tuple of 0/1 bits.

    >>> ProjectionPattern.parse("P[1,0,1]").bits
    (1, 0, 1)
    """

    bits: tuple

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if not bits or any(b not in (0, 1) for b in bits):
            raise ParameterError(f"pattern bits must be a non-empty sequence of 0/1, got {self.bits!r}")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def full(cls, m: int) -> "ProjectionPattern":
        return cls((1,) * m)

    @classmethod
    def parse(cls, text) -> "ProjectionPattern":
        if isinstance(text, ProjectionPattern):
            return text
        if isinstance(text, str):
            body = text.strip()
            if body.startswith("P"):
                body = body[1:]
            body = body.strip("[]() ")
            return cls(tuple(int(tok) for tok in body.replace(" ", "").split(",") if tok))
        return cls(tuple(text))

    @property
    def m(self) -> int:
        return len(self.bits)

    @property
    def k(self) -> int:
        return sum(self.bits)

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(np.asarray(self.bits, dtype=float))

    def __le__(self, other: "ProjectionPattern") -> bool:
        return self.m == other.m and all(a <= b for a, b in zip(self.bits, other.bits))

    def __str__(self):
        return "P[" + ",".join(map(str, self.bits)) + "]"


def _pattern_for(sys: LtiSystem, pattern) -> ProjectionPattern:
    pattern = ProjectionPattern.full(sys.m) if pattern is None else ProjectionPattern.parse(pattern)
    if pattern.m != sys.m:
        raise DimensionError(f"pattern {pattern} has {pattern.m} bits but the system has {sys.m} inputs")
    return pattern


@dataclass
class Gramian:
    W: np.ndarray
    horizon_T: float
    pattern: ProjectionPattern
    method: str = "quadrature"

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.W + self.W.T))

    @property
    def condition(self) -> float:
        ev = self.eigenvalues
        if ev[0] <= 0.0:
            return math.inf
        return float(ev[-1] / ev[0])


@dataclass
class MinEnergyPlan:
    """Open-loop minimum-energy control ``u(t) = P B^T e^{A^T (T - t)} lambda``."""

    lam: np.ndarray
    z: np.ndarray
    cost_eta: float
    horizon_T: float
    pattern: ProjectionPattern
    gramian: Gramian = field(repr=False, default=None)

    def control(self, sys: LtiSystem, t: float) -> np.ndarray:
        BP = sys.B @ self.pattern.matrix
        return BP.T @ mat_exp(sys.A.T, self.horizon_T - t) @ self.lam


def _nilpotent_powers(A: np.ndarray) -> list[np.ndarray]:
    n = A.shape[0]
    powers = [np.eye(n)]
    for _ in range(n):
        powers.append(powers[-1] @ A)
    scale = max(1.0, np.abs(A).max()) ** n
    if np.abs(powers[n]).max() > 1e-12 * scale:
        raise ParameterError("series Gramian needs a nilpotent drift matrix")
    return powers[:n]


def gramian(sys: LtiSystem, T: float, pattern=None, method: str = "quadrature",
            n_panels: int = GRAMIAN_PANELS) -> Gramian:
    """Controllability Gramian of ``(A, B P)`` over ``[0, T]``.

    Parameters
    ----------
    sys : LtiSystem
    T : float
        Horizon, strictly positive.
    pattern : ProjectionPattern or str, optional
        Channel availability; all channels when omitted.
    method : {"quadrature", "series"}
        ``"quadrature"`` applies composite Simpson to the integrand, stepping
        the propagator ``e^{A s}`` by repeated multiplication with
        ``e^{A h}``.  ``"series"`` integrates the terminating exponential
        series exactly and only accepts nilpotent ``A``.

    Returns
    -------
    Gramian
    """
    if not (math.isfinite(T) and T > 0):
        raise ParameterError(f"horizon must be positive, got {T}")
    pattern = _pattern_for(sys, pattern)
    BP = sys.B @ pattern.matrix
    M = BP @ BP.T
    if method == "quadrature":
        if n_panels <= 0 or n_panels % 2:
            raise ParameterError(f"n_panels must be a positive even number, got {n_panels}")
        h = T / n_panels
        step = mat_exp(sys.A, h)
        E = np.eye(sys.n)
        W = np.zeros((sys.n, sys.n))
        for i in range(n_panels + 1):
            weight = 1.0 if i in (0, n_panels) else (4.0 if i % 2 else 2.0)
            W += weight * (E @ M @ E.T)
            E = step @ E
        W *= h / 3.0
    elif method == "series":
        powers = _nilpotent_powers(sys.A)
        W = np.zeros((sys.n, sys.n))
        for i, Ai in enumerate(powers):
            for j, Aj in enumerate(powers):
                coeff = T ** (i + j + 1) / ((i + j + 1) * math.factorial(i) * math.factorial(j))
                W += coeff * (Ai @ M @ Aj.T)
    else:
        raise ParameterError(f"unknown Gramian method {method!r}")
    W = 0.5 * (W + W.T)
    return Gramian(W, float(T), pattern, method)


def min_energy_plan(sys: LtiSystem, task: SteeringTask, pattern=None,
                    method: str = "quadrature") -> MinEnergyPlan:
    """Cheapest open-loop control steering ``task.x0`` to ``task.x1``."""
    if task.x0.size != sys.n:
        raise DimensionError(f"task lives in R^{task.x0.size}, system in R^{sys.n}")
    G = gramian(sys, task.horizon_T, pattern, method)
    cond = G.condition
    if not cond < PLAN_COND_MAX:
        raise NotControllableError(
            f"Gramian under {G.pattern} is singular (condition {cond:.3e}); "
            "the system is not controllable through these channels", str(G.pattern))
    z = task.x1 - mat_exp(sys.A, task.horizon_T) @ task.x0
    lam = np.linalg.solve(G.W, z)
    cost = float(z @ lam)
    return MinEnergyPlan(lam, z, max(cost, 0.0), task.horizon_T, G.pattern, G)


def simulate_min_energy(sys: LtiSystem, plan: MinEnergyPlan, task: SteeringTask,
                        dt: float = 1e-3) -> OdeTrajectory:
    """Integrate the plan's open-loop control and check it against the plan.

    Raises
    ------
    ConsistencyError
        If the endpoint misses ``task.x1`` by more than 1e-4 or the realized
        energy differs from ``plan.cost_eta`` by more than 1e-4 relative.
    """
    T = task.horizon_T
    def rhs(t, x):
        return sys.A @ x + sys.B @ plan.control(sys, t)

    traj = integrate_ode(rhs, task.x0, 0.0, T, dt, meta={"kind": "min_energy", "pattern": str(plan.pattern)})
    traj.controls = np.array([plan.control(sys, t) for t in traj.times])
    miss = float(np.linalg.norm(traj.final - task.x1))
    panels = 2 * max(1, int(math.ceil(T / dt / 2)))
    realized = float(quad_simpson(lambda t: float(np.sum(plan.control(sys, t) ** 2)), 0.0, T, panels))
    traj.meta.update(endpoint_miss=miss, realized_cost=realized, planned_cost=plan.cost_eta)
    if miss > ENDPOINT_TOL:
        raise ConsistencyError(f"min-energy endpoint misses target by {miss:.3e}")
    if abs(realized - plan.cost_eta) > COST_RTOL * max(plan.cost_eta, 1e-12) and abs(realized - plan.cost_eta) > 1e-12:
        raise ConsistencyError(f"realized energy {realized!r} disagrees with planned {plan.cost_eta!r}")
    return traj


def augment_cost_compare(sys: LtiSystem, task: SteeringTask, extra_col) -> tuple[float, float]:
    """Optimal cost before and after appending one input column."""
    before = min_energy_plan(sys, task).cost_eta
    after = min_energy_plan(sys.with_column(extra_col), task).cost_eta
    return before, after


def _kalman_matrix(sys: LtiSystem, pattern) -> np.ndarray:
    BP = sys.B @ _pattern_for(sys, pattern).matrix
    blocks = [BP]
    for _ in range(sys.n - 1):
        blocks.append(sys.A @ blocks[-1])
    return np.hstack(blocks)


def kalman_rank(sys: LtiSystem, pattern=None) -> int:
    return matrix_rank(_kalman_matrix(sys, pattern), rtol=SINGULAR_RTOL)


def k_channel_controllable(sys: LtiSystem, pattern, T: float = 1.0) -> bool:
    """True when the system is controllable using only the channels in ``pattern``.

    The verdict is the Gramian's (smallest eigenvalue above 1e-10 times the
    largest).  It is cross-checked with the singular values of the Kalman
    matrix of ``(A, B P)``; the two scale differently (Gramian eigenvalues go
    roughly like squared Kalman singular values), so only a decisive Kalman
    verdict can contradict the Gramian.

    Raises
    ------
    ConsistencyError
        The Kalman matrix is clearly full rank (singular-value ratio above
        1e-3) or clearly deficient (below 1e-10) and the Gramian disagrees.
    """
    G = gramian(sys, T, pattern)
    ev = G.eigenvalues
    by_gramian = bool(ev[-1] > 0.0 and ev[0] > SINGULAR_RTOL * ev[-1])
    sv = np.linalg.svd(_kalman_matrix(sys, G.pattern), compute_uv=False)
    ratio = float(sv[sys.n - 1] / sv[0]) if sv[0] > 0 else 0.0
    if ratio > KALMAN_FULL and not by_gramian or ratio < SINGULAR_RTOL and by_gramian:
        raise ConsistencyError(
            f"Gramian and Kalman tests disagree for {G.pattern}: gramian={by_gramian} "
            f"(eigenvalues {ev}), Kalman singular-value ratio {ratio:.3e}")
    if KALMAN_FULL >= ratio >= SINGULAR_RTOL:
        log.debug("%s is ill-conditioned (Kalman ratio %.3e); Gramian verdict %s", G.pattern, ratio, by_gramian)
    return by_gramian


@dataclass
class PatternClassification:
    verdicts: dict  # ProjectionPattern -> bool

    @property
    def controllable(self) -> list[ProjectionPattern]:
        return [p for p, ok in self.verdicts.items() if ok]

    @property
    def uncontrollable(self) -> list[ProjectionPattern]:
        return [p for p, ok in self.verdicts.items() if not ok]

    def as_dict(self) -> dict:
        return {str(p): ok for p, ok in self.verdicts.items()}


def enumerate_patterns(sys: LtiSystem, T: float = 1.0) -> PatternClassification:
    """Classify all ``2^m`` channel patterns, empty pattern included.

    Adding channels can only enlarge the Gramian, so every superset of a
    controllable pattern must be controllable; a violation is reported as an
    internal inconsistency.
    """
    if sys.m > MAX_ENUM_CHANNELS:
        raise ParameterError(
            f"{sys.m} channels give 2^{sys.m} patterns; call k_channel_controllable "
            "on the specific patterns of interest instead")
    verdicts = {}
    for bits in itertools.product((0, 1), repeat=sys.m):
        p = ProjectionPattern(bits)
        verdicts[p] = False if p.k == 0 else k_channel_controllable(sys, p, T)
    for p, ok in verdicts.items():
        if not ok:
            continue
        for j, b in enumerate(p.bits):
            if b == 0:
                sup = ProjectionPattern(p.bits[:j] + (1,) + p.bits[j + 1:])
                if not verdicts[sup]:
                    raise ConsistencyError(f"{sup} is not controllable although its subset {p} is")
    return PatternClassification(verdicts)


def unit_circle_targets(phis: Iterable[float]) -> np.ndarray:
    phis = np.asarray(list(phis), dtype=float)
    return np.column_stack([np.cos(phis), np.sin(phis)])


def cost_sweep(sys: LtiSystem, phis: Sequence[float], T: float = 1.0, pattern=None,
               x0=None) -> np.ndarray:
    """Optimal cost from ``x0`` (origin by default) to each unit-circle point.

    One Gramian serves every target, so only the right-hand side changes.
    """
    if sys.n != 2:
        raise DimensionError("unit-circle sweeps need a planar system")
    G = gramian(sys, T, pattern)
    if not G.condition < PLAN_COND_MAX:
        raise NotControllableError(f"Gramian under {G.pattern} is singular", str(G.pattern))
    x0 = np.zeros(2) if x0 is None else np.asarray(x0, dtype=float)
    Z = unit_circle_targets(phis) - (mat_exp(sys.A, T) @ x0)[None, :]
    lam = np.linalg.solve(G.W, Z.T)
    return np.einsum("ij,ji->i", Z, lam)


def example_channel_systems() -> dict[int, LtiSystem]:
    """Double integrator driven through one, two and three nested channels."""
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    return {
        1: LtiSystem(A, np.array([[0.0], [1.0]])),
        2: LtiSystem(A, np.array([[0.0, 1.0], [1.0, 0.0]])),
        3: LtiSystem(A, np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 1.0]])),
    }
