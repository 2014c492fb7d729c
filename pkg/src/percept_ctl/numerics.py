"""Dense linear algebra, matrix functions, ODE integration and quadrature.

Everything here works on small dense ``numpy`` arrays (the systems in this
package are 2x2 or 3x3).  The routines are deliberately simple and
self-checking; they are the kernel the other modules build on.

Functions
---------
mat_exp         : e^{At} by scaling-and-squaring of a truncated Taylor series
char_poly       : monic characteristic polynomial (Faddeev-LeVerrier)
eig_small       : all eigenvalues of an n <= 4 matrix
is_hurwitz      : every eigenvalue strictly in the open left half plane
integrate_ode   : fixed-step classical RK4
quad_simpson    : composite Simpson rule for scalar or array integrands
solve_linear    : partial-pivot LU solve with a singularity check
min_norm_solve  : A^T (A A^T)^{-1} B for wide, full-row-rank A
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import (
    DimensionError,
    DivergenceError,
    ParameterError,
    RankError,
    SingularMatrixError,
    UnsupportedSizeError,
)

HURWITZ_MARGIN = 1e-12


@dataclass
class OdeTrajectory:
    """Sampled solution of an ODE.

    ``states[i]`` is the state at ``times[i]``.  ``controls`` is optional and,
    when present, holds the input applied at each sample.  ``meta`` carries a
    free-form description (status flags, parameters, diagnostics).
    """

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim == 1:
            self.states = self.states[:, None]
        if len(self.times) != len(self.states):
            raise DimensionError("times and states differ in length")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ParameterError("trajectory times must be strictly increasing")
        if self.controls is not None:
            self.controls = np.asarray(self.controls, dtype=float)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def t_final(self) -> float:
        return float(self.times[-1])

    def __len__(self):
        return len(self.times)


def as_matrix(A, name="matrix") -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2:
        raise DimensionError(f"{name} must be two-dimensional")
    if not np.all(np.isfinite(A)):
        raise ParameterError(f"{name} has non-finite entries")
    return A


def _square(A, name="matrix") -> np.ndarray:
    A = as_matrix(A, name)
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")
    return A


def mat_exp(A, t: float = 1.0) -> np.ndarray:
    """Matrix exponential e^{At}.

    The argument is scaled by 2^-s until its 1-norm is at most 1/2, the
    Taylor series is summed to machine precision and the result is squared
    s times.
    """
    A = _square(A)
    n = A.shape[0]
    M = A * float(t)
    norm = np.abs(M).sum(axis=0).max() if n else 0.0
    s = 0
    if norm > 0.5:
        s = int(math.ceil(math.log2(norm / 0.5)))
        M = M / (2.0 ** s)
    E = np.eye(n)
    term = np.eye(n)
    for j in range(1, 40):
        term = term @ M / j
        E = E + term
        if np.abs(term).max() <= 1e-18 * np.abs(E).max():
            break
    for _ in range(s):
        E = E @ E
    return E


def char_poly(A) -> np.ndarray:
    """Monic characteristic polynomial coefficients, highest power first."""
    A = _square(A)
    n = A.shape[0]
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    M = np.zeros_like(A)
    I = np.eye(n)
    for k in range(1, n + 1):
        M = A @ M + coeffs[k - 1] * I
        coeffs[k] = -np.trace(A @ M) / k
    return coeffs


def _quadratic_roots(b: float, c: float) -> list[complex]:
    # roots of s^2 + b s + c
    half = -0.5 * b
    disc = half * half - c
    if disc >= 0.0:
        r = math.sqrt(disc)
        big = half + math.copysign(r, half) if half != 0.0 else r
        if big == 0.0:
            return [complex(0.0), complex(0.0)]
        return [complex(big), complex(c / big)]
    r = math.sqrt(-disc)
    return [complex(half, r), complex(half, -r)]


def _durand_kerner(coeffs: np.ndarray, iters: int = 500) -> np.ndarray:
    n = len(coeffs) - 1
    scale = 1.0 + np.abs(coeffs[1:]).max()
    z = scale * (0.4 + 0.9j) ** np.arange(n)
    for _ in range(iters):
        z_old = z.copy()
        for i in range(n):
            denom = np.prod([z[i] - z[j] for j in range(n) if j != i])
            if denom == 0:
                denom = 1e-300
            z[i] = z[i] - np.polyval(coeffs, z[i]) / denom
        if np.abs(z - z_old).max() <= 1e-15 * scale:
            break
    dcoeffs = np.polyder(coeffs)
    for i in range(n):
        # Newton polish; stops once it no longer helps (multiple roots)
        for _ in range(50):
            p = np.polyval(coeffs, z[i])
            dp = np.polyval(dcoeffs, z[i])
            if dp == 0:
                break
            cand = z[i] - p / dp
            if abs(np.polyval(coeffs, cand)) >= abs(p):
                break
            z[i] = cand
    for i in range(n):
        if z[i].imag != 0.0 and abs(z[i].imag) < 1e-7 * (1.0 + abs(z[i])):
            real = complex(z[i].real)
            if abs(np.polyval(coeffs, real)) <= abs(np.polyval(coeffs, z[i])):
                z[i] = real
    return z


def eig_small(A) -> list[complex]:
    """Eigenvalues of a real square matrix of size at most 4.

    1x1 and 2x2 matrices use closed forms; 3x3 and 4x4 run a Durand-Kerner
    iteration on the characteristic polynomial followed by Newton polishing.
    The result is sorted by (real part, imaginary part).
    """
    A = _square(A)
    n = A.shape[0]
    if n == 0 or n > 4:
        raise UnsupportedSizeError(f"eig_small supports 1 <= n <= 4, got n={n}")
    if n == 1:
        roots = [complex(A[0, 0])]
    elif n == 2:
        tr = A[0, 0] + A[1, 1]
        det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
        roots = _quadratic_roots(-tr, det)
    else:
        roots = list(_durand_kerner(char_poly(A)))
        # enforce exact conjugate symmetry for the complex roots
        cplx = sorted((r for r in roots if r.imag > 0), key=lambda r: (r.real, r.imag))
        real = [complex(r.real) for r in roots if r.imag == 0]
        lower = [r for r in roots if r.imag < 0]
        if len(cplx) == len(lower):
            roots = real + cplx + [r.conjugate() for r in cplx]
    return sorted((complex(r) for r in roots), key=lambda r: (r.real, r.imag))


def is_hurwitz(A, margin: float = HURWITZ_MARGIN) -> bool:
    return all(lam.real < -margin for lam in eig_small(A))


def integrate_ode(
    f: Callable[[float, np.ndarray], np.ndarray],
    x0,
    t0: float,
    t1: float,
    dt: float = 1e-3,
    meta: dict | None = None,
) -> OdeTrajectory:
    """Integrate ``x' = f(t, x)`` with fixed-step classical RK4.

    The last step is shortened so the trajectory ends exactly at ``t1``.
    """
    if dt <= 0:
        raise ParameterError("dt must be positive")
    if t1 <= t0:
        raise ParameterError("t1 must exceed t0")
    x = np.array(x0, dtype=float).ravel()
    n_full = int(math.floor((t1 - t0) / dt + 1e-9))
    times = [t0 + i * dt for i in range(n_full + 1)]
    if t1 - times[-1] > 1e-12 * max(1.0, abs(t1)):
        times.append(t1)
    else:
        times[-1] = t1
    times = np.array(times)
    states = np.empty((len(times), x.size))
    states[0] = x
    for i in range(len(times) - 1):
        t, h = times[i], times[i + 1] - times[i]
        k1 = f(t, x)
        k2 = f(t + 0.5 * h, x + 0.5 * h * k1)
        k3 = f(t + 0.5 * h, x + 0.5 * h * k2)
        k4 = f(t + h, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise DivergenceError("non-finite state during RK4 integration", t)
        states[i + 1] = x
    return OdeTrajectory(times, states, meta=dict(meta or {}))


def quad_simpson(g: Callable[[float], np.ndarray | float], a: float, b: float, n_panels: int = 512):
    """Composite Simpson rule; ``g`` may return a scalar or an array."""
    if n_panels <= 0 or n_panels % 2:
        raise ParameterError(f"n_panels must be a positive even number, got {n_panels}")
    if b <= a:
        raise ParameterError("quadrature needs b > a")
    h = (b - a) / n_panels
    total = g(a) + g(b)
    odd = sum(g(a + i * h) for i in range(1, n_panels, 2))
    even = sum(g(a + i * h) for i in range(2, n_panels, 2))
    return (h / 3.0) * (total + 4.0 * odd + 2.0 * even)


def solve_linear(A, b) -> np.ndarray:
    """Solve ``A x = b`` by LU with partial pivoting.

    ``b`` may be a vector or a matrix of right-hand sides.
    """
    A = _square(A)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != A.shape[0]:
        raise DimensionError(f"right-hand side has {b.shape[0]} rows, expected {A.shape[0]}")
    with warnings.catch_warnings():
        # singularity is reported below with the pivot size
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=True)
    pivots = np.abs(np.diag(lu))
    scale = max(1.0, np.abs(A).max())
    smallest = float(pivots.min())
    if smallest <= A.shape[0] * np.finfo(float).eps * scale:
        raise SingularMatrixError("matrix is singular to working precision", smallest)
    return scipy.linalg.lu_solve((lu, piv), b)


def matrix_rank(A, rtol: float = 1e-10) -> int:
    A = as_matrix(A)
    if A.size == 0:
        return 0
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


def min_norm_solve(A, B_rhs) -> np.ndarray:
    """Minimum-norm solution ``X = A^T (A A^T)^{-1} B_rhs`` of ``A X = B_rhs``."""
    A = as_matrix(A)
    B_rhs = np.asarray(B_rhs, dtype=float)
    rows = A.shape[0]
    if matrix_rank(A) < rows:
        sv = np.linalg.svd(A, compute_uv=False)
        raise RankError(f"matrix of shape {A.shape} is not of full row rank", float(sv[-1]))
    return A.T @ solve_linear(A @ A.T, B_rhs)
