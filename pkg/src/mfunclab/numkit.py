"""Numeric substrate: small dense complex linear algebra, Simpson
quadrature on [0,1], and adaptive complex-valued initial-value
integration.

The matrices handled here are tiny (boundary matrices, d <= 8), so the
LU routines are written directly: this gives exact control over the
pivot threshold, which is how near-spectral parameters are detected
downstream.  The initial-value integrator delegates to scipy's embedded
Runge-Kutta 5(4) pair, which supports complex-valued states and dense
output natively.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import GridMismatch, SingularMatrix, StepUnderflow

# Default tolerances: two digits of headroom above the 1e-8 thresholds
# used by the verification layers.
TOL_LINEAR = 1e-12
ODE_TOL = 1e-10
PIVOT_EPS = 1e-13

DEFAULT_GRID_N = 4001


def cmat(entries) -> np.ndarray:
    """Validate and return a complex 2-D matrix.

    Accepts anything array-like; rejects non-2-D shapes and non-finite
    entries (NaN/Inf poison every downstream solve silently, so they are
    refused at construction).
    """
    a = np.asarray(entries, dtype=complex)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    if a.size and not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


def cvec(entries) -> np.ndarray:
    """Validate and return a complex 1-D vector."""
    v = np.asarray(entries, dtype=complex)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    if v.size and not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    return v


def inf_norm(a: np.ndarray) -> float:
    """Row-sum norm for matrices, max-abs for vectors; 0 for empty."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    if a.ndim == 1:
        return float(np.max(np.abs(a)))
    return float(np.max(np.sum(np.abs(a), axis=1)))


def _lu_factor(a: np.ndarray, pivot_eps: float):
    """Partial-pivot LU of a square complex matrix.

    Returns (lu, perm, sign, smallest_pivot).  The factorization is not
    aborted on a small pivot; callers decide whether that is an error
    (solve) or a zero determinant (det).
    """
    lu = np.array(a, dtype=complex)
    n = lu.shape[0]
    perm = np.arange(n)
    sign = 1.0 + 0.0j
    smallest = np.inf
    for k in range(n):
        piv = k + int(np.argmax(np.abs(lu[k:, k])))
        if piv != k:
            lu[[k, piv]] = lu[[piv, k]]
            perm[[k, piv]] = perm[[piv, k]]
            sign = -sign
        p = lu[k, k]
        smallest = min(smallest, abs(p))
        if abs(p) == 0.0:
            continue
        fac = lu[k + 1:, k] / p
        lu[k + 1:, k] = fac
        lu[k + 1:, k + 1:] -= np.outer(fac, lu[k, k + 1:])
    return lu, perm, sign, smallest


def solve_linear(a, b, *, pivot_eps: float = PIVOT_EPS) -> np.ndarray:
    """Solve A x = b for a small square complex system.

    b may be a vector or a matrix of stacked right-hand sides.  Raises
    SingularMatrix when elimination meets a pivot below
    pivot_eps * ||A||_inf; for boundary matrices this is the signature of
    a spectral point or degenerate realization.
    """
    a = cmat(a)
    n, m = a.shape
    if n != m:
        raise ValueError("solve_linear requires a square matrix")
    b = np.asarray(b, dtype=complex)
    vector_rhs = b.ndim == 1
    rhs = b.reshape(n, -1) if vector_rhs else b
    if rhs.shape[0] != n:
        raise ValueError("right-hand side size does not match matrix")
    if n == 0:
        return np.zeros_like(b)

    lu, perm, _, smallest = _lu_factor(a, pivot_eps)
    scale = max(inf_norm(a), 1.0)
    if smallest < pivot_eps * scale:
        raise SingularMatrix(
            f"pivot {smallest:.3e} below {pivot_eps:.1e} * ||A||_inf = "
            f"{pivot_eps * scale:.3e}")

    x = np.array(rhs[perm], dtype=complex)
    for k in range(n):                      # forward, unit lower triangle
        x[k + 1:] -= np.outer(lu[k + 1:, k], x[k])
    for k in range(n - 1, -1, -1):          # backward
        x[k] -= lu[k, k + 1:] @ x[k + 1:]
        x[k] /= lu[k, k]
    return x[:, 0] if vector_rhs else x


def det(a, *, pivot_eps: float = PIVOT_EPS) -> complex:
    """Determinant by sign-tracked pivoted elimination.

    Returns 0 for matrices that are singular at the pivot threshold
    (never raises); the 0x0 determinant is 1 by the empty-product
    convention.
    """
    a = cmat(a)
    n, m = a.shape
    if n != m:
        raise ValueError("det requires a square matrix")
    if n == 0:
        return 1.0 + 0.0j
    lu, _, sign, smallest = _lu_factor(a, pivot_eps)
    scale = max(inf_norm(a), 1.0)
    if smallest < pivot_eps * scale:
        return 0.0 + 0.0j
    return complex(sign * np.prod(np.diag(lu)))


def inverse(a, *, pivot_eps: float = PIVOT_EPS) -> np.ndarray:
    """Inverse of a small square matrix via solve_linear on the identity."""
    a = cmat(a)
    return solve_linear(a, np.eye(a.shape[0], dtype=complex),
                        pivot_eps=pivot_eps)


@dataclass(frozen=True)
class IvpResult:
    """Trajectory of integrate_ivp sampled at the requested abscissae."""
    ts: np.ndarray          # shape (k,)
    ys: np.ndarray          # shape (m, k), one column per abscissa
    nfev: int


def integrate_ivp(rhs, y0, span, tol: float = ODE_TOL,
                  t_eval=None) -> IvpResult:
    """Adaptive embedded Runge-Kutta 5(4) integration of y' = rhs(t, y)
    for a complex state vector, with dense output at requested abscissae.

    rhs maps (t, y) -> dy/dt with y a complex ndarray.  The per-step
    error is controlled to tol (used as both relative and absolute
    target).  Raises StepUnderflow when the controller cannot proceed,
    which for the kernel systems means the spectral parameter came too
    close to a coefficient singularity.
    """
    y0 = np.asarray(y0, dtype=complex)
    sol = solve_ivp(rhs, tuple(span), y0, method="RK45",
                    rtol=tol, atol=tol, t_eval=t_eval, dense_output=False)
    if not sol.success:
        raise StepUnderflow(f"integration stalled: {sol.message}")
    return IvpResult(ts=sol.t, ys=sol.y, nfev=int(sol.nfev))


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [0,1] with an odd number of points.

    Oddness keeps the composite Simpson rule applicable, which is what
    quad_inner uses; n = 4001 keeps both the O(h^4) quadrature error and
    the O(h^2) boundary-value-solver error below 1e-6 for smooth data.
    """
    n: int = DEFAULT_GRID_N
    points: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 3 or self.n % 2 == 0:
            raise ValueError("grid size must be odd and >= 3")
        object.__setattr__(self, "points", np.linspace(0.0, 1.0, self.n))

    @property
    def h(self) -> float:
        return 1.0 / (self.n - 1)

    def simpson_weights(self) -> np.ndarray:
        w = np.full(self.n, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        return w * (self.h / 3.0)


@dataclass(frozen=True)
class GridFunction:
    """C^2-valued function sampled on a grid (discrete L^2(0,1)^2 element).

    values has shape (n, 2).  u1_prime_ends optionally carries the exact
    endpoint derivatives (u1'(0), u1'(1)) of the first component when the
    producer knows them (kernel solutions, boundary-value solves); trace
    maps fall back to one-sided differences otherwise.
    """
    grid: Grid
    values: np.ndarray
    u1_prime_ends: tuple | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.n, 2):
            raise ValueError(
                f"values shape {v.shape} does not match grid ({self.grid.n}, 2)")
        object.__setattr__(self, "values", v)

    @property
    def u1(self) -> np.ndarray:
        return self.values[:, 0]

    @property
    def u2(self) -> np.ndarray:
        return self.values[:, 1]

    def u1_prime_at_ends(self) -> tuple:
        """(u1'(0), u1'(1)); exact when supplied, else second-order
        one-sided differences."""
        if self.u1_prime_ends is not None:
            return self.u1_prime_ends
        u, h = self.u1, self.grid.h
        d0 = (-1.5 * u[0] + 2.0 * u[1] - 0.5 * u[2]) / h
        d1 = (1.5 * u[-1] - 2.0 * u[-2] + 0.5 * u[-3]) / h
        return (d0, d1)

    def norm_l2(self) -> float:
        return float(np.sqrt(abs(quad_inner(self, self))))


def zero_grid_function(grid: Grid) -> GridFunction:
    return GridFunction(grid, np.zeros((grid.n, 2), dtype=complex),
                        u1_prime_ends=(0.0 + 0.0j, 0.0 + 0.0j))


def grid_function_from_callables(grid: Grid, f1, f2=None) -> GridFunction:
    x = grid.points
    v = np.empty((grid.n, 2), dtype=complex)
    v[:, 0] = f1(x)
    v[:, 1] = 0.0 if f2 is None else f2(x)
    return GridFunction(grid, v)


def quad_inner(f: GridFunction, g: GridFunction) -> complex:
    """Discrete L^2(0,1)^2 pairing int_0^1 <f(x), g(x)>_{C^2} dx with
    conjugation on the second slot, by the composite Simpson rule
    (O(h^4) for smooth data)."""
    if f.grid.n != g.grid.n:
        raise GridMismatch(
            f"grids of size {f.grid.n} and {g.grid.n} cannot be paired")
    w = f.grid.simpson_weights()
    pointwise = np.sum(f.values * np.conj(g.values), axis=1)
    return complex(np.sum(w * pointwise))
