"""Concrete backend: the 2x2 coupled system on [0,1]

    (A u)_1 = -u1'' + a(x) u2',      (A u)_2 = b(x) u1' + c(x) u2,

acting on pairs u = (u1, u2), with boundary maps

    gamma0 u = (u1(1), u1(0)),
    gamma1 u = (-u1'(1) + a(1) u2(1),  u1'(0) - a(0) u2(0)).

Eliminating u2 = b u1' / (lambda - c) turns the homogeneous equation
(A - lambda) u = 0 into the scalar equation

    -u1'' + a (b u1' / (lambda - c))' - lambda u1 = 0,

which an integrating factor puts in self-adjoint form:

    Q = a (b/(lambda-c))' / (-1 + ab/(lambda-c)),
    alpha = exp(int_0^x Q),   beta = alpha / (-1 + ab/(lambda-c)),
    (alpha u1')' = lambda beta u1.

The kernel is two dimensional, spanned by the solutions y1, y2 with
y1(0)=1, y1'(0)=0, y2(0)=0, y2'(0)=1.  Both are integrated here as a
first-order system in the quasi-derivative p = alpha u1' (augmented
with the running integral of Q), which keeps the modified Abel
invariant alpha (y1 y2' - y2 y1') exactly constant in exact arithmetic.

The essential spectrum of every realization is the curve traced by
(ab + c)(x): there the determinant of the principal symbol degenerates.
Spectral parameters must stay outside an exclusion tube around this
curve and around the multiplier curve c(x) (where the elimination of u2
breaks down).

The module also carries the closed-form M-matrix of the Neumann-type
realization, a finite-difference two-point solver used as the
convention-free resolvent oracle, and the twin construction: when b
vanishes identically on an interval, bumping c inside that interval
moves the essential spectrum while every quantity entering the
M-matrix — b/(lambda-c) and its derivative — is unchanged pointwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.interpolate
import scipy.sparse
import scipy.sparse.linalg

from .coeffs import AddedBumpCoeff, Coefficients
from .errors import (BracketSingular, CoefficientSingularity,
                     HypothesisViolated, NeumannEigenvalue, SpectralPoint)
from .numkit import (DEFAULT_GRID_N, ODE_TOL, Grid, GridFunction, cvec,
                     integrate_ivp, solve_linear)
from .triplet import (DirichletSpectrum, MatrixRealization, Realization,
                      SingularMatrix, SubspaceRealization,
                      dirichlet_realization)

DEN_EPS = 1e-10     # below this, the elimination denominators are meaningless
TUBE_EPS = 0.05     # exclusion distance from both spectral curves
NEU_EPS = 1e-8      # relative threshold flagging y1'(1) = 0


def _eval6(coeffs: Coefficients, x):
    """(a, a', b, b', c, c') at x."""
    return (coeffs.a.value(x), coeffs.a.deriv(x),
            coeffs.b.value(x), coeffs.b.deriv(x),
            coeffs.c.value(x), coeffs.c.deriv(x))


def _denominator_guard(coeffs: Coefficients, lam: complex, xs: np.ndarray,
                       den_eps: float) -> None:
    a, _, b, _, c, _ = _eval6(coeffs, xs)
    dlc = lam - np.asarray(c, dtype=complex)
    if np.min(np.abs(dlc)) < den_eps:
        raise CoefficientSingularity(
            f"lambda - c vanishes on [0,1] for lambda={lam}")
    bracket = np.asarray(a, dtype=complex) * np.asarray(b, dtype=complex) / dlc - 1.0
    if np.min(np.abs(bracket)) < den_eps:
        raise CoefficientSingularity(
            f"coupling bracket ab/(lambda-c) - 1 vanishes for lambda={lam}")


def q_alpha_beta(coeffs: Coefficients, lam: complex, x: float,
                 den_eps: float = DEN_EPS):
    """(Q, alpha, beta) at x:

        Q     = a (b/(lambda-c))' / (-1 + ab/(lambda-c)),
        alpha = exp(int_0^x Q ds)      (adaptive quadrature),
        beta  = alpha / (-1 + ab/(lambda-c)).

    Raises CoefficientSingularity when either denominator falls below
    den_eps anywhere on [0, x] (sampled) or at x itself.
    """
    x = float(x)
    guard_pts = np.linspace(0.0, x, 65) if x > 0 else np.array([0.0])
    _denominator_guard(coeffs, lam, guard_pts, den_eps)

    def q_at(s: float) -> complex:
        a, _, b, bp, c, cp = _eval6(coeffs, s)
        dlc = lam - c
        m = b / dlc
        mp = (bp * dlc + b * cp) / (dlc * dlc)
        return a * mp / (a * m - 1.0)

    if x == 0.0:
        integral = 0.0 + 0.0j
    else:
        re, _ = scipy.integrate.quad(lambda s: q_at(s).real, 0.0, x,
                                     epsabs=1e-12, epsrel=1e-12, limit=200)
        im, _ = scipy.integrate.quad(lambda s: q_at(s).imag, 0.0, x,
                                     epsabs=1e-12, epsrel=1e-12, limit=200)
        integral = complex(re, im)
    a, _, b, bp, c, cp = _eval6(coeffs, x)
    dlc = lam - c
    bracket = a * b / dlc - 1.0
    alpha = np.exp(integral)
    return q_at(x), alpha, alpha / bracket


# ---------------------------------------------------------------------------
# Kernel solutions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelPair:
    """Both kernel basis solutions of the scalar first-component equation
    at one spectral parameter, sampled at x (always containing 0 and 1),
    with first derivatives, the integrating factor alpha, and the
    gamma-trace matrices of the full C^2-valued kernel elements
    (columns: traces of basis element 1, basis element 2)."""
    lam: complex
    x: np.ndarray
    y1: np.ndarray
    y1p: np.ndarray
    y2: np.ndarray
    y2p: np.ndarray
    alpha: np.ndarray
    g0: np.ndarray      # 2x2: gamma0 traces as columns
    g1: np.ndarray      # 2x2: gamma1 traces as columns
    kappa0: complex     # 1 - ab/(lambda-c) at x=0
    kappa1: complex     # ab/(lambda-c) - 1 at x=1

    def at_one(self):
        """(y1(1), y1'(1), y2(1), y2'(1))."""
        return self.y1[-1], self.y1p[-1], self.y2[-1], self.y2p[-1]


def _kernel_rhs(coeffs: Coefficients, lam: complex, den_eps: float):
    """State s = (y1, p1, y2, p2, ell) with p = alpha y', ell = int Q:

        y'  = p exp(-ell),
        p'  = lambda (exp(ell)/bracket) y,
        ell' = a m' / bracket,        m = b/(lambda-c), bracket = am - 1.
    """
    av = coeffs.a.value
    bv, bd = coeffs.b.value, coeffs.b.deriv
    cv, cd = coeffs.c.value, coeffs.c.deriv

    def rhs(x, s):
        a = av(x)
        b = bv(x)
        c = cv(x)
        dlc = lam - c
        if abs(dlc) < den_eps:
            raise CoefficientSingularity(
                f"lambda - c vanished at x={x} during integration")
        m = b / dlc
        bracket = a * m - 1.0
        if abs(bracket) < den_eps:
            raise CoefficientSingularity(
                f"coupling bracket vanished at x={x} during integration")
        mp = (bd(x) * dlc + b * cd(x)) / (dlc * dlc)
        q = a * mp / bracket
        em = np.exp(-s[4])
        lam_beta = lam * np.exp(s[4]) / bracket
        return np.array([s[1] * em, lam_beta * s[0],
                         s[3] * em, lam_beta * s[2], q])

    return rhs


def kernel_pair(coeffs: Coefficients, lam: complex, tol: float = ODE_TOL,
                x_eval=None, den_eps: float = DEN_EPS) -> KernelPair:
    """Integrate both kernel basis solutions across [0,1].

    x_eval: extra abscissae at which the trajectory is requested (dense
    output of the embedded pair); endpoints are always included.
    """
    lam = complex(lam)
    _denominator_guard(coeffs, lam, np.linspace(0.0, 1.0, 65), den_eps)
    if x_eval is None:
        ts = np.array([0.0, 1.0])
    else:
        ts = np.unique(np.concatenate([np.asarray(x_eval, dtype=float),
                                       [0.0, 1.0]]))
    y0 = np.array([1.0, 0.0, 0.0, 1.0, 0.0], dtype=complex)
    res = integrate_ivp(_kernel_rhs(coeffs, lam, den_eps), y0,
                        (0.0, 1.0), tol=tol, t_eval=ts)
    y1, p1, y2, p2, ell = res.ys
    alpha = np.exp(ell)
    inv_alpha = np.exp(-ell)
    y1p = p1 * inv_alpha
    y2p = p2 * inv_alpha

    a0, _, b0, _, c0, _ = _eval6(coeffs, 0.0)
    a1, _, b1, _, c1, _ = _eval6(coeffs, 1.0)
    kappa0 = 1.0 - a0 * b0 / (lam - c0)
    kappa1 = a1 * b1 / (lam - c1) - 1.0

    # gamma0 = (u1(1), u1(0)); gamma1 expressed through the kernel
    # relation u2 = b u1'/(lambda-c):
    #   -u1'(1) + a(1) u2(1) = kappa1 u1'(1),
    #    u1'(0) - a(0) u2(0) = kappa0 u1'(0).
    g0 = np.array([[y1[-1], y2[-1]], [1.0, 0.0]], dtype=complex)
    g1 = np.array([[kappa1 * y1p[-1], kappa1 * y2p[-1]],
                   [0.0, kappa0]], dtype=complex)
    return KernelPair(lam=lam, x=res.ts, y1=y1, y1p=y1p, y2=y2, y2p=y2p,
                      alpha=alpha, g0=g0, g1=g1,
                      kappa0=complex(kappa0), kappa1=complex(kappa1))


def kernel_grid_functions(coeffs: Coefficients, kp: KernelPair,
                          grid: Grid) -> list[GridFunction]:
    """The two C^2-valued kernel elements on the grid; requires the
    KernelPair to have been sampled at the grid points."""
    if kp.x.shape != grid.points.shape or not np.allclose(kp.x, grid.points):
        raise ValueError("kernel pair was not sampled on this grid")
    _, _, b, _, c, _ = _eval6(coeffs, grid.points)
    m = np.asarray(b, dtype=complex) / (kp.lam - np.asarray(c, dtype=complex))
    out = []
    for y, yp in ((kp.y1, kp.y1p), (kp.y2, kp.y2p)):
        vals = np.column_stack([y, m * yp])
        out.append(GridFunction(grid, vals, u1_prime_ends=(yp[0], yp[-1])))
    return out


# ---------------------------------------------------------------------------
# Boundary traces of endpoint jets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EndpointJet:
    """Value/derivative data of the first component at both endpoints,
    optionally with the second component's endpoint values."""
    u1_at_0: complex
    u1p_at_0: complex
    u1_at_1: complex
    u1p_at_1: complex
    u2_at_0: complex | None = None
    u2_at_1: complex | None = None


def gamma_traces(coeffs: Coefficients, jet: EndpointJet, lam: complex,
                 den_eps: float = DEN_EPS):
    """(gamma0, gamma1) of an endpoint jet.

    Missing second-component endpoint values are recovered through the
    kernel relation u2 = b u1' / (lambda - c); that recovery fails
    (CoefficientSingularity) when lambda - c vanishes at the endpoint.
    """
    a0, _, b0, _, c0, _ = _eval6(coeffs, 0.0)
    a1, _, b1, _, c1, _ = _eval6(coeffs, 1.0)
    u2_0, u2_1 = jet.u2_at_0, jet.u2_at_1
    if u2_0 is None or u2_1 is None:
        for cend, name in ((c0, "x=0"), (c1, "x=1")):
            if abs(lam - cend) < den_eps:
                raise CoefficientSingularity(
                    f"cannot recover u2 at {name}: lambda - c vanishes")
        if u2_0 is None:
            u2_0 = b0 * jet.u1p_at_0 / (lam - c0)
        if u2_1 is None:
            u2_1 = b1 * jet.u1p_at_1 / (lam - c1)
    g0 = np.array([jet.u1_at_1, jet.u1_at_0], dtype=complex)
    g1 = np.array([-jet.u1p_at_1 + a1 * u2_1,
                   jet.u1p_at_0 - a0 * u2_0], dtype=complex)
    return g0, g1


# ---------------------------------------------------------------------------
# Closed-form M-matrix of the Neumann-type realization
# ---------------------------------------------------------------------------

def mfn_closed_form(coeffs: Coefficients, lam: complex, tol: float = ODE_TOL,
                    den_eps: float = DEN_EPS) -> np.ndarray:
    """The four closed-form entries

        m11 = y1(1) / ([ab/(lambda-c) - 1](1) y1'(1)),
        m12 = 1     / ([1 - ab/(lambda-c)](0) y1'(1)),
        m21 = 1     / ([ab/(lambda-c) - 1](1) y1'(1)),
        m22 = y2'(1)/ ([1 - ab/(lambda-c)](0) y1'(1)),

    evaluated from the integrated kernel pair.  y1'(1) = 0 means y1 is a
    Neumann-type eigenfunction and lambda an eigenvalue of that
    realization (NeumannEigenvalue); vanishing endpoint brackets raise
    BracketSingular.

    The m11/m21 entries agree with the boundary-matrix inversion route
    (gamma0 after gamma1-inverse on the kernel); m12/m22 differ from it
    by sign (and m12 by the end value of the modified Wronskian) — see
    closed_form_comparison, which reports the discrepancy rather than
    silently adopting either convention.
    """
    kp = kernel_pair(coeffs, lam, tol=tol, den_eps=den_eps)
    y1_1, y1p_1, _, y2p_1 = kp.at_one()
    scale = max(abs(y1_1), abs(y2p_1), 1.0)
    if abs(y1p_1) < NEU_EPS * scale:
        raise NeumannEigenvalue(
            f"y1'(1) = {y1p_1:.3e}: lambda={lam} is a Neumann-type "
            f"eigenvalue")
    if abs(kp.kappa1) < den_eps or abs(kp.kappa0) < den_eps:
        raise BracketSingular(
            f"endpoint bracket vanishes at lambda={lam}")
    br1 = kp.kappa1          # ab/(lambda-c) - 1 at x=1
    br0 = kp.kappa0          # 1 - ab/(lambda-c) at x=0
    return np.array([[y1_1 / (br1 * y1p_1), 1.0 / (br0 * y1p_1)],
                     [1.0 / (br1 * y1p_1), y2p_1 / (br0 * y1p_1)]],
                    dtype=complex)


def closed_form_comparison(coeffs: Coefficients, lam: complex,
                           grid: Grid | None = None,
                           tol: float = ODE_TOL) -> dict:
    """Compare the closed-form entries against the boundary-matrix
    oracle M = (P - 0)^{-1} and report the discrepancy structure:
    m11/m21 agree; the oracle's m12 equals -(closed m12) times the end
    value of the Wronskian y1 y2' - y2 y1' (which is 1/alpha(1) by the
    modified Abel identity), and the oracle's m22 equals -(closed m22).
    """
    from .triplet import mfunction, neumann_realization

    backend = OdeBackend(coeffs, grid=grid or Grid(), ode_tol=tol)
    oracle = mfunction(backend, neumann_realization(), lam).M
    closed = mfn_closed_form(coeffs, lam, tol=tol)
    kp = kernel_pair(coeffs, lam, tol=tol)
    y1_1, y1p_1, y2_1, y2p_1 = kp.at_one()
    wronskian_end = y1_1 * y2p_1 - y2_1 * y1p_1
    return {
        "lambda": lam,
        "closed_form": closed,
        "oracle": oracle,
        "m11_abs_diff": abs(closed[0, 0] - oracle[0, 0]),
        "m21_abs_diff": abs(closed[1, 0] - oracle[1, 0]),
        "m12_expected_factor": -wronskian_end,
        "m12_factor_diff": abs(oracle[0, 1] - (-wronskian_end) * closed[0, 1]),
        "m22_factor_diff": abs(oracle[1, 1] + closed[1, 1]),
        "wronskian_end": wronskian_end,
        "alpha_end": complex(kp.alpha[-1]),
    }


# ---------------------------------------------------------------------------
# Essential spectrum curve and twins
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EssSpecCurve:
    """Samples of (ab + c)(x) on a uniform x-grid: the curve where the
    determinant of the principal symbol xi^2 (ab + c - lambda)
    degenerates, i.e. the essential spectrum of every realization."""
    x: np.ndarray
    samples: np.ndarray

    def distance(self, lam: complex) -> float:
        return float(np.min(np.abs(lam - self.samples)))


def ess_spectrum_curve(coeffs: Coefficients, nsamples: int = 512) -> EssSpecCurve:
    if nsamples < 512:
        raise ValueError("essential-spectrum curve needs >= 512 samples")
    x = np.linspace(0.0, 1.0, nsamples)
    a = np.asarray(coeffs.a.value(x), dtype=complex)
    b = np.asarray(coeffs.b.value(x), dtype=complex)
    c = np.asarray(coeffs.c.value(x), dtype=complex)
    vals = a * b + c
    if not np.all(np.isfinite(vals)):
        raise ValueError("essential-spectrum samples are not finite")
    return EssSpecCurve(x=x, samples=vals)


def hausdorff_distance(p: np.ndarray, q: np.ndarray) -> float:
    """Hausdorff distance between two finite point sets in C."""
    p = np.asarray(p, dtype=complex).ravel()
    q = np.asarray(q, dtype=complex).ravel()
    d = np.abs(p[:, None] - q[None, :])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def twin_counterexample(base: Coefficients, interval, bump_height: complex,
                        nsamples: int = 64):
    """(base, twin): the twin keeps a and b, and adds
    bump_height * bump_profile to c inside the interval where b
    vanishes identically.

    Because b = b' = 0 there, b/(lambda - c) and its x-derivative are
    unchanged pointwise, so every M-matrix of base and twin coincides —
    while the essential-spectrum curve picks up the bump.  Violation of
    the b = 0 hypothesis (checked on 64 samples at 1e-14) raises
    HypothesisViolated.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if not (0.0 < lo < hi < 1.0):
        raise ValueError("twin interval must satisfy 0 < lo < hi < 1")
    xs = np.linspace(lo, hi, nsamples)
    bvals = np.abs(np.asarray(base.b.value(xs), dtype=complex))
    if np.max(bvals) >= 1e-14:
        raise HypothesisViolated(
            f"b does not vanish on [{lo}, {hi}]: max |b| = {np.max(bvals):.3e}")
    twin = Coefficients(a=base.a, b=base.b,
                        c=AddedBumpCoeff(base.c, lo, hi, complex(bump_height)))
    return base, twin


# ---------------------------------------------------------------------------
# Direct two-point solver (the resolvent oracle)
# ---------------------------------------------------------------------------

def _interior_coeff_arrays(coeffs: Coefficients, lam: complex, x: np.ndarray,
                           den_eps: float):
    a, ap, b, bp, c, cp = (np.asarray(v, dtype=complex)
                           for v in _eval6(coeffs, x))
    dlc = lam - c
    if np.min(np.abs(dlc)) < den_eps:
        raise CoefficientSingularity("lambda - c vanishes on the grid")
    m = b / dlc
    mp = (bp * dlc + b * cp) / (dlc * dlc)
    lead = a * m - 1.0                     # coefficient of u''
    if np.min(np.abs(lead)) < den_eps:
        raise CoefficientSingularity(
            "ellipticity bracket am - 1 vanishes on the grid "
            "(lambda on the essential-spectrum curve)")
    first = a * mp                          # coefficient of u'
    return a, b, c, cp, dlc, lead, first


def _boundary_rows(coeffs: Coefficients, realization: Realization,
                   lam: complex, f2_ends, n: int, h: float):
    """Rows and right-hand sides of the two boundary equations on an
    n-point grid, using second-order one-sided derivative stencils.

    Returns (rows, rhs): rows is a list of (cols, vals) with grid column
    indices; the x=1-type equation is listed first.
    """
    a0, _, b0, _, c0, _ = _eval6(coeffs, 0.0)
    a1, _, b1, _, c1, _ = _eval6(coeffs, 1.0)
    kappa0 = 1.0 - a0 * b0 / (lam - c0)
    kappa1 = a1 * b1 / (lam - c1) - 1.0
    f2_0, f2_1 = f2_ends
    # gamma1 components of the inhomogeneous problem carry f2 data:
    #   (gamma1 u)_1 = kappa1 u'(1) + a(1) f2(1)/(c(1)-lambda)
    #   (gamma1 u)_2 = kappa0 u'(0) - a(0) f2(0)/(c(0)-lambda)
    g1_shift = np.array([a1 * f2_1 / (c1 - lam), -a0 * f2_0 / (c0 - lam)],
                        dtype=complex)
    dp0 = ([0, 1, 2], np.array([-1.5, 2.0, -0.5]) / h)          # u'(0)
    dp1 = ([n - 1, n - 2, n - 3], np.array([1.5, -2.0, 0.5]) / h)  # u'(1)
    # gamma0 components: index 0 <-> u(1) = u_{n-1}, index 1 <-> u(0) = u_0
    g0_cols = (n - 1, 0)

    rows, rhs = [], []
    if isinstance(realization, MatrixRealization):
        bmat = realization.B
        for comp in (0, 1):
            cols = list(dp1[0] if comp == 0 else dp0[0])
            vals = list((kappa1 if comp == 0 else kappa0)
                        * (dp1[1] if comp == 0 else dp0[1]))
            for j in (0, 1):
                cols.append(g0_cols[j])
                vals.append(-bmat[comp, j])
            rows.append((cols, vals))
            rhs.append(-g1_shift[comp])
        return rows, rhs

    if not isinstance(realization, SubspaceRealization):
        raise TypeError(f"unsupported realization {realization!r}")
    if len(realization.idx_x) != len(realization.idx_y):
        raise ValueError("subspace realization needs equal selector ranks "
                         "for a square boundary system")
    # Dirichlet-type rows: components outside sel_x vanish in gamma0 u.
    for comp in (0, 1):
        if comp not in realization.idx_x:
            rows.append(([g0_cols[comp]], [1.0]))
            rhs.append(0.0)
    # Neumann-type rows on the sel_y components.
    for pos, comp in enumerate(realization.idx_y):
        cols = list(dp1[0] if comp == 0 else dp0[0])
        vals = list((kappa1 if comp == 0 else kappa0)
                    * (dp1[1] if comp == 0 else dp0[1]))
        for kpos, kcomp in enumerate(realization.idx_x):
            cols.append(g0_cols[kcomp])
            vals.append(-realization.L1[pos, kpos])
        rows.append((cols, vals))
        rhs.append(-g1_shift[comp])
    return rows, rhs


def _grid_derivative(u: np.ndarray, h: float) -> np.ndarray:
    """Second-order derivative samples: central interior, one-sided ends."""
    d = np.empty_like(u)
    d[1:-1] = (u[2:] - u[:-2]) / (2.0 * h)
    d[0] = (-1.5 * u[0] + 2.0 * u[1] - 0.5 * u[2]) / h
    d[-1] = (1.5 * u[-1] - 2.0 * u[-2] + 0.5 * u[-3]) / h
    return d


def _solve_scalar_bvp(coeffs: Coefficients, realization: Realization,
                      lam: complex, x: np.ndarray, f1: np.ndarray,
                      f2: np.ndarray, den_eps: float) -> np.ndarray:
    """Second-order central finite differences for the eliminated scalar
    equation

        (am - 1) u'' + a m' u' - lambda u = f1 - a (f2/(c - lambda))',

    with the realization's boundary condition in the first and last rows.
    """
    n = x.size
    h = x[1] - x[0]
    a, b, c, cp, dlc, lead, first = _interior_coeff_arrays(
        coeffs, lam, x, den_eps)

    # (f2/(c - lambda))' with the 1/(c - lambda) part differentiated
    # analytically and f2 differentiated on the grid.
    sp = _grid_derivative(f2, h) / (-dlc) - f2 * cp / dlc ** 2
    g = f1 - a * sp

    rows_i = np.arange(1, n - 1)
    main = -2.0 * lead[1:-1] / h ** 2 - lam
    off = lead[1:-1] / h ** 2
    slope = first[1:-1] / (2.0 * h)

    data = np.concatenate([off - slope, main, off + slope])
    rows = np.concatenate([rows_i, rows_i, rows_i])
    cols = np.concatenate([rows_i - 1, rows_i, rows_i + 1])
    rhs = np.zeros(n, dtype=complex)
    rhs[1:-1] = g[1:-1]

    brows, brhs = _boundary_rows(coeffs, realization, lam,
                                 (f2[0], f2[-1]), n, h)
    extra_rows, extra_cols, extra_data = [], [], []
    for out_row, ((bcols, bvals), bval) in zip((0, n - 1), zip(brows, brhs)):
        extra_rows.extend([out_row] * len(bcols))
        extra_cols.extend(bcols)
        extra_data.extend(bvals)
        rhs[out_row] = bval

    mat = scipy.sparse.coo_matrix(
        (np.concatenate([data, np.asarray(extra_data, dtype=complex)]),
         (np.concatenate([rows, np.asarray(extra_rows)]),
          np.concatenate([cols, np.asarray(extra_cols)]))),
        shape=(n, n)).tocsc()
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.sparse.linalg.MatrixRankWarning)
        try:
            u = scipy.sparse.linalg.spsolve(mat, rhs)
        except scipy.sparse.linalg.MatrixRankWarning as exc:
            raise SpectralPoint(
                f"boundary-value system singular at lambda={lam}") from exc
    if not np.all(np.isfinite(u)):
        raise SpectralPoint(
            f"boundary-value system singular at lambda={lam}")
    return np.asarray(u, dtype=complex)


def direct_resolvent(coeffs: Coefficients, realization: Realization,
                     lam: complex, f: GridFunction,
                     den_eps: float = DEN_EPS, refine: bool = True,
                     return_error: bool = False):
    """Solve (A - lambda) w = f under the realization's boundary
    condition by eliminating the second component,

        u2 = (f2 - b u1') / (c - lambda),

    solving the resulting scalar two-point problem for u1 with central
    finite differences, then recovering u2.  One Richardson refinement
    step (solve again at half the spacing, extrapolate) supplies an
    error estimate and cancels the leading O(h^2) term.

    This path never touches kernel bases, trace matrices or M-matrices:
    it is the convention-free oracle the boundary-triplet route is
    validated against.
    """
    lam = complex(lam)
    grid = f.grid
    x = grid.points
    f1 = f.values[:, 0].copy()
    f2 = f.values[:, 1].copy()

    u_c = _solve_scalar_bvp(coeffs, realization, lam, x, f1, f2, den_eps)
    up_c = _grid_derivative(u_c, grid.h)

    if refine:
        x_f = np.linspace(0.0, 1.0, 2 * grid.n - 1)
        f1_f = scipy.interpolate.CubicSpline(x, f1)(x_f)
        f2_f = scipy.interpolate.CubicSpline(x, f2)(x_f)
        u_f = _solve_scalar_bvp(coeffs, realization, lam, x_f, f1_f, f2_f,
                                den_eps)
        up_f = _grid_derivative(u_f, x_f[1] - x_f[0])
        diff = u_f[::2] - u_c
        err_est = float(np.max(np.abs(diff)) / 3.0)
        u1 = u_f[::2] + diff / 3.0
        u1p = up_f[::2] + (up_f[::2] - up_c) / 3.0
    else:
        err_est = float("nan")
        u1, u1p = u_c, up_c

    _, _, b, _, c, _ = (np.asarray(v, dtype=complex)
                        for v in _eval6(coeffs, x))
    u2 = (f2 - b * u1p) / (c - lam)
    out = GridFunction(grid, np.column_stack([u1, u2]),
                       u1_prime_ends=(u1p[0], u1p[-1]))
    return (out, err_est) if return_error else out


# ---------------------------------------------------------------------------
# The backend object consumed by the triplet engine
# ---------------------------------------------------------------------------

class OdeBackend:
    """Problem backend for the coupled system: kernel bases via the
    adaptive integrator, traces from exact endpoint jets, reference
    resolvent via the direct solver with Dirichlet-type condition
    gamma0 w = 0, and the adjoint kernel through the quasi-derivative
    form of the formal adjoint

        (A' v)_1 = -v1'' - (conj(b) v2)',
        (A' v)_2 = -(conj(a) v1)' + conj(c) v2

    (first-order couplings are skew-adjoint, hence the minus signs; this
    is the unique choice that closes the Green identity
    (Au, v) - (u, A'v) = (gamma1 u, gamma0' v) - (gamma0 u, gamma1' v),
    verified by quadrature in the test suite).  Instances are immutable
    apart from small per-lambda caches; scans rebuild backends per
    worker from the coefficient descriptors.
    """

    defect_dim = 2

    def __init__(self, coeffs: Coefficients, grid: Grid | None = None,
                 ode_tol: float = ODE_TOL, den_eps: float = DEN_EPS,
                 tube_eps: float = TUBE_EPS, ess_samples: int = 512):
        self.coeffs = coeffs
        self.grid = grid if grid is not None else Grid(DEFAULT_GRID_N)
        self.ode_tol = ode_tol
        self.den_eps = den_eps
        self.tube_eps = tube_eps
        self.ess_curve = ess_spectrum_curve(coeffs, ess_samples)
        cx = self.ess_curve.x
        self._multiplier_samples = np.asarray(coeffs.c.value(cx),
                                              dtype=complex)
        self._a_ends = (complex(coeffs.a.value(0.0)),
                        complex(coeffs.a.value(1.0)))
        self._kernel_cache: dict = {}
        self._adjoint_cache: dict = {}

    # -- curves ------------------------------------------------------------

    def ess_distance(self, lam: complex) -> float:
        return self.ess_curve.distance(lam)

    def multiplier_distance(self, lam: complex) -> float:
        return float(np.min(np.abs(lam - self._multiplier_samples)))

    def in_exclusion_tube(self, lam: complex) -> bool:
        return (self.ess_distance(lam) <= self.tube_eps
                or self.multiplier_distance(lam) <= self.tube_eps)

    # -- kernel ------------------------------------------------------------

    def _cached(self, cache: dict, key, build):
        if key not in cache:
            if len(cache) > 8:
                cache.clear()
            cache[key] = build()
        return cache[key]

    def kernel_pair(self, lam: complex) -> KernelPair:
        lam = complex(lam)
        return self._cached(
            self._kernel_cache, lam,
            lambda: kernel_pair(self.coeffs, lam, tol=self.ode_tol,
                                x_eval=self.grid.points,
                                den_eps=self.den_eps))

    def kernel_basis(self, lam: complex) -> list[GridFunction]:
        kp = self.kernel_pair(lam)
        return kernel_grid_functions(self.coeffs, kp, self.grid)

    def kernel_traces(self, lam: complex):
        """(g0, g1) trace matrices without sampling the full grid (used
        by scans, which only need boundary data)."""
        lam = complex(lam)
        kp = kernel_pair(self.coeffs, lam, tol=self.ode_tol,
                         den_eps=self.den_eps)
        return kp.g0, kp.g1

    # -- traces ------------------------------------------------------------

    def gamma0(self, u: GridFunction) -> np.ndarray:
        u1 = u.values[:, 0]
        return np.array([u1[-1], u1[0]], dtype=complex)

    def gamma1(self, u: GridFunction) -> np.ndarray:
        d0, d1 = u.u1_prime_at_ends()
        a0, a1 = self._a_ends
        u2 = u.values[:, 1]
        return np.array([-d1 + a1 * u2[-1], d0 - a0 * u2[0]], dtype=complex)

    # -- solution operators --------------------------------------------------

    def poisson(self, lam: complex, phi) -> GridFunction:
        """Kernel element with gamma0 data phi."""
        phi = cvec(phi)
        basis = self.kernel_basis(lam)
        g0 = np.column_stack([self.gamma0(z) for z in basis])
        try:
            coef = solve_linear(g0, phi)
        except SingularMatrix as exc:
            raise DirichletSpectrum(
                f"gamma0 on the kernel singular at lambda={lam}") from exc
        vals = coef[0] * basis[0].values + coef[1] * basis[1].values
        ends = tuple(coef[0] * e0 + coef[1] * e1
                     for e0, e1 in zip(basis[0].u1_prime_at_ends(),
                                       basis[1].u1_prime_at_ends()))
        return GridFunction(self.grid, vals, u1_prime_ends=ends)

    def reference_resolvent(self, lam: complex, f: GridFunction) -> GridFunction:
        return direct_resolvent(self.coeffs, dirichlet_realization(),
                                lam, f, den_eps=self.den_eps)

    # -- adjoint kernel ------------------------------------------------------

    def _adjoint_rhs(self, lam_bar: complex):
        av, ad = self.coeffs.a.value, self.coeffs.a.deriv
        bv = self.coeffs.b.value
        cv = self.coeffs.c.value
        den_eps = self.den_eps

        def rhs(x, s):
            # Eliminating v2 = -(conj(a) v1)'/(lam_bar - conj(c)) from
            # (A' - lam_bar) v = 0 leaves
            #     -v1'' + (m (p v1)')' - lam_bar v1 = 0,
            # m = conj(b)/(lam_bar - conj(c)), p = conj(a) (the two sign
            # flips of the adjoint couplings cancel).  State
            # s = (v1_a, w_a, v1_b, w_b) with the quasi-derivative
            # w = (1 - mp) v1' - m p' v1, so that w' = -lam_bar v1.
            p = np.conj(av(x))
            pp = np.conj(ad(x))
            dlc = lam_bar - np.conj(cv(x))
            if abs(dlc) < den_eps:
                raise CoefficientSingularity(
                    f"adjoint denominator vanished at x={x}")
            m = np.conj(bv(x)) / dlc
            one_mp = 1.0 - m * p
            if abs(one_mp) < den_eps:
                raise CoefficientSingularity(
                    f"adjoint coupling bracket vanished at x={x}")
            v1a, wa, v1b, wb = s
            da = (wa + m * pp * v1a) / one_mp
            db = (wb + m * pp * v1b) / one_mp
            return np.array([da, -lam_bar * v1a, db, -lam_bar * v1b])

        return rhs

    def adjoint_kernel_basis(self, lam_bar: complex) -> list[GridFunction]:
        """Basis of the adjoint kernel at the conjugated parameter,
        normalized so the gamma0 traces (v1(1), v1(0)) form the identity;
        that normalization makes the Green-identity pairings of a load
        against this basis equal the Neumann-type trace of the reference
        solution, coordinate by coordinate."""
        lam_bar = complex(lam_bar)
        return self._cached(self._adjoint_cache, lam_bar,
                            lambda: self._build_adjoint_basis(lam_bar))

    def _build_adjoint_basis(self, lam_bar: complex) -> list[GridFunction]:
        x = self.grid.points
        y0 = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex)
        res = integrate_ivp(self._adjoint_rhs(lam_bar), y0, (0.0, 1.0),
                            tol=self.ode_tol, t_eval=x)
        v1a, wa, v1b, wb = res.ys

        a = np.asarray(self.coeffs.a.value(x), dtype=complex)
        ap = np.asarray(self.coeffs.a.deriv(x), dtype=complex)
        b = np.asarray(self.coeffs.b.value(x), dtype=complex)
        c = np.asarray(self.coeffs.c.value(x), dtype=complex)
        dlc = lam_bar - np.conj(c)
        m = np.conj(b) / dlc
        one_mp = 1.0 - m * np.conj(a)
        raw = []
        for v1, w in ((v1a, wa), (v1b, wb)):
            v1p = (w + m * np.conj(ap) * v1) / one_mp
            v2 = -(np.conj(ap) * v1 + np.conj(a) * v1p) / dlc
            raw.append((v1, v1p, v2))
        traces = np.array([[raw[0][0][-1], raw[1][0][-1]],
                           [raw[0][0][0], raw[1][0][0]]], dtype=complex)
        try:
            comb = solve_linear(traces, np.eye(2, dtype=complex))
        except SingularMatrix as exc:
            raise DirichletSpectrum(
                f"adjoint gamma0 on the kernel singular at "
                f"lam_bar={lam_bar}") from exc
        out = []
        for k in range(2):
            v1 = comb[0, k] * raw[0][0] + comb[1, k] * raw[1][0]
            v1p = comb[0, k] * raw[0][1] + comb[1, k] * raw[1][1]
            v2 = comb[0, k] * raw[0][2] + comb[1, k] * raw[1][2]
            out.append(GridFunction(self.grid, np.column_stack([v1, v2]),
                                    u1_prime_ends=(v1p[0], v1p[-1])))
        return out
