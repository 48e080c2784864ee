"""Backend-agnostic boundary-triplet engine.

A problem backend exposes, at each spectral parameter lambda, a basis of
the solution kernel, the two boundary trace maps (gamma0: Dirichlet-type
data, gamma1: Neumann-type data), a reference resolvent with vanishing
gamma0 trace, a Poisson-type solution operator, and a basis of the
adjoint kernel.  From these the engine assembles:

  * the Dirichlet-to-Neumann matrix P(lambda), with gamma1 z = P gamma0 z
    on the kernel;
  * M-matrices of boundary realizations, M = (P - B)^{-1} for the matrix
    condition gamma1 u = B gamma0 u (so M maps Neumann-type data back to
    Dirichlet-type data on the kernel), and the reduced analogue for
    subspace conditions;
  * resolvent applications through the rank-d boundary correction
    ("Krein formula"): reference resolvent plus a kernel element whose
    Dirichlet data is -M applied to pairings of the load against the
    adjoint kernel;
  * contour residuals certifying holomorphy, and spectral scans over
    lambda grids.

Sign convention, fixed once and validated against the direct-resolvent
oracle: M = (P - B)^{-1} exactly, and the resolvent correction enters
with a minus sign (see krein_apply).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import (DirichletSpectrum, MfunclabError, SamplerFailed,
                     SingularMatrix, SpectralPoint)
from .numkit import (Grid, GridFunction, cmat, inf_norm, quad_inner,
                     solve_linear)


@runtime_checkable
class ProblemBackend(Protocol):
    """Capabilities a concrete problem must provide, all at fixed lambda."""

    grid: Grid
    defect_dim: int

    def kernel_basis(self, lam: complex) -> Sequence[GridFunction]:
        """d linearly independent solutions of the homogeneous problem."""
        ...

    def gamma0(self, u: GridFunction) -> np.ndarray:
        """Dirichlet-type boundary data, a complex d-vector."""
        ...

    def gamma1(self, u: GridFunction) -> np.ndarray:
        """Neumann-type boundary data, a complex d-vector."""
        ...

    def reference_resolvent(self, lam: complex, f: GridFunction) -> GridFunction:
        """Solve (A - lambda) w = f with gamma0 w = 0."""
        ...

    def poisson(self, lam: complex, phi: np.ndarray) -> GridFunction:
        """Kernel element with prescribed gamma0 data phi."""
        ...

    def adjoint_kernel_basis(self, lam_bar: complex) -> Sequence[GridFunction]:
        """d solutions spanning the adjoint kernel at conjugated lambda,
        normalized so their gamma0 traces form the identity matrix."""
        ...


# ---------------------------------------------------------------------------
# Boundary realizations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MatrixRealization:
    """Boundary condition gamma1 u = B gamma0 u for a d x d matrix B."""
    B: np.ndarray

    def __post_init__(self):
        b = cmat(self.B)
        if b.shape[0] != b.shape[1]:
            raise ValueError("B must be square")
        object.__setattr__(self, "B", b)

    @property
    def dim(self) -> int:
        return self.B.shape[0]


@dataclass(frozen=True)
class SubspaceRealization:
    """Mixed condition: gamma0 u constrained to the coordinate subspace
    selected by sel_x, and on the sel_y coordinates
    gamma1 u = L1 (gamma0 u restricted to sel_x).

    sel_x and sel_y are 0/1 diagonal selectors given as integer vectors;
    L1 is rank(sel_y) x rank(sel_x).  Equal ranks keep the boundary
    system square (rank(sel_x) free Dirichlet parameters matched by
    rank(sel_y) Neumann-type equations).
    """
    sel_x: tuple
    sel_y: tuple
    L1: np.ndarray

    def __post_init__(self):
        sx = tuple(int(v) for v in self.sel_x)
        sy = tuple(int(v) for v in self.sel_y)
        if any(v not in (0, 1) for v in sx + sy):
            raise ValueError("selector entries must be 0 or 1")
        if len(sx) != len(sy):
            raise ValueError("selectors must have equal length")
        l1 = cmat(self.L1) if np.size(self.L1) else np.zeros((0, 0), complex)
        if l1.shape != (sum(sy), sum(sx)):
            raise ValueError(
                f"L1 shape {l1.shape} does not match selector ranks "
                f"({sum(sy)}, {sum(sx)})")
        object.__setattr__(self, "sel_x", sx)
        object.__setattr__(self, "sel_y", sy)
        object.__setattr__(self, "L1", l1)

    @property
    def dim(self) -> int:
        return len(self.sel_x)

    @property
    def idx_x(self) -> tuple:
        return tuple(i for i, v in enumerate(self.sel_x) if v)

    @property
    def idx_y(self) -> tuple:
        return tuple(i for i, v in enumerate(self.sel_y) if v)


def neumann_realization(d: int = 2) -> MatrixRealization:
    return MatrixRealization(np.zeros((d, d), dtype=complex))


def dirichlet_realization(d: int = 2) -> SubspaceRealization:
    """gamma0 u = 0: the subspace condition with empty selectors."""
    return SubspaceRealization((0,) * d, (0,) * d, np.zeros((0, 0)))


Realization = MatrixRealization | SubspaceRealization


@dataclass(frozen=True)
class MSample:
    """M-matrix at one spectral parameter, with a condition estimate of
    the defining solve (||P - B|| * ||M|| in the matrix case)."""
    lam: complex
    M: np.ndarray
    cond: float


# ---------------------------------------------------------------------------
# Core operations
# ---------------------------------------------------------------------------

def _trace_matrices(backend: ProblemBackend, lam: complex):
    """Stack gamma0/gamma1 traces of the kernel basis as matrix columns.

    Uses the backend's trace-only fast path when it offers one (scans
    evaluate thousands of spectral parameters and never need kernel
    values away from the endpoints)."""
    traces = getattr(backend, "kernel_traces", None)
    if traces is not None:
        return traces(lam)
    basis = backend.kernel_basis(lam)
    g0 = np.column_stack([backend.gamma0(z) for z in basis])
    g1 = np.column_stack([backend.gamma1(z) for z in basis])
    return g0, g1


def dtn_matrix(backend: ProblemBackend, lam: complex) -> np.ndarray:
    """Dirichlet-to-Neumann matrix P with gamma1 z = P gamma0 z on the
    kernel.  Raises DirichletSpectrum when gamma0 restricted to the
    kernel is singular, i.e. lambda sits in the spectrum of the
    Dirichlet-type reference realization."""
    g0, g1 = _trace_matrices(backend, lam)
    try:
        # P = G1 G0^{-1}  <=>  G0^T P^T = G1^T
        pt = solve_linear(g0.T, g1.T)
    except SingularMatrix as exc:
        raise DirichletSpectrum(
            f"gamma0 on the kernel is singular at lambda={lam}") from exc
    return pt.T


def mfunction(backend: ProblemBackend, realization: MatrixRealization,
              lam: complex) -> MSample:
    """M-matrix of the realization gamma1 u = B gamma0 u.

    M = (P - B)^{-1}; equivalently M (gamma1 - B gamma0) z = gamma0 z for
    every kernel element z.  Raises SpectralPoint when P - B is singular
    (lambda is an eigenvalue of the realization while the reference
    problem is still solvable)."""
    p = dtn_matrix(backend, lam)
    a = p - realization.B
    try:
        m = solve_linear(a, np.eye(a.shape[0], dtype=complex))
    except SingularMatrix as exc:
        raise SpectralPoint(
            f"P - B singular at lambda={lam}") from exc
    return MSample(lam=lam, M=m, cond=inf_norm(a) * inf_norm(m))


def reduced_boundary_matrix(backend: ProblemBackend,
                            realization: SubspaceRealization,
                            lam: complex) -> np.ndarray:
    """sel_y P sel_x - L1 compressed to the selected coordinates
    (rank_y x rank_x)."""
    p = dtn_matrix(backend, lam)
    iy, ix = realization.idx_y, realization.idx_x
    return p[np.ix_(iy, ix)] - realization.L1


def subspace_mfunction(backend: ProblemBackend,
                       realization: SubspaceRealization,
                       lam: complex) -> MSample:
    """M-matrix of the mixed condition, mapping the selected
    Neumann-type coordinates to the selected Dirichlet-type coordinates:
    M1 (sel_y P sel_x - L1) = I on the reduced space.

    With full selectors and L1 = B this reproduces mfunction exactly."""
    red = reduced_boundary_matrix(backend, realization, lam)
    if red.shape[0] != red.shape[1]:
        raise ValueError("subspace realization with unequal selector ranks "
                         "has no square boundary matrix")
    if red.shape[0] == 0:
        return MSample(lam=lam, M=np.zeros((0, 0), complex), cond=0.0)
    try:
        m = solve_linear(red, np.eye(red.shape[0], dtype=complex))
    except SingularMatrix as exc:
        raise SpectralPoint(
            f"reduced boundary matrix singular at lambda={lam}") from exc
    return MSample(lam=lam, M=m, cond=inf_norm(red) * inf_norm(m))


def load_pairings(backend: ProblemBackend, lam: complex,
                  f: GridFunction) -> np.ndarray:
    """d-vector of pairings of the load f against the adjoint kernel
    basis at conjugated lambda.

    With the adjoint basis normalized to identity gamma0 traces, the
    abstract Green identity makes component k equal the k-th Neumann-type
    trace of the reference solution of f, without ever differentiating
    that solution numerically."""
    adj = backend.adjoint_kernel_basis(np.conj(lam))
    return np.array([quad_inner(f, v) for v in adj], dtype=complex)


def krein_apply(backend: ProblemBackend, realization: Realization,
                lam: complex, f: GridFunction) -> GridFunction:
    """Apply the resolvent of the realization through the boundary-rank
    correction of the reference resolvent:

        u = w - poisson(lambda, M . w(f)),    w = reference_resolvent(f),

    where w(f) are the adjoint-kernel pairings of f (equal to the
    Neumann-type trace of w).  The minus sign is the one validated
    against the direct-resolvent oracle for the convention
    M = (P - B)^{-1}.  Propagates SpectralPoint / DirichletSpectrum."""
    if isinstance(realization, MatrixRealization):
        ms = mfunction(backend, realization, lam)
    else:
        raise ValueError("krein_apply requires a matrix-type realization; "
                         "the reference realization has no boundary "
                         "correction")
    w = backend.reference_resolvent(lam, f)
    pair = load_pairings(backend, lam, f)
    phi = -(ms.M @ pair)
    z = backend.poisson(lam, phi)
    values = w.values + z.values
    dw0, dw1 = w.u1_prime_at_ends()
    dz0, dz1 = z.u1_prime_at_ends()
    return GridFunction(backend.grid, values,
                        u1_prime_ends=(dw0 + dz0, dw1 + dz1))


def holomorphy_residual(m_sampler, center: complex, radius: float,
                        n_nodes: int = 64) -> float:
    """|| (2 pi i)^{-1} contour integral of M(lambda) d lambda || on a
    circle, by the trapezoid rule on equispaced nodes (spectrally
    accurate for analytic integrands).  Near zero iff the sampler is
    holomorphic inside; a nonzero value certifies an enclosed
    singularity.  Raises SamplerFailed if any node evaluation errors."""
    nodes = center + radius * np.exp(2j * np.pi * np.arange(n_nodes) / n_nodes)
    acc = None
    for lam in nodes:
        try:
            m = np.asarray(m_sampler(lam), dtype=complex)
        except MfunclabError as exc:
            raise SamplerFailed(f"sampler failed at contour node {lam}") from exc
        # d lambda = i radius e^{i theta} d theta; dividing by 2 pi i
        # leaves radius e^{i theta} / n per node.
        term = m * ((lam - center) / n_nodes)
        acc = term if acc is None else acc + term
    return inf_norm(acc)


# ---------------------------------------------------------------------------
# Spectral scans
# ---------------------------------------------------------------------------

STATUS_OK = "ok"
STATUS_SPECTRAL = "spectral"
STATUS_ESS_TUBE = "ess_tube"
STATUS_DIRICHLET = "dirichlet_spectrum"
STATUS_COEFF_SINGULAR = "coeff_singular"

# Scan points are flagged spectral when |det| drops below this fraction
# of the largest |det| seen in the scan (scale-invariant, robust near
# simple zeros).
FLAG_REL = 1e-8


@dataclass
class ScanPoint:
    lam: complex
    det: complex | None          # det of the realization boundary matrix
    det_gamma0: complex | None   # det of gamma0 on the kernel
    inv_norm: float              # ||M||_inf, 0 on failure
    ess_dist: float
    status: str


@dataclass
class SpectralScan:
    points: list[ScanPoint] = field(default_factory=list)

    def __len__(self):
        return len(self.points)

    def max_abs_det(self) -> float:
        vals = [abs(p.det) for p in self.points if p.det is not None]
        return max(vals) if vals else 0.0

    def flag_threshold(self, rel: float = FLAG_REL) -> float:
        return rel * self.max_abs_det()


def _boundary_det(backend: ProblemBackend, realization: Realization,
                  lam: complex):
    """(det, det_gamma0, inv_norm) of the realization's boundary matrix.

    For the rank-0 subspace condition (the Dirichlet-type reference) the
    meaningful singularity indicator is gamma0 on the kernel itself, so
    its determinant is reported in the det slot."""
    from .numkit import det as _det

    g0, g1 = _trace_matrices(backend, lam)
    det_g0 = _det(g0)
    if isinstance(realization, SubspaceRealization) and not realization.idx_x:
        return det_g0, det_g0, 0.0
    try:
        pt = solve_linear(g0.T, g1.T)
    except SingularMatrix as exc:
        raise DirichletSpectrum(
            f"gamma0 on the kernel is singular at lambda={lam}") from exc
    p = pt.T
    if isinstance(realization, MatrixRealization):
        a = p - realization.B
    else:
        iy, ix = realization.idx_y, realization.idx_x
        a = p[np.ix_(iy, ix)] - realization.L1
    d = _det(a)
    try:
        m = solve_linear(a, np.eye(a.shape[0], dtype=complex))
        invn = inf_norm(m)
    except SingularMatrix:
        invn = 0.0
    return d, det_g0, invn


def eig_scan(backend: ProblemBackend, realization: Realization,
             lam_grid) -> SpectralScan:
    """Per-point spectral diagnostics over an iterable of lambda values.

    Records det of the boundary matrix, ||(P-B)^{-1}||_inf (0 on
    failure), distance to the sampled essential-spectrum curve, and a
    status flag.  Individual failures are recorded, never aborted on.
    Statuses are finalized in a second pass because the spectral flag
    threshold is relative to the largest |det| in the scan."""
    from .errors import CoefficientSingularity, StepUnderflow

    scan = SpectralScan()
    tube = getattr(backend, "in_exclusion_tube", None)
    edist = getattr(backend, "ess_distance", None)
    for lam in lam_grid:
        lam = complex(lam)
        dist = float(edist(lam)) if edist is not None else np.inf
        if tube is not None and tube(lam):
            scan.points.append(ScanPoint(lam, None, None, 0.0, dist,
                                         STATUS_ESS_TUBE))
            continue
        try:
            d, det_g0, invn = _boundary_det(backend, realization, lam)
            scan.points.append(ScanPoint(lam, d, det_g0, invn, dist,
                                         STATUS_OK))
        except DirichletSpectrum:
            scan.points.append(ScanPoint(lam, None, None, 0.0, dist,
                                         STATUS_DIRICHLET))
        except (CoefficientSingularity, StepUnderflow):
            scan.points.append(ScanPoint(lam, None, None, 0.0, dist,
                                         STATUS_COEFF_SINGULAR))
    finalize_statuses(scan, realization)
    return scan


def finalize_statuses(scan: SpectralScan, realization: Realization,
                      rel: float = FLAG_REL) -> None:
    """Apply the scale-invariant spectral flag.

    Rank-0 subspace scans report det(gamma0 on kernel) in the det slot,
    so their threshold crossings mean reference (Dirichlet-type)
    spectrum, not realization spectrum."""
    thr = scan.flag_threshold(rel)
    dirichlet_mode = (isinstance(realization, SubspaceRealization)
                      and not realization.idx_x)
    for p in scan.points:
        if p.status != STATUS_OK:
            continue
        if p.det is not None and abs(p.det) < thr:
            p.status = STATUS_DIRICHLET if dirichlet_mode else STATUS_SPECTRAL


def refine_zero(fn, lam_a: complex, lam_b: complex,
                tol: float = 1e-9, max_iter: int = 80) -> complex:
    """Bisection on the real part of fn along the segment [lam_a, lam_b],
    assuming Re fn changes sign between the endpoints."""
    fa = fn(lam_a).real
    fb = fn(lam_b).real
    if fa == 0.0:
        return lam_a
    if fb == 0.0:
        return lam_b
    if np.sign(fa) == np.sign(fb):
        raise ValueError("no sign change on the segment")
    a, b = lam_a, lam_b
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        fm = fn(mid).real
        if fm == 0.0 or abs(b - a) < tol:
            return mid
        if np.sign(fm) == np.sign(fa):
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)
