"""Exact half-space boundary symbols for the fourth-order model operator
(squared Laplacian) at spectral parameter lambda = -mu^4.

Everything here is closed-form complex arithmetic at a single tangential
frequency: with rho = |xi'| and mu in the open sector |arg mu| < pi/4,
the characteristic polynomial (rho^2 - r^2)^2 + mu^4 factors through

    sigma_plus  = (rho^2 + i mu^2)^(1/2),
    sigma_minus = (rho^2 - i mu^2)^(1/2),

principal branch (cut on the negative real axis, positive on the
positive real axis); the sector hypothesis keeps both real parts
strictly positive, so decaying solutions on the half-line are spanned by
exp(-sigma_plus x_n) and exp(-sigma_minus x_n).

The rendered Dirichlet-to-Neumann symbol follows the normalization

    p = (sigma_plus + sigma_minus)/4 * [[2 sigma_plus sigma_minus, s],
                                        [-s, -2]],   s = sigma_plus + sigma_minus,

whose determinant is lambda/4 = -mu^4/4, and the scalar boundary symbol
of the first-order perturbed condition is

    m = -(c(xi') + s/2)^(-1),

finite for every sector parameter when the condition coefficients are
real, since c(xi') is then purely imaginary while Re s > 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRoots, SectorViolation, SymbolPole

SECTOR_MARGIN = 1e-12   # open sector: reject |arg mu| within this of pi/4
POLE_EPS = 1e-14


@dataclass(frozen=True)
class HalfspaceParams:
    """Tangential frequency magnitude rho = |xi'| >= 0, sector parameter
    mu (lambda = -mu^4), and the first-order boundary coefficient: either
    a real (n-1)-vector bvec with c(xi') = i (bvec . xi') for
    xi' = rho * direction, or the scalar c value directly."""
    rho: float
    mu: complex
    bvec: tuple | None = None
    c_scalar: complex | None = None
    direction: tuple | None = None

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")
        mu = complex(self.mu)
        if mu == 0 or abs(np.angle(mu)) >= np.pi / 4 - SECTOR_MARGIN:
            raise SectorViolation(
                f"mu={mu} outside the open sector |arg mu| < pi/4")
        object.__setattr__(self, "mu", mu)
        if self.bvec is not None and self.c_scalar is not None:
            raise ValueError("give either bvec or c_scalar, not both")
        if self.bvec is not None:
            object.__setattr__(self, "bvec",
                               tuple(float(v) for v in self.bvec))
            if self.direction is not None:
                d = np.asarray(self.direction, dtype=float)
                if d.shape != (len(self.bvec),) or not np.linalg.norm(d):
                    raise ValueError("direction must be a nonzero vector "
                                     "matching bvec")
                object.__setattr__(self, "direction",
                                   tuple(d / np.linalg.norm(d)))

    @property
    def lam(self) -> complex:
        return -self.mu ** 4

    @property
    def c_value(self) -> complex:
        """c(xi') = i (bvec . xi'), xi' = rho * direction (first axis by
        default); or the scalar supplied directly; 0 if neither given."""
        if self.c_scalar is not None:
            return complex(self.c_scalar)
        if self.bvec is None:
            return 0.0 + 0.0j
        if self.direction is None:
            dot = self.bvec[0] * self.rho
        else:
            dot = self.rho * float(np.dot(self.bvec, self.direction))
        return 1j * dot


@dataclass(frozen=True)
class SigmaPair:
    sigma_plus: complex
    sigma_minus: complex

    @property
    def total(self) -> complex:
        return self.sigma_plus + self.sigma_minus

    @property
    def product(self) -> complex:
        return self.sigma_plus * self.sigma_minus


def sigma_pm(params: HalfspaceParams) -> SigmaPair:
    """Characteristic square roots, principal branch; the sector keeps
    rho^2 +/- i mu^2 off the cut and both real parts positive."""
    rho2 = params.rho ** 2
    imu2 = 1j * params.mu ** 2
    sp = np.sqrt(complex(rho2 + imu2))
    sm = np.sqrt(complex(rho2 - imu2))
    return SigmaPair(sigma_plus=complex(sp), sigma_minus=complex(sm))


def poisson_symbol_coeffs(params: HalfspaceParams, phi0: complex,
                          phi1: complex):
    """(c1, c2) so that v(x_n) = c1 e^{-sigma_plus x_n} + c2 e^{-sigma_minus x_n}
    has v(0) = phi0 and v'(0) = phi1:

        c1 + c2 = phi0,   -sigma_plus c1 - sigma_minus c2 = phi1.
    """
    s = sigma_pm(params)
    denom = s.sigma_plus - s.sigma_minus
    if abs(denom) < 1e-14:
        raise DegenerateRoots("sigma_plus == sigma_minus (mu outside the "
                              "open sector?)")
    c1 = (-s.sigma_minus * phi0 - phi1) / denom
    c2 = (s.sigma_plus * phi0 + phi1) / denom
    return complex(c1), complex(c2)


def dtn_symbol(params: HalfspaceParams) -> np.ndarray:
    """Dirichlet-to-Neumann symbol in the rendered quarter
    normalization; det = lambda/4 = -mu^4/4 identically on the sector."""
    s = sigma_pm(params)
    tot = s.total
    return 0.25 * tot * np.array([[2.0 * s.product, tot],
                                  [-tot, -2.0]], dtype=complex)


def m_symbol(params: HalfspaceParams) -> complex:
    """Scalar boundary symbol m = -(c(xi') + (sigma_plus+sigma_minus)/2)^{-1};
    SymbolPole when the denominator degenerates (the boundary operator is
    not invertible at this frequency)."""
    s = sigma_pm(params)
    denom = params.c_value + 0.5 * s.total
    if abs(denom) < POLE_EPS:
        raise SymbolPole(f"boundary symbol pole at rho={params.rho}, "
                         f"mu={params.mu}")
    return complex(-1.0 / denom)
