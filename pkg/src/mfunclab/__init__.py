"""mfunclab: M-functions, Dirichlet-to-Neumann matrices and Krein-type
resolvent corrections for a coupled 2x2 system on [0,1], plus exact
half-space boundary symbols of the fourth-order model operator."""

from .coeffs import (AddedBumpCoeff, BumpZeroCoeff, Coefficients, PolyCoeff,
                     TrigCoeff, coeff_from_descriptor,
                     coefficients_from_descriptor, decoupled_laplace)
from .errors import (BracketSingular, CoefficientSingularity, ConfigError,
                     DegenerateRoots, DirichletSpectrum, GridMismatch,
                     HypothesisViolated, MfunclabError, NeumannEigenvalue,
                     SamplerFailed, SectorViolation, SingularMatrix,
                     SpectralPoint, StepUnderflow, SymbolPole)
from .halfspace import (HalfspaceParams, SigmaPair, dtn_symbol, m_symbol,
                        poisson_symbol_coeffs, sigma_pm)
from .numkit import (Grid, GridFunction, cmat, det, integrate_ivp, inverse,
                     quad_inner, solve_linear, zero_grid_function)
from .odelab import (EndpointJet, EssSpecCurve, KernelPair, OdeBackend,
                     closed_form_comparison, direct_resolvent,
                     ess_spectrum_curve, gamma_traces, hausdorff_distance,
                     kernel_pair, mfn_closed_form, q_alpha_beta,
                     twin_counterexample)
from .triplet import (MatrixRealization, MSample, SpectralScan,
                      SubspaceRealization, dirichlet_realization, dtn_matrix,
                      eig_scan, holomorphy_residual, krein_apply,
                      load_pairings, mfunction, neumann_realization,
                      subspace_mfunction)

__version__ = "0.1.0"
