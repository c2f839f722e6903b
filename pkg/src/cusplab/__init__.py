"""Few-electron density cusp diagnostics: wavefunction models, quadrature,
spherical averages, nuclear-cusp identities and bounds, Jastrow identities."""

__version__ = "0.1.0"

from .atoms import AtomSpec
from .cusp_report import (CuspReport, build_report, golden_hydrogenic,
                          rho2_bound_check, rho3_bound_check, rho3_closed)
from .density import (density_at, rho_tilde, rho_tilde_derivative_direct,
                      rho_tilde_kth_at_zero, sample_rho_tilde)
from .errors import (ConfigError, ContractViolationError, CusplabError,
                     EvaluationError, IntegrationFailureError,
                     SingularPointError, UnsupportedModelError)
from .hfunction import (h0_closed, h_at, h_terms_at, h_tilde, hprime0_closed,
                        ion_bound_check, t0_closed, tprime0_closed,
                        vw_cusp_check)
from .quadrature import (HatGrid, IntegralEstimate, McSampler, SHIPPED_DEGREES,
                         SphericalRule, integrate_hat, integrate_radial,
                         set_threads, sphere_integrate, spherical_rule)
from .wavefunction import (Hydrogenic, HylleraasHelium, OrbitalProduct,
                           SlaterOrbital, WavefunctionModel, eval_grad_phi,
                           eval_grad_psi, eval_phi, eval_psi,
                           hydrogenic_energy, normalize)

__all__ = [name for name in dir() if not name.startswith("_")]
