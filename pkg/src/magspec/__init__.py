"""Magnetic Neumann spectra of cylinders and planar annuli with closed potentials.

Discrete magnetic Laplacians with exact gauge covariance, a deterministic
sparse eigensolver, closed-form lower bounds for metric cylinders and
starlike annuli, and subdomain upper bounds for sharpness studies.
"""

__version__ = "0.1.0"

from .bounds import (check_lower_bound, lower_bound_annulus, lower_bound_cylinder,
                     upper_bound_subdomain, verify_steps)
from .errors import *  # noqa: F401,F403
from .exact import circle_eigenvalues, product_lambda1, product_spectrum
from .gauge import OneForm, aharonov_bohm, dist_to_integers, flux_on_loop, harmonic_flux
from .geometry import (AnnulusDomain, ClosedCurve, MetricCylinder, annulus_constants, circle,
                       cylinder_K, ellipse, foliation_K_annulus, ray_map, rounded_rectangle,
                       starlike_check)
from .operators import (GridSpec, RectilinearGrid, SubdomainSpec, assemble_annulus,
                        assemble_circle, assemble_cylinder, assemble_masked)
from .solver import SpectrumResult, deflated_solve, smallest_eigenpairs
