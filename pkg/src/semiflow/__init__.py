"""Numerical laboratory for suspension semi-flows of angle-multiplying maps.

The package computes, at desk scale, every quantity attached to the flow
under a positive trig-polynomial ceiling over tau(x) = ell*x mod 1: inverse
branches and their expansion/slope data, cone-transversality exponents, the
weak-mixing dichotomy through the cobounding potential, Ulam spectra and
correlation decay, anisotropic Sobolev norms on a Fourier grid, and the
perturbation-family genericity diagnostics.
"""

from .ceiling import CeilingClass, TrigPolynomial, ceiling_from_config, classify
from .dynamics import (Branch, Cone, FlowPoint, Word, advance, birkhoff,
                       branch_point, branch_table, flow_count, inverse_branches,
                       time_t_map, word_interval)
from .errors import (DomainViolation, InvalidArgument, NumericalFailure,
                     ParseError, PreconditionViolation, ResourceLimit,
                     SemiflowError, ValidationError)
from .mixing import (CoboundaryReport, Verdict, cobounding_potential,
                     cocycle_residual, eigenfunction_check, unstable_slope,
                     weak_mixing_test)
from .transversality import (LambdaMinEstimate, TransversalityEstimate,
                             exponent_fit, lambda_min, line_mass, m_of_t,
                             m_sum_at, n_of_t)

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"
