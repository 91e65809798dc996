"""Retraction-based solvers for systems of split variational inequalities in lp spaces."""

from .linops import BoundedLinearOp, p_norm_lower_estimate, p_norm_upper_bound
from .lp_space import LpSpace, StructuralError
from .problem import (AffineScalar, ComponentwiseMonotone, DiagonalAffine,
                      MonotoneMap, SspvipInstance, estimate_moduli,
                      generate_instance, residuals, verify_instance)
from .retractions import (Box, ConvexSet, CoordinateSubspace, EuclideanBall,
                          NonnegativeOrthant, WholeSpace, retract,
                          verify_sunny_nonexpansive)
from .solver import (ContractionCertificate, InfeasibleCertificateWarning,
                     IterateTrace, SolverConfig, certificate,
                     contraction_certificate, solve_spvip, solve_sspvip,
                     suggest_parameters)

__version__ = "0.1.0"

__all__ = [
    "AffineScalar", "BoundedLinearOp", "Box", "ComponentwiseMonotone",
    "ContractionCertificate", "ConvexSet", "CoordinateSubspace",
    "DiagonalAffine", "EuclideanBall", "InfeasibleCertificateWarning",
    "IterateTrace", "LpSpace", "MonotoneMap", "NonnegativeOrthant",
    "SolverConfig", "SspvipInstance", "StructuralError", "WholeSpace",
    "certificate", "contraction_certificate", "estimate_moduli",
    "generate_instance", "p_norm_lower_estimate", "p_norm_upper_bound",
    "residuals", "retract", "solve_spvip", "solve_sspvip",
    "suggest_parameters", "verify_instance", "verify_sunny_nonexpansive",
]
