"""Explicit local constructions: the wiggle, the two local models and their orchestration."""
from .adjust import AdjustModel, AngleError, adjusted_normal, transversality_adjust
from .isotopy import (ComposedIsotopy, ConjugatedIsotopy, InjectivityError, WiggleIsotopy,
                      admissible_delta, build_wiggle_isotopy, cutoff_phi, cutoff_phi_poly,
                      measured_injectivity)
from .orchestrate import (PolynomialSection, approximate_primitive, approximate_top_order,
                          default_schedule, primitive_terms, reduce_order, transverse_frame)
from .result import ApproximationResult, HolonomicSection, IdentityIsotopy, StageError
from .transverse import (SupportError, TransverseModel, parametric_transverse_approximate,
                         transverse_approximate)
from ..profiles import PLATEAU, STEP, TRANSITION, Profile

__all__ = [
    "AdjustModel", "AngleError", "adjusted_normal", "transversality_adjust",
    "ComposedIsotopy", "ConjugatedIsotopy", "InjectivityError", "WiggleIsotopy",
    "admissible_delta", "build_wiggle_isotopy", "cutoff_phi", "cutoff_phi_poly",
    "measured_injectivity", "PolynomialSection", "approximate_primitive",
    "approximate_top_order", "default_schedule", "primitive_terms", "reduce_order",
    "transverse_frame", "ApproximationResult", "HolonomicSection", "IdentityIsotopy",
    "StageError", "SupportError", "TransverseModel", "parametric_transverse_approximate",
    "transverse_approximate", "PLATEAU", "STEP", "TRANSITION", "Profile",
]
