"""Truncated Taylor (jet) arithmetic."""
from .expression import (Expr, ExpressionError, VectorField, compose, coords, cos, exp,
                         parse_field_expression, plateau, sin, step, transition)
from .fields import CallableField, ComposedField, FieldSum
from .grid import GridSpec
from .jet import Jet, jets_equal
from .multiindex import Basis, basis, count, enumerate_multiindices
from .ops import (HolonomyDefect, JetNorms, batch_inverse, holonomy_defect, jacobian,
                  jet_combine, jet_compose, jet_inverse, jet_norms, jet_project, jet_values,
                  section_cr_norm, taylor_evaluate)
from .section import FieldSection, FunctionSection, JetSection, SampledSection, taylor_jets
from .truncpoly import DomainError, TruncatedPoly, as_exact

__all__ = [
    "Basis", "CallableField", "ComposedField", "DomainError", "FieldSum", "Expr", "ExpressionError", "FieldSection", "FunctionSection",
    "GridSpec", "HolonomyDefect", "Jet", "JetNorms", "JetSection", "SampledSection",
    "TruncatedPoly", "VectorField", "as_exact", "basis", "batch_inverse", "compose",
    "coords", "cos", "count", "enumerate_multiindices", "exp", "holonomy_defect",
    "jacobian", "jet_combine", "jet_compose", "jet_inverse", "jet_norms", "jet_project",
    "jet_values", "jets_equal", "parse_field_expression", "plateau", "section_cr_norm",
    "sin", "step", "taylor_evaluate", "taylor_jets", "transition",
]
