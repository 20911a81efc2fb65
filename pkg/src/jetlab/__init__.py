"""jetlab: jet calculus, primitive decompositions and wiggling constructions."""
__version__ = "0.1.0"
