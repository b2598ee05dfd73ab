"""Kinetic-fluid coupling laboratory.

A particle/phase-grid kinetic solver coupled to a pseudo-spectral
incompressible fluid with shear-dependent viscosity, plus the machinery
needed to verify the quantitative inequalities the coupled system is
supposed to obey (coercivity, monotonicity, transport stability,
energy dissipation, fixed-point contraction).
"""

__version__ = "0.1.0"
