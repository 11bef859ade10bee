"""floodrom: two-phase waterflood simulation with adaptive reduced-order pressure models.

The package couples a finite-volume two-phase flow simulator (implicit
pressure, explicit saturation) with proper-orthogonal-decomposition bases and
a Galerkin-reduced pressure solve, plus a residual-driven basis adaptation
scheme for changed well configurations.
"""

__version__ = "0.1.0"
