"""Exception types raised by the geometry, space and solver layers."""


class FrenetIfeError(Exception):
    """Base class for all library-specific errors."""


class DegenerateParametrization(FrenetIfeError):
    """Curve speed ||g'(xi)|| fell below tolerance."""


class OutsideValidityStrip(FrenetIfeError):
    """Point or offset lies outside the tubular strip where the chart is invertible."""


class NewtonDivergence(FrenetIfeError):
    """Chart inversion did not converge; point likely outside the strip."""


class DegenerateChord(FrenetIfeError):
    """Chord endpoints coincide; no affine chart can be built."""


class TangentialIntersection(FrenetIfeError):
    """Interface is tangent to a mesh edge; perturb the mesh."""


class AmbiguousCut(FrenetIfeError):
    """More than two interface crossings on one element; mesh too coarse."""


class DegeneratePartition(FrenetIfeError):
    """Cut-cell piece Jacobian changed sign even after subdivision."""


class DimensionMismatch(FrenetIfeError):
    """Constraint nullspace dimension differs from the expected local dimension."""


class SingularMass(FrenetIfeError):
    """Local mass matrix too ill-conditioned to invert."""


class SingularGram(FrenetIfeError):
    """Gram matrix has no usable non-constant block."""


class NotPositiveDefinite(FrenetIfeError):
    """Stiffness matrix is not positive definite (penalty too small)."""


class NonConvergence(FrenetIfeError):
    """Linear solver failed to reach the residual tolerance."""
