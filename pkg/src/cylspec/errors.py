"""Exception types shared across the toolkit."""


class CylspecError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(CylspecError):
    """Invalid run configuration (bad flags, missing files, out-of-range values)."""


class DegenerateLattice(CylspecError):
    """Lattice basis is singular or numerically rank-deficient."""


class NonManifoldEdge(CylspecError):
    """An edge of a surface mesh is not shared by exactly two faces."""


class DegenerateTriangle(CylspecError):
    """A mesh face has (numerically) zero area."""


class ConvergenceFailure(CylspecError):
    """An iterative eigensolver exceeded its iteration cap."""


class WindowExceedsCutoff(CylspecError):
    """A root/rate query reaches beyond the spectral completeness radius."""


class CriticalRate(CylspecError):
    """A rate vector lies on (or within tolerance of) the wall of critical rates."""


class NotOrdered(CylspecError):
    """Rate pair is not strictly ordered componentwise."""


class NonNegativeRate(CylspecError):
    """A fixed-asymptotics rate must be negative in every component."""


class OddKernelDimension(CylspecError):
    """A kernel multiplicity d_0 is odd; half-integer dimensions are rejected."""


class NotInKernel(CylspecError):
    """Supplied vectors do not lie in the zero-rate kernel."""


class CriticalWeight(CylspecError):
    """A cylinder weight coincides with an eigenvalue; the model operator is not invertible."""


class InsufficientTail(CylspecError):
    """The time grid is too short to extract an asymptotic limit reliably."""


class IllConditionedMatching(CylspecError):
    """Rank decision in the boundary-matching map is too close to the threshold."""


class PerturbationTooLarge(CylspecError):
    """Coupling strength breaks diagonal dominance of the mode system at t=0."""
