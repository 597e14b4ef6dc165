"""Exception types shared across the toolkit.

Every failure mode raised by protocol design, propagation, or the CLI maps
to one of these classes so callers can react to a specific condition rather
than parsing messages.
"""


class StakitError(Exception):
    """Base class for all toolkit errors."""


# --- interpolation -----------------------------------------------------------

class InvalidSpec(StakitError):
    """Boundary specification is malformed (e.g. non-positive duration)."""


class SingularSystem(StakitError):
    """Boundary conditions are linearly dependent or too ill-conditioned."""


class OutOfDomain(StakitError):
    """Evaluation requested outside the time interval [0, t_f]."""


# --- expansion / Ermakov -----------------------------------------------------

class NonPositiveScaling(StakitError):
    """Scaling factor rho is not strictly positive on the grid."""


class BlowUp(StakitError):
    """Ermakov integration left the trust interval for rho."""


class PoleInRamp(StakitError):
    """The uniform-adiabaticity ramp denominator vanishes inside [0, t_f]."""


class NonPositiveCoupling(StakitError):
    """Coupling schedule g1(t) is not strictly positive."""


# --- transport ---------------------------------------------------------------

class VariantMismatch(StakitError):
    """Operation requires a different transport protocol variant."""


class EdgeMismatch(StakitError):
    """Boundary values at t = 0 or t = t_f violate the construction."""


# --- two-level / counterdiabatic --------------------------------------------

class DegenerateGap(StakitError):
    """Two-level gap Omega vanishes somewhere on the grid."""


class ShootingFailed(StakitError):
    """Boundary-value shooting could not bracket a solution."""


class DegenerateSpectrum(StakitError):
    """Spectrum gap below threshold; eigenvector derivatives undefined."""


class GapClosure(StakitError):
    """A k-mode field magnitude |a_k| vanished along the ramp."""


class BoundaryConditionViolated(StakitError):
    """Superadiabatic coupling K_1 does not vanish at the time edges."""


# --- fast-forward ------------------------------------------------------------

class ZeroDensity(StakitError):
    """Designed density vanishes on the interior at working precision."""


# --- wave simulation ---------------------------------------------------------

class GridMismatch(StakitError):
    """States live on different spatial grids."""


class BoxTooSmall(StakitError):
    """Probability density at the box edge exceeded the allowed level."""


class StepTooLarge(StakitError):
    """Time step does not resolve the potential or kinetic bandwidth."""


class NoConvergence(StakitError):
    """Iterative stationary-state search did not reach tolerance."""


# --- CLI ---------------------------------------------------------------------

class SchemaError(StakitError):
    """Scenario parameters violate the declared schema.

    ``field`` carries the dotted path of the offending parameter.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class VerificationFailed(StakitError):
    """Protocol verification missed its fidelity contract."""

    def __init__(self, message, measured=None):
        self.measured = measured
        super().__init__(message)


class BudgetExceeded(StakitError):
    """Requested scan exceeds the allowed number of grid points."""
