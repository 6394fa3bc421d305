"""Exception types shared across the toolkit."""


class VesselTopoError(Exception):
    """Base class for all toolkit errors."""


class FormatError(VesselTopoError):
    """File exists but is not a well-formed binary PGM."""


class DimensionMismatch(VesselTopoError):
    """Two grids that must share a shape do not."""


class EmptyInput(VesselTopoError):
    """An aggregate was requested over zero items."""


class InvalidParams(VesselTopoError):
    """Generator parameters violate their invariants or are unsatisfiable."""


class InvalidConfig(VesselTopoError):
    """A dataset or training configuration is malformed."""


class InsufficientStructure(VesselTopoError):
    """A mask has too little structure for the requested perturbation."""


class RejectedTie(VesselTopoError):
    """Candidate masks score identically, so no unique answer exists."""


class DegenerateInput(VesselTopoError):
    """Inputs that make a task vacuous (e.g. refinement of a perfect mask)."""


class NonFiniteLoss(VesselTopoError):
    """Training produced NaN or infinity; aborted with diagnostics."""
