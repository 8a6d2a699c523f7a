class LocalRoiError(Exception):
    """Base class for errors raised by this package."""


class ShapeError(LocalRoiError, ValueError):
    """Dimensions or table shapes do not match."""


class ResourceError(LocalRoiError):
    """A combinatorial or size cap would be exceeded."""


class SolverError(LocalRoiError):
    """The conic backend failed to produce a usable solution."""


class InaccurateCertificateError(LocalRoiError):
    """Primal and dual ROI values disagree by more than the gap tolerance."""

    def __init__(self, primal: float, dual: float, gap_tol: float):
        self.primal = primal
        self.dual = dual
        self.gap_tol = gap_tol
        super().__init__(
            f"duality gap {abs(primal - dual):.3e} exceeds {gap_tol:.1e} "
            f"(primal={primal!r}, dual={dual!r})"
        )


class DegenerateCertificateError(LocalRoiError):
    """The certificate has (numerically) zero robustness; no noise exists to extract."""


class GenerationError(LocalRoiError):
    """Random object generation failed after the allowed retries."""


class SchemaError(LocalRoiError):
    """A JSON document does not match its schema."""

    def __init__(self, message: str, pointer: str = ""):
        self.pointer = pointer
        super().__init__(f"{pointer or '/'}: {message}")
