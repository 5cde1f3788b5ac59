"""Error types carrying machine-readable codes.

Every failure raised by the library is a :class:`LabError` subclass with a
stable ``code`` string. The CLI maps codes to exit statuses.
"""

from __future__ import annotations


class LabError(Exception):
    """Base class. ``code`` is the machine-readable identifier."""

    code = "LAB_ERROR"

    def __init__(self, message: str = "", **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> dict:
        out = {"code": self.code, "message": self.message}
        if self.details:
            out["details"] = {k: _plain(v) for k, v in sorted(self.details.items())}
        return out


def _plain(v):
    if isinstance(v, (int, float, str, bool)) or v is None:
        return v
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return repr(v)


class ComposabilityViolation(LabError):
    code = "COMPOSABILITY_VIOLATION"


class PatchExit(LabError):
    code = "PATCH_EXIT"


class ClassOverflow(LabError):
    code = "CLASS_OVERFLOW"


class GridTooCoarse(LabError):
    code = "GRID_TOO_COARSE"


class GeometryMismatch(LabError):
    code = "GEOMETRY_MISMATCH"


class DimMismatch(LabError):
    code = "DIM_MISMATCH"


class Inconclusive(LabError):
    code = "INCONCLUSIVE"


class SupportViolation(LabError):
    code = "SUPPORT_VIOLATION"


class NearSingularPath(LabError):
    code = "NEAR_SINGULAR_PATH"


class NonInteger(LabError):
    code = "NON_INTEGER"


class WindingInconsistent(LabError):
    code = "WINDING_INCONSISTENT"


class SplitFailure(LabError):
    code = "SPLIT_FAILURE"


class WeightOnSpectrum(LabError):
    code = "WEIGHT_ON_SPECTRUM"


class UnstableTruncation(LabError):
    code = "UNSTABLE_TRUNCATION"


class DegenerateLeadingTerm(LabError):
    """The top t-order coefficient of a mode family is singular."""

    code = "DEGENERATE_LEADING_TERM"


class UnknownModel(LabError):
    code = "UNKNOWN_MODEL"


class DivisibilityViolation(LabError):
    code = "DIVISIBILITY_VIOLATION"


class NoAdmissibleWeight(LabError):
    code = "NO_ADMISSIBLE_WEIGHT"


class ConfigError(LabError):
    """Scenario input error; ``field`` and ``line`` locate the problem."""

    code = "CONFIG_ERROR"

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        super().__init__(message, field=field, line=line)
        self.field = field
        self.line = line

    def __str__(self) -> str:
        where = []
        if self.field is not None:
            where.append(f"field '{self.field}'")
        if self.line is not None:
            where.append(f"line {self.line}")
        return f"{self.message} ({', '.join(where)})" if where else self.message
