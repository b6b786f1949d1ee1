"""Exception taxonomy shared by every vctext module.

Each class maps to one CLI exit code (see cli.EXIT_CODES); keeping the
hierarchy flat and explicit makes that mapping exhaustive.
"""


class VctextError(Exception):
    """Base class for all errors raised by this package."""


# ---- numeric contract violations ----

class ShapeError(VctextError):
    """Operands have incompatible or malformed shapes."""


class ZeroNormError(VctextError):
    """An embedding fell below the 1e-8 norm guard; upstream data is corrupt."""


class NonFiniteError(VctextError):
    """A value or activation is NaN or Inf."""


class RangeError(VctextError):
    """A scalar argument is outside its documented range."""


# ---- labels / metrics ----

class LabelError(VctextError):
    """Labels are malformed for the requested loss or metric mode."""


class DegenerateClassError(VctextError):
    """Every class lacks positives; average precision is undefined."""


# ---- vocabulary manifests ----

class ParseError(VctextError):
    """A manifest or config document failed to parse."""


class DuplicateEntryError(ParseError):
    """The same prompt text appears twice in a vocabulary manifest."""


class UnknownCategoryError(ParseError):
    """A vocabulary entry appears before any category declaration."""


# ---- binary file formats ----

class MagicMismatchError(VctextError):
    """File does not start with the expected magic bytes."""


class VersionError(VctextError):
    """File declares an unsupported format version."""


class TruncationError(VctextError):
    """File ends before the payload its header declares."""


class ChecksumError(VctextError):
    """Trailing CRC32 does not match the file contents."""


# ---- data generation / sampling ----

class SpecError(VctextError):
    """A synthetic-data specification is invalid."""


class InsufficientClipsError(VctextError):
    """A class has fewer clips than the requested few-shot count."""


# ---- training / ablations ----

class DivergenceError(VctextError):
    """Training loss became non-finite."""


class UnknownAblationError(VctextError):
    """An ablation row name does not match any known configuration."""


class UsageError(VctextError):
    """Command line arguments or config overrides are invalid."""
