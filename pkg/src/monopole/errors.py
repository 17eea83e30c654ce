"""Exception types shared across the package."""


class MonopoleError(Exception):
    """Base class for package errors."""


class MeanValueError(MonopoleError):
    """An operation requiring a mean-zero field received one with a mean."""


class SmallnessError(MonopoleError):
    """Data norm exceeds a configured smallness threshold."""


class NonContractionError(MonopoleError):
    """A fixed-point iteration stopped contracting (or hit max iterations)."""


class GaugeError(MonopoleError):
    """A gauge transformation input failed validation (e.g. not unitary)."""


class ConfigError(MonopoleError):
    """Malformed run configuration."""


class ReconstructionError(MonopoleError):
    """Physical fields recovered from the wave variables carried a
    non-anti-Hermitian component too large to be integration noise."""


class BlowupError(MonopoleError):
    """A field norm crossed the configured blow-up cap during evolution."""


class SnapshotError(MonopoleError):
    """Malformed or corrupt snapshot file."""
