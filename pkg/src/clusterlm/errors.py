"""Exception types shared across the toolkit."""


class ClusterLMError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ClusterLMError):
    """Invalid configuration value or combination of options."""


class FormatError(ClusterLMError):
    """An artifact file is malformed or truncated."""


class VocabMismatchError(ClusterLMError):
    """Artifacts built against different vocabularies were mixed."""


class InvalidMoveError(ClusterLMError):
    """A clustering move that the cluster map forbids."""


class ModelIntegrityError(ClusterLMError):
    """A model returned a non-positive probability during evaluation."""
