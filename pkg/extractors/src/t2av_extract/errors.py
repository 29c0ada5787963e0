class ExtractError(Exception):
    """Base class for extraction failures."""


class DecodeError(ExtractError):
    """Media could not be decoded; message names the clip id."""


class EncoderUnavailableError(ExtractError):
    """No registered encoder under the requested id."""


class VocabularyError(ExtractError):
    """A tag had no in-vocabulary words; message lists the tag."""
