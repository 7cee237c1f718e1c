"""Shared exception types."""


class StoryloomError(Exception):
    """Base class for all engine errors."""


class DomainParseError(StoryloomError):
    """The domain document could not be parsed at all."""


class DomainValidationError(StoryloomError):
    """The domain document parsed but violates a structural rule.

    The message starts with the field path of the offending entry,
    e.g. ``locations: empty`` or ``actions[3].name: duplicate 'save'``.
    """


class UnknownActionError(StoryloomError):
    """An action name does not resolve in the domain schema."""


class WorldError(StoryloomError):
    """Invalid world construction or malformed action instance."""


class PreconditionError(StoryloomError):
    """An action was executed although its preconditions do not hold."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class SnapshotError(StoryloomError):
    """A world snapshot token could not be restored."""


class ProviderError(StoryloomError):
    """A text-model provider failed (transport, timeout, bad config)."""


class MissingScriptError(ProviderError):
    """The scripted provider has no entry for a request tag."""

    def __init__(self, tag: str):
        super().__init__(f"no scripted response for tag {tag!r}")
        self.tag = tag


class StructuredParseError(ProviderError):
    """A model reply could not be parsed into the requested structure.

    Carries the raw reply so callers can log or surface it.
    """

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


class ExtractionError(StoryloomError):
    """No usable events could be extracted from a narrative text."""


class CompilationError(StoryloomError):
    """No causally sound action sequence was found for an outline event."""

    def __init__(self, event_text: str, detail: str = ""):
        msg = f"could not compile event {event_text!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.event_text = event_text


class MetricError(StoryloomError):
    """A metric was asked to score an input it is not defined for."""
