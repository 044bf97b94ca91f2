"""Exception hierarchy shared across the package."""

from __future__ import annotations


class MathInterpError(Exception):
    """Base class for all errors raised by mathinterp."""


class ConfigError(MathInterpError):
    """Invalid or inconsistent configuration."""


class EmptySolution(MathInterpError):
    pass


class EmptyPrompt(MathInterpError):
    pass


class DegenerateAblation(MathInterpError):
    """Perturbing an element would leave the prompt empty or unchanged."""


class InsufficientCorpus(MathInterpError):
    pass


class NoTrials(MathInterpError):
    pass


class NoQuestions(MathInterpError):
    pass




class GatewayError(MathInterpError):
    """Base for failures talking to a model endpoint."""

    retryable = False


class EndpointUnreachable(GatewayError):
    retryable = True


class Timeout(GatewayError):
    retryable = True


class HttpError(GatewayError):
    def __init__(self, status: int, body: str = ""):
        super().__init__(f"HTTP {status}: {body[:200]}")
        self.status = status
        self.body = body

    @property
    def retryable(self) -> bool:  # type: ignore[override]
        return self.status == 429 or self.status >= 500


class ReplayMiss(GatewayError):
    """Replay-only mode and the request is not in the cache."""


class EmptyCorpus(MathInterpError):
    pass


class BadConfig(ConfigError):
    pass


class OverrideEmpty(ConfigError):
    """A system prompt override was given but is blank."""


class EmptyIndex(MathInterpError):
    pass


class ContextOverflow(MathInterpError):
    pass
