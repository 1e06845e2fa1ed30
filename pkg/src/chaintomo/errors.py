"""Exception taxonomy for the tomography pipeline.

Every error raised by this package derives from :class:`ChainTomoError`.
Input problems (malformed chain descriptions, bad trace files) raise
:class:`SpecError`; everything else signals a failure inside a pipeline
stage and carries a ``stage`` attribute once the orchestrator has tagged
it.
"""

from __future__ import annotations


class ChainTomoError(Exception):
    """Base class for all package errors.

    Attributes:
        stage: name of the pipeline stage that raised, or None if the
            error occurred outside the orchestrated pipeline.
    """

    def __init__(self, message: str, *, stage: str | None = None):
        super().__init__(message)
        self.stage = stage


class SpecError(ChainTomoError):
    """A chain description or input file violates a declared invariant."""


class ShapeMismatch(SpecError):
    """Parameter arrays or parameter-name sets do not line up."""


class CapExceeded(ChainTomoError):
    """Requested state-vector simulation above the configured site cap."""


class EigenError(ChainTomoError):
    """An eigensolve failed or the evolved state lost normalization."""


class ResolutionError(ChainTomoError):
    """The sampled window cannot separate the requested number of lines."""


class ConvergenceError(ChainTomoError):
    """Iterative refinement stopped before meeting its tolerance.

    Carries the best model found so far (``best``) and its residual RMS
    (``residual_rms``) so callers can decide whether to accept it.
    """

    def __init__(self, message: str, *, best=None, residual_rms: float | None = None):
        super().__init__(message)
        self.best = best
        self.residual_rms = residual_rms


class InsufficientChain(ChainTomoError):
    """More Taylor orders requested than the chain has links to support."""


class InversionError(ChainTomoError):
    """A coupling square came out negative beyond tolerance.

    Attributes:
        link: 1-based index of the offending link.
        radicand: the (eta_j - p0)/(p1 - p0) value that went negative.
    """

    def __init__(self, message: str, *, link: int, radicand: float):
        super().__init__(message)
        self.link = link
        self.radicand = radicand


class DegenerateError(ChainTomoError):
    """An earlier link estimated at zero makes later links unidentifiable."""

    def __init__(self, message: str, *, link: int):
        super().__init__(message)
        self.link = link


class TomographyWarning(UserWarning):
    """Non-fatal diagnostics: clamped radicands, conditioning flags."""
