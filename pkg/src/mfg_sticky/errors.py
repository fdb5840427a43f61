"""Error types shared across the solvers, the simulator and the CLI.

Every error carries a stable machine-readable ``code`` so that callers
(and the CLI's error records) can dispatch without string-matching
messages.
"""


class MfgError(Exception):
    """Base class; ``code`` is a stable identifier like ``SINGULAR_BOUNDARY``."""

    code = "MFG_ERROR"

    def __init__(self, message="", **details):
        super().__init__(message or self.code)
        self.details = details


class ParameterError(MfgError):
    """Market-parameter or population validation failure."""

    code = "PARAMETER_ERROR"

    def __init__(self, code, message="", **details):
        self.code = code
        super().__init__(message or code, **details)


class ImaginaryAxisRootError(MfgError):
    """A Routh row vanished: the stable/unstable split is ill-defined."""

    code = "IMAGINARY_AXIS_ROOT"


class DegenerateSpectrumError(MfgError):
    """Two eigenvalues coincide within tolerance; generalized eigenvectors
    are deliberately unsupported."""

    code = "DEGENERATE_SPECTRUM"


class SingularBoundaryError(MfgError):
    """The restricted stable eigenvectors are linearly dependent, so the
    boundary-coefficient system has no unique solution."""

    code = "SINGULAR_BOUNDARY"


class NoConvergenceError(MfgError):
    """Picard iteration did not reach tolerance within max_iters."""

    code = "NO_CONVERGENCE"


class UnstableStepError(MfgError):
    """Explicit-scheme step size exceeds the stability guard."""

    code = "UNSTABLE_STEP"


class RiccatiBlowupError(MfgError):
    """Backward Riccati recursion diverged."""

    code = "RICCATI_BLOWUP"


class ParamsMismatchError(MfgError):
    """Two solutions being compared were not produced at identical parameters."""

    code = "PARAMS_MISMATCH"


class ConfigError(MfgError):
    """Invalid experiment configuration."""

    code = "CONFIG_ERROR"
