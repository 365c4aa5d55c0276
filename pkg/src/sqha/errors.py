"""Exception hierarchy. Each error carries a machine-readable code and the
process exit status the CLI maps it to."""


class SQHAError(Exception):
    code = "SQHA_ERROR"
    exit_status = 1
    module = "sqha"

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    def to_dict(self):
        return {
            "error": f"{self.module}.{self.code}",
            "message": str(self),
            "details": {k: _jsonable(v) for k, v in self.details.items()},
        }


def _jsonable(v):
    if isinstance(v, (str, int, bool)) or v is None:
        return v
    try:
        return float(v)
    except (TypeError, ValueError):
        return repr(v)


class ConfigError(SQHAError, ValueError):
    code = "CONFIG_INVALID"
    exit_status = 2
    module = "cli"


class InvalidFieldError(SQHAError, ValueError):
    """Non-finite values, negative densities, mismatched grids."""
    code = "INVALID_FIELD"
    exit_status = 2
    module = "spatial"


class UnresolvedCorrelationError(SQHAError):
    code = "UNRESOLVED_CORRELATION"
    exit_status = 3
    module = "noise"


class NoiseTooStrongError(SQHAError):
    code = "NOISE_TOO_STRONG"
    exit_status = 3
    module = "dynamics"


class DegenerateDenominatorError(SQHAError, ValueError):
    code = "DEGENERATE_DENOMINATOR"
    exit_status = 3
    module = "qpotential"


class NonConfiningError(SQHAError, ValueError):
    code = "NON_CONFINING"
    exit_status = 2
    module = "dynamics"


class ConvergenceError(SQHAError):
    code = "NO_CONVERGENCE"
    exit_status = 4
    module = "dynamics"
