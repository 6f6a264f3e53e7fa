"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid configuration (unsupported modulation order, K > N_T, bad key, ...)."""


class DegenerateMarginError(ValueError):
    """A CI margin is zero or negative; power allocation is undefined for it."""


class SolverFailure(RuntimeError):
    """The CI solver did not reach the requested tolerance."""
