"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A parameter file or scenario config is missing or inconsistent."""


class IntegrationError(RuntimeError):
    """Master-equation integration failed; message carries diagnostics."""


class FitError(RuntimeError):
    """A least-squares fit did not converge or is degenerate."""


class NoSolutionError(RuntimeError):
    """A root-solving problem has no admissible solution."""


class SingularityError(ZeroDivisionError):
    """Evaluation at a pole of an analytic formula."""


class PreconditionError(ValueError):
    """An operation was called on a state violating its stated precondition."""


class DegeneratePostselection(RuntimeError):
    """Post-selection accepted no probability weight."""
