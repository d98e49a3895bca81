"""Exception hierarchy shared by all modules.

The split mirrors how a run can fail: the problem posed to the solver can
be ill-formed (ConfigError), the mathematical hypothesis behind an
experiment can fail to hold for the given flow (HypothesisError), or the
numerics can refuse to converge at the requested resolution
(ConvergenceError).  The command-line driver maps these onto distinct
exit codes.
"""


class ShearStabError(Exception):
    """Base class for all package errors."""


class ConfigError(ShearStabError):
    """Invalid or inconsistent input parameters."""


class HypothesisError(ShearStabError):
    """A structural precondition fails (e.g. no embedded eigenvalue)."""


class ConvergenceError(ShearStabError):
    """A numerical procedure did not converge at the given resolution."""
