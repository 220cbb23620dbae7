"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid user-supplied configuration (graph sizes, config files, parameters)."""


class NumericalError(RuntimeError):
    """A numerical kernel failed to converge or violated its residual contract.

    Carries the digest of the offending Hamiltonian instance when available.
    """

    def __init__(self, message, digest=None):
        if digest is not None:
            message = f"{message} [instance {digest[:16]}]"
        super().__init__(message)
        self.digest = digest


class DegenerateFitError(RuntimeError):
    """A fit was requested on data that cannot support one (e.g. all zeros)."""


class ResampleSignal(Exception):
    """A factorization hit an (almost surely measure-zero) singular pivot.

    Estimators catch this and redraw the disorder; it never escapes to users.
    """
