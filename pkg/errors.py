"""Exception hierarchy shared by the geometry modules and the CLI."""


class GeometryError(Exception):
    """Base class for every error raised by this package"""


class ValidationError(GeometryError, ValueError):
    """Invalid parameters, malformed algebras or impossible requests"""


class ComputationError(GeometryError, ArithmeticError):
    """A numerical procedure failed or did not verify"""


class VerificationFailure(GeometryError):
    """One or more checks of the verification suite failed"""

    def __init__(self, failed_checks):
        self.failed_checks = list(failed_checks)
        super().__init__(f"{len(self.failed_checks)} verification check(s) failed: "
                         + ", ".join(self.failed_checks))
