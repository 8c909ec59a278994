"""Exception hierarchy for phibranch."""


class PhiBranchError(Exception):
    """Base class for all domain errors raised by the package."""


class NonZeroMeanInput(PhiBranchError):
    """The periodic antiderivative was asked for a function with nonzero mean."""


class UnsupportedOperator(PhiBranchError):
    pass


class LambdaOutOfDomain(PhiBranchError):
    def __init__(self, lam, interval):
        super().__init__(f"lambda={lam!r} outside the open interval {interval}")
        self.lam = lam
        self.interval = interval


class NoConvergence(PhiBranchError):
    def __init__(self, iterations, final_residual, message=""):
        text = f"no convergence after {iterations} iterations (residual {final_residual:.3e})"
        if message:
            text += f": {message}"
        super().__init__(text)
        self.iterations = iterations
        self.final_residual = final_residual


class SingularJacobian(NoConvergence):
    def __init__(self, iterations, final_residual, pivot):
        super().__init__(iterations, final_residual, f"singular Jacobian (min pivot {pivot:.3e})")
        self.pivot = pivot


class BoundaryZero(PhiBranchError):
    """The map (nearly) vanishes on the boundary, so the degree is undefined."""


class NoAngleConvergence(PhiBranchError):
    pass


class SuspectDegenerate(PhiBranchError):
    pass


class ZeroOnCutLine(PhiBranchError):
    pass


class InitialTangentFailure(PhiBranchError):
    pass


class InvalidParams(PhiBranchError):
    pass


class ZeroIntegral(PhiBranchError):
    pass


class ConfigError(PhiBranchError):
    pass


class ParseError(ConfigError):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class UnknownKey(ConfigError):
    def __init__(self, key):
        super().__init__(f"unknown key {key!r}")
        self.key = key


class MissingRequired(ConfigError):
    def __init__(self, key):
        super().__init__(f"missing required key {key!r}")
        self.key = key


class IoError(PhiBranchError):
    """Writing or reading a branch log or diagram failed."""
