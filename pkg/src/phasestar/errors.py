"""Exception hierarchy.

``ConfigError`` covers bad inputs (CLI exit code 2); ``DomainError`` covers
numerical-domain failures such as caustics or divergent sums (exit code 3).
"""


class PhaseStarError(Exception):
    pass


class ConfigError(PhaseStarError, ValueError):
    pass


class DomainError(PhaseStarError, ArithmeticError):
    pass


class GridMismatch(ConfigError):
    pass


class GridTooLarge(ConfigError):
    pass


class NotNormalized(ConfigError):
    pass


class DegreeOverflow(ConfigError):
    pass


class OrderTooLarge(ConfigError):
    pass


class OutOfRange(ConfigError):
    pass


class UnsupportedFamily(ConfigError):
    pass


class UnsupportedHamiltonian(ConfigError):
    pass


class DegenerateQuadratic(DomainError):
    pass


class BranchAmbiguity(DomainError):
    pass


class NonConvergent(DomainError):
    pass


class CausticSingularity(DomainError):
    pass


class CausticAtEndpoint(CausticSingularity):
    pass


class CausticCrossing(CausticSingularity):
    pass


class ZeroTime(DomainError):
    pass


class WindowTooSmall(DomainError):
    pass
