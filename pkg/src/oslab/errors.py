"""Exception hierarchy.

Every error raised by the lab derives from :class:`OslabError` and carries an
``exit_code`` used by the command line runner: 1 for configuration problems,
2 for numerical failures and 3 for I/O.
"""


class OslabError(Exception):
    exit_code = 2


class ConfigError(OslabError):
    exit_code = 1

    def __init__(self, message, *, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class OutputError(OslabError):
    exit_code = 3


class NumericError(OslabError):
    exit_code = 2


# geometry
class InvalidConfig(NumericError):
    pass


# billiard
class Glancing(NumericError):
    pass


class NearGlancing(NumericError):
    pass


class NoHit(NumericError):
    pass


class InvalidWord(NumericError):
    pass


class NoConvergence(NumericError):
    pass


# quantization and spectral scans
class DimensionMismatch(NumericError):
    pass


class BadDimension(NumericError):
    pass


class Singular(NumericError):
    pass


class SingularPower(NumericError):
    pass


class SingularResolvent(NumericError):
    pass


class ConvergenceFailure(NumericError):
    pass


# wave and contour
class NotDissipative(NumericError):
    pass


class TailTooLarge(NumericError):
    pass


class PoleOnPath(NumericError):
    pass


class CFLViolation(NumericError):
    pass


class UnstableBlowup(NumericError):
    pass
