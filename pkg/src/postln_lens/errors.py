"""Exception hierarchy. Each class carries the CLI exit code for its failure class."""


class LensError(Exception):
    exit_code = 2


class ConfigError(LensError, ValueError):
    """Shapes or hyperparameters that do not fit together."""


class InputError(LensError, ValueError):
    """Bad arguments or data supplied by the caller."""


class FormatError(LensError):
    exit_code = 3


class NoLegalMovesError(InputError):
    def __init__(self, msg: str = "no legal moves"):
        super().__init__(msg)


class RuleError(InputError):
    """Illegal move for the toy game."""


class NumericError(LensError, ArithmeticError):
    exit_code = 1


class VerificationError(LensError):
    exit_code = 1
