"""
Exceptions raised by dlsvm.
Everything derives from DlsvmError so main.py can report and exit in one place.
"""


class DlsvmError(Exception):
    pass


class ShapeError(DlsvmError, ValueError):
    pass


class DomainError(DlsvmError, ValueError):
    pass


class StateError(DlsvmError, RuntimeError):
    pass


class DegenerateInputError(DomainError):
    pass


class ConfigError(DlsvmError):
    pass


class DivergenceError(DlsvmError, FloatingPointError):
    pass


class IdxParseError(DlsvmError):
    pass


class BadMagicError(IdxParseError):
    pass


class TruncatedPayloadError(IdxParseError):
    pass


class CountMismatchError(IdxParseError):
    pass


class GradcheckError(DlsvmError):
    """
    A finite difference check disagreed with an analytic gradient.

    Attributes:
        tensor (str): Name of the checked tensor.
        index (tuple): Offending element.
        analytic (float): Gradient from backward().
        numeric (float): Central difference estimate.
    """

    def __init__(self, tensor: str, index: tuple, analytic: float, numeric: float):
        self.tensor = tensor
        self.index = index
        self.analytic = analytic
        self.numeric = numeric
        super().__init__(
            f"{tensor}{list(index)}: analytic {analytic:.9g} vs numeric {numeric:.9g}"
        )
