"""Exception types shared across the package."""


class CmvError(Exception):
    """Base class for every error raised by cmvlax."""


class ModulusOutOfRange(CmvError, ValueError):
    def __init__(self, index, value=None):
        self.index = index
        self.value = value
        msg = f"|alpha_{index}| must be < 1"
        if value is not None:
            msg += f" (got {abs(value):.17g})"
        super().__init__(msg)


class BadBoundaryPhase(CmvError, ValueError):
    def __init__(self, value):
        self.value = value
        super().__init__(f"finite boundary coefficient must be exactly -1, got {value!r}")


class OddPeriodNotCanonicalized(CmvError, ValueError):
    pass


class IndexOutOfDomain(CmvError, IndexError):
    pass


class NonSquare(CmvError, ValueError):
    pass


class WindowTooSmall(CmvError, ValueError):
    pass


class RhoDegenerate(CmvError, ArithmeticError):
    def __init__(self, index, rho):
        self.index = index
        self.rho = rho
        super().__init__(f"rho_{index} = {rho:.3g} is too small for 1/rho factors")


class GradientUnavailable(CmvError, RuntimeError):
    pass


class StepTooLarge(CmvError, ValueError):
    pass


class DimensionTooLarge(CmvError, ValueError):
    pass


class ZeroArgument(CmvError, ZeroDivisionError):
    pass


class DegreeMismatch(CmvError, ValueError):
    pass


class NotStairShaped(CmvError, ValueError):
    pass


class TruncationTooTight(CmvError, ValueError):
    pass


class DiskExit(CmvError, ArithmeticError):
    def __init__(self, t, index, modulus):
        self.t = t
        self.index = index
        self.modulus = modulus
        super().__init__(f"|alpha_{index}| = {modulus:.12g} left the disk at t = {t:.6g}")


class StepRejected(CmvError, ArithmeticError):
    pass
