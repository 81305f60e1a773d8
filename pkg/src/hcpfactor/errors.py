"""Exception hierarchy shared by every module of the package."""


class HcpError(Exception):
    """Base class for all errors raised by hcpfactor."""


class PlatformError(HcpError, ValueError):
    pass


class EmptyPlatform(PlatformError):
    pass


class BufferConstraintViolation(PlatformError):
    pass


class NetworkKindMismatch(PlatformError):
    pass


class LevelOutOfRange(PlatformError, IndexError):
    pass


class MemoryOverflow(PlatformError):
    pass


class DimensionMismatch(HcpError, ValueError):
    pass


class ShapeError(HcpError, ValueError):
    pass


class PlatformTooDeep(ShapeError):
    pass


class NonSquareGrid(ShapeError):
    pass


class SingularPivot(HcpError, ArithmeticError):
    pass


class SingularPanel(HcpError, ArithmeticError):
    pass


class UnsupportedOrder(HcpError, ValueError):
    pass


class NoOpenRegion(HcpError, RuntimeError):
    pass


class UnbalancedRegions(HcpError, RuntimeError):
    pass
