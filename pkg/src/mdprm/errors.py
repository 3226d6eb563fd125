class MdprmError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(MdprmError):
    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class LabelError(MdprmError):
    """A label was emitted where the reward machine does not expect it."""


class NonCommunicatingError(MdprmError):
    pass


class ConvergenceError(MdprmError):
    pass


class TraceFormatError(MdprmError):
    pass
