""" sqrecompose.fit.types: exceptions raised while fitting compositions """

from sqrecompose.common.error import SqRecomposeException


class FitConfigException(SqRecomposeException):
    """A fit setting violates its invariant or could not be parsed"""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class DegenerateErrorField(SqRecomposeException):
    """Error grid carries no descent signal, the reconstruction error is already negligible"""

    def __init__(self, message, peak=0.0):
        super().__init__(message)
        self.peak = peak


class EmptySilhouettes(SqRecomposeException):
    """No view contains any object pixel"""
