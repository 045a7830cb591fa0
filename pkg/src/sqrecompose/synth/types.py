""" sqrecompose.synth.types: exceptions raised by the synthetic scene generator """

from sqrecompose.common.error import SqRecomposeException


class GenSpecException(SqRecomposeException):
    """A generator setting violates its invariant"""


class GenerationExhausted(SqRecomposeException):
    """Rejection sampling could not produce a valid scene"""

    def __init__(self, message, attempts=0):
        super().__init__(message)
        self.attempts = attempts
