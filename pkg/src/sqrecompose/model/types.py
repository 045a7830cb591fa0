""" sqrecompose.model.types: exceptions raised by the geometric and rendering model """

from sqrecompose.common.error import SqRecomposeException


class NonFiniteIntrinsics(SqRecomposeException):
    """Camera intrinsics are not usable (non-positive or non-finite focal length)"""


class NonFiniteGradient(SqRecomposeException):
    """A gradient entry evaluated to NaN or Inf"""

    def __init__(self, message, entries=None):
        super().__init__(message)
        self.entries = entries


class EmptyComposition(SqRecomposeException):
    """Operation requires at least one superquadric"""


class InvalidRayBatch(SqRecomposeException):
    """Ray batch is empty or inconsistent"""


class NonRigidPose(SqRecomposeException):
    """Camera pose is not a proper rigid transform"""
