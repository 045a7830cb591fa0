""" sqrecompose.evaluation.types: exceptions raised by the evaluation metrics """

from sqrecompose.common.error import SqRecomposeException


class GridMismatch(SqRecomposeException):
    """Occupancy grids do not share resolution and placement"""


class EmptyPointSet(SqRecomposeException):
    """A point set without points cannot be compared"""
