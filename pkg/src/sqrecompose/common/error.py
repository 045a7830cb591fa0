""" Error and exception definitions for sqrecompose """


class SqRecomposeException(Exception):
    """Base sqrecompose exception"""
