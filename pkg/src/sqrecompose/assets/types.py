""" sqrecompose.assets.types: exceptions raised while reading and writing scene files """

from sqrecompose.common.error import SqRecomposeException
from sqrecompose.model.types import NonRigidPose  # noqa: F401  raised while loading camera poses


class AssetException(SqRecomposeException):
    """Base of all file format errors"""


class ManifestParse(AssetException):
    """Scene manifest is missing, unreadable or malformed"""


class ImageDecode(AssetException):
    """A silhouette image could not be read"""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path


class DimensionMismatch(AssetException):
    """A silhouette does not match the size declared by its camera"""


class SchemaVersionMismatch(AssetException):
    """Composition file was written with an unsupported schema version"""


class CompositionValidation(AssetException):
    """Composition file content violates the superquadric invariants"""
