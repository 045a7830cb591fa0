"""Sphinx configuration of the sqrecompose API reference"""

# pylint: disable=invalid-name

from datetime import datetime
from importlib import metadata
from pathlib import Path

project = "sqrecompose"
release = metadata.version(project)
version = ".".join(release.split(".")[:2])
copyright = f"{datetime.now().year}, sqrecompose developers"  # pylint: disable=redefined-builtin

extensions = [
    "sphinx.ext.napoleon",
    "sphinx.ext.viewcode",
    "autoapi.extension",
]

master_doc = "index"
html_theme = "sphinx_rtd_theme"
html_show_sphinx = False

autoapi_type = "python"
autoapi_dirs = [str(Path(__file__).parents[1] / "src")]
autoapi_root = "api"
