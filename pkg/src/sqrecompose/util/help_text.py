""" sqrecompose.util.help_text:

Help strings of the sqrecompose commands, keyed by command name. HelpText.short(key) gives the one-line summary shown
in the command list and HelpText.long(key) the full description, whose line breaks are kept by the
RawDescriptionHelpFormatter.
"""

import os
import sys

try:
    from importlib.metadata import PackageNotFoundError, version

    VERSION = version("sqrecompose")
except (ImportError, PackageNotFoundError):
    VERSION = "(unknown version)"


EXECUTABLE = os.path.basename(sys.argv[0])
MNEMONIC_HELP_MAP = {
    "global_help": f"""{EXECUTABLE} ({VERSION}): Recompose objects from multi-view silhouettes into superquadrics.

'{EXECUTABLE}' reconstructs an object as an ordered set of superquadrics from silhouette masks taken by calibrated
cameras. Superquadrics are added one at a time: each new one is seeded where the rendering error of the current set
asks for more volume, then all of them are optimized jointly through a differentiable silhouette renderer.

Input scenes are bundle directories holding a 'scene.json' manifest and one 8-bit PNG mask per view. Defaults follow
the reference setup (128x128 masks, 500 rays per view, 250 steps per superquadric, lambda 0.6, 10 superquadrics, 64^3
error grid) and may be overridden in a settings.ini file ([fit] and [gen] sections) or by flags.

Examples:

  -- Generate a synthetic three-part scene and fit it --
  {EXECUTABLE} gen scene/ --views 16 --count 3 --seed 7
  {EXECUTABLE} fit scene/ --out fit/ --k 3

  -- Evaluate and render the result --
  {EXECUTABLE} eval fit/composition.json scene/gt_composition.json
  {EXECUTABLE} render fit/composition.json scene/ --out renders/ --mesh

Exit codes: 0 success, 2 invalid input, 3 numeric failure.
""",
    "subparsers_description": f"""{EXECUTABLE} commands:

Each command has its own help, e.g. '{EXECUTABLE} fit --help'.
""",
    "fit": f"""Fit superquadrics to the silhouettes of a scene bundle

'{EXECUTABLE} fit' runs the iterative recomposition (or the joint baseline with '--sco') on a scene bundle. The output
directory receives:

  composition.json           final composition
  snapshots/iter_<k>.json    composition after every iteration (k superquadrics)
  trace.jsonl                one {{"iter", "step", "loss", "lr"}} record per optimization step
  config.json                effective fit settings
  grids/iter_<k>.raw|.json   error grids, with '--dump-grids'

Changing '--rays' rescales the learning rates by sqrt(rays / 500) unless they are set explicitly.

Examples:

  {EXECUTABLE} fit scene/ --out fit/ --k 10 --lambda 0.6
  {EXECUTABLE} fit scene/ --out fit-sco/ --sco --k 4
""",
    "render": f"""Render the silhouettes of a composition

'{EXECUTABLE} render' renders a composition file for every camera of a scene bundle and writes one 8-bit PNG per view
('render_<view>.png'). With '--mesh' a Wavefront OBJ of the composition is written alongside.

Example:

  {EXECUTABLE} render fit/composition.json scene/ --out renders/ --mesh
""",
    "eval": f"""Compare a composition against a reference composition

'{EXECUTABLE} eval' prints and writes a JSON report {{"iou", "chamfer_l1", "per_primitive_count"}}. IoU is computed on
an M^3 occupancy grid over the scene bounds and Chamfer-L1 on n surface points per shape.

Example:

  {EXECUTABLE} eval fit/composition.json scene/gt_composition.json --report fit/report.json
""",
    "gen": f"""Generate a synthetic scene bundle with ground truth

'{EXECUTABLE} gen' draws random superquadrics, places cameras on a sphere of three scene radii (or on a spherical cap
with '--cap-deg', presets 90, 45 and 22.5) and renders binary masks. The output directory receives the bundle and
'gt_composition.json'.

Example:

  {EXECUTABLE} gen scene/ --views 16 --count 3 --seed 7
  {EXECUTABLE} gen scene-cap/ --views 8 --cap-deg 45
""",
    "sweep": f"""Sweep one fit setting and tabulate the metrics

'{EXECUTABLE} sweep' fits a bundle once per value of lambda, of the number of views (the first n views are used) or of
the number of superquadrics, with a fixed seed. Rows (value, iou, chamfer, wall_time) are written as CSV. Metrics are
empty when the bundle has no 'gt_composition.json'.

Example:

  {EXECUTABLE} sweep scene/ --param lambda --values 0.4 0.5 0.6 0.7 0.8 --out lambda.csv
""",
}


class HelpText:
    """
    There are two styles of help text: short (for argument descriptions) and long for full descriptions. The short help
    text is the first line of the full help text.
    """

    @staticmethod
    def short(context_key: str, default: str = ""):
        """Short help message (first line of the long help) for a command or other key"""
        lines = MNEMONIC_HELP_MAP.get(context_key, default).splitlines()
        return lines[0] if lines else default

    @staticmethod
    def long(context_key: str, default: str = ""):
        """Long help message for a command or other key"""
        return MNEMONIC_HELP_MAP.get(context_key, default)
