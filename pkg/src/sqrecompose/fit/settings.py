"""
sqrecompose.fit.settings:

Fit hyperparameters and the INI settings layer. Defaults live on the FitConfig and GenSpec dataclasses; a settings file
(section [fit] for FitConfig fields and [gen] for GenSpec fields) may override them and command-line flags override the
file. The settings file is 'settings.ini' in the working directory unless SQRECOMPOSE_SETTINGS_FILE or an explicit path
names another one.
"""

import configparser
import dataclasses
import logging
import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from sqrecompose.model.render import RenderConfig
from sqrecompose.model.superquadric import ShapeBounds
from sqrecompose.synth.generator import GenSpec
from .types import FitConfigException

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitConfig:
    """All hyperparameters of one fit

    Learning rates are calibrated to 500 rays per view. gamma_opt is the logistic slope at the start of every
    optimization phase (smooth gradients) and gamma_eval the slope of final renders and error grids. With gamma_anneal
    the slope grows geometrically from gamma_opt to gamma_eval over each phase (one ISCO iteration, or the whole SCO
    run), so the fit ends on the silhouettes it is evaluated against. substeps subdivides the marching segments of
    optimization renders.
    """

    max_superquadrics: int = 10
    steps_per_iter: int = 250
    rays_per_view: int = 500
    image_size: int = 128
    lam: float = 0.6
    gamma_opt: float = 20.0
    gamma_eval: float = 150.0
    gamma_anneal: bool = True
    grid_resolution: int = 64
    smoothing_sigma: float = 1.5
    lr_start: float = 0.01
    lr_end: float = 0.001
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    early_stop_threshold: float = 0.0
    seed: int = 0
    samples_per_ray: int = 96
    substeps: int = 1
    init_radius_fraction: float = 0.1
    eps_min: float = 0.1
    eps_max: float = 1.9
    grid_from_cameras: bool = False

    def __post_init__(self):
        checks = [
            ("max_superquadrics", self.max_superquadrics >= 1, "at least 1"),
            ("steps_per_iter", self.steps_per_iter >= 0, "non-negative"),
            ("rays_per_view", self.rays_per_view >= 1, "at least 1"),
            ("image_size", self.image_size >= 0, "non-negative (0 keeps the native size)"),
            ("lam", 0.0 <= self.lam <= 1.0, "within [0, 1]"),
            ("gamma_opt", self.gamma_opt > 0, "positive"),
            ("gamma_eval", self.gamma_eval > 0, "positive"),
            ("grid_resolution", self.grid_resolution >= 2, "at least 2"),
            ("smoothing_sigma", self.smoothing_sigma >= 0, "non-negative"),
            ("lr_end", self.lr_end > 0, "positive"),
            ("lr_start", self.lr_start >= self.lr_end, "at least lr_end"),
            ("adam_beta1", 0.0 <= self.adam_beta1 < 1.0, "within [0, 1)"),
            ("adam_beta2", 0.0 <= self.adam_beta2 < 1.0, "within [0, 1)"),
            ("adam_eps", self.adam_eps > 0, "positive"),
            ("early_stop_threshold", self.early_stop_threshold >= 0, "non-negative"),
            ("samples_per_ray", self.samples_per_ray >= 2, "at least 2"),
            ("substeps", self.substeps >= 1, "at least 1"),
            ("init_radius_fraction", 0 < self.init_radius_fraction < 1, "within (0, 1)"),
            ("eps_min", 0 < self.eps_min < self.eps_max, "within (0, eps_max)"),
            ("eps_max", self.eps_max <= 2.0, "at most 2"),
        ]
        for name, valid, expectation in checks:
            if not valid:
                raise FitConfigException(
                    f"Fit setting '{name}' must be {expectation}, got {getattr(self, name)}",
                    name,
                )

    @property
    def total_steps(self) -> int:
        return self.max_superquadrics * self.steps_per_iter

    def shape_bounds(self, scene_radius: float) -> ShapeBounds:
        return ShapeBounds.for_scene(scene_radius, self.eps_min, self.eps_max)

    def render_config(self, seed: int, gamma: Optional[float] = None) -> RenderConfig:
        return RenderConfig(
            self.gamma_opt if gamma is None else gamma,
            self.samples_per_ray,
            seed,
            substeps=self.substeps,
        )

    def to_jsonable(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


class SettingType(Enum):
    """Designates the type of the setting"""

    INTEGER = 0
    FLOAT = 1
    BOOLEAN = 2
    STRING = 3
    INTEGER_PAIR = 4
    FLOAT_PAIR = 5


def _fields_of(cls, pairs: Dict[str, SettingType]) -> List[Tuple[str, SettingType, Any]]:
    defaults = cls()
    return [(name, kind, getattr(defaults, name)) for name, kind in pairs.items()]


class IniSettings:
    """Class to load fit and generator settings from INI files"""

    DEF_FILE = "settings.ini"
    SET_ENV = "SQRECOMPOSE_SETTINGS_FILE"

    FIT_FIELDS = _fields_of(
        FitConfig,
        {
            "max_superquadrics": SettingType.INTEGER,
            "steps_per_iter": SettingType.INTEGER,
            "rays_per_view": SettingType.INTEGER,
            "image_size": SettingType.INTEGER,
            "lam": SettingType.FLOAT,
            "gamma_opt": SettingType.FLOAT,
            "gamma_eval": SettingType.FLOAT,
            "gamma_anneal": SettingType.BOOLEAN,
            "grid_resolution": SettingType.INTEGER,
            "smoothing_sigma": SettingType.FLOAT,
            "lr_start": SettingType.FLOAT,
            "lr_end": SettingType.FLOAT,
            "adam_beta1": SettingType.FLOAT,
            "adam_beta2": SettingType.FLOAT,
            "adam_eps": SettingType.FLOAT,
            "early_stop_threshold": SettingType.FLOAT,
            "seed": SettingType.INTEGER,
            "samples_per_ray": SettingType.INTEGER,
            "substeps": SettingType.INTEGER,
            "init_radius_fraction": SettingType.FLOAT,
            "eps_min": SettingType.FLOAT,
            "eps_max": SettingType.FLOAT,
            "grid_from_cameras": SettingType.BOOLEAN,
        },
    )

    GEN_FIELDS = _fields_of(
        GenSpec,
        {
            "count_range": SettingType.INTEGER_PAIR,
            "alpha_range": SettingType.FLOAT_PAIR,
            "epsilon_range": SettingType.FLOAT_PAIR,
            "position_radius": SettingType.FLOAT,
            "random_rotation": SettingType.BOOLEAN,
            "disjoint": SettingType.BOOLEAN,
            "views": SettingType.INTEGER,
            "viewpoints": SettingType.STRING,
            "cap_deg": SettingType.FLOAT,
            "mask_noise": SettingType.FLOAT,
            "image_size": SettingType.INTEGER,
            "scene_radius": SettingType.FLOAT,
            "gamma": SettingType.FLOAT,
            "samples_per_ray": SettingType.INTEGER,
            "seed": SettingType.INTEGER,
        },
    )

    @staticmethod
    def convert(text: str, settings_type: SettingType) -> Any:
        """Converts the text of one setting to its declared type, raising ValueError on failure"""
        text = text.strip()
        if settings_type == SettingType.INTEGER:
            return int(text)
        if settings_type == SettingType.FLOAT:
            return float(text)
        if settings_type == SettingType.BOOLEAN:
            lowered = text.lower()
            if lowered not in configparser.ConfigParser.BOOLEAN_STATES:
                raise ValueError(f"not a boolean: {text}")
            return configparser.ConfigParser.BOOLEAN_STATES[lowered]
        if settings_type in (SettingType.INTEGER_PAIR, SettingType.FLOAT_PAIR):
            parts = [part.strip() for part in text.split(",")]
            if len(parts) != 2:
                raise ValueError(f"expected two comma-separated values, got {text}")
            cast = int if settings_type == SettingType.INTEGER_PAIR else float
            return (cast(parts[0]), cast(parts[1]))
        return text

    @staticmethod
    def read_setting(
        config_parser: Optional[configparser.ConfigParser],
        section: str,
        key: str,
        settings_type: SettingType,
        default: Any,
        ini_file: Path,
    ):
        """Reads an individual setting, falling back to its default"""
        if config_parser is None or not config_parser.has_option(section, key):
            return default
        text = config_parser.get(section, key)
        try:
            return IniSettings.convert(text, settings_type)
        except ValueError as exc:
            msg = f"Invalid value '{text}' for '{key}' in section '[{section}]' of '{ini_file}': {exc}"
            raise FitConfigException(msg, key) from exc

    @staticmethod
    def find_settings_file(settings_file: Optional[Path] = None) -> Tuple[Path, bool]:
        """Resolves the settings file: explicit path, then environment variable, then the working directory

        Returns:
            (path, explicitly requested)
        """
        if settings_file is not None:
            return Path(settings_file).resolve(), True
        if os.environ.get(IniSettings.SET_ENV):
            return Path(os.environ[IniSettings.SET_ENV]).resolve(), True
        return (Path.cwd() / IniSettings.DEF_FILE).resolve(), False

    @staticmethod
    def load(settings_file: Optional[Path] = None) -> Dict[str, Any]:
        """
        Load settings from the specified file, or the file named by the environment, or settings.ini in the working
        directory. A missing file yields the defaults.

        :param settings_file: file to load settings from (in INI format)
        :return: {"settings_file": path, "fit": {...}, "gen": {...}}
        """
        settings_file, explicit = IniSettings.find_settings_file(settings_file)
        confparse = None
        if settings_file.exists():
            confparse = configparser.ConfigParser()
            try:
                confparse.read(settings_file)
            except configparser.Error as exc:
                raise FitConfigException(f"Cannot parse settings file '{settings_file}': {exc}") from exc
        elif explicit:
            LOGGER.warning("%s does not exist", settings_file)

        settings = {"settings_file": settings_file}
        for section, fields in (("fit", IniSettings.FIT_FIELDS), ("gen", IniSettings.GEN_FIELDS)):
            settings[section] = {
                key: IniSettings.read_setting(
                    confparse, section, key, settings_type, default, settings_file
                )
                for key, settings_type, default in fields
            }
            if confparse is not None and confparse.has_section(section):
                known = {key for key, _, _ in fields}
                for key in confparse.options(section):
                    if key not in known:
                        LOGGER.warning(
                            "Unknown setting '%s' in section '[%s]' of '%s'", key, section, settings_file
                        )
        return settings


def merge_settings(cls, values: Dict[str, Any], overrides: Dict[str, Any]):
    """Builds a settings dataclass from file values with the non-None overrides applied on top"""
    merged = dict(values)
    merged.update({key: value for key, value in overrides.items() if value is not None})
    return cls(**merged)
