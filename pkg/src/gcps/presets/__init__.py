"""Models shipped with the package, loadable by name."""

from importlib import resources

from ..dsl import parse_model
from ..model import GcpsModel

PRESETS = ("lotka-renewable", "lotka-finite", "sqrt2", "pure-death")


def preset_text(name: str) -> str:
    name = name.removesuffix(".gcps")
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return resources.files(__package__).joinpath(f"{name}.gcps").read_text(encoding="utf-8")


def load_preset(name: str) -> GcpsModel:
    return parse_model(preset_text(name))
