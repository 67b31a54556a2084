"""Execution of GCPS models under the supported derivation modes."""

from .compiled import CompiledModel, compile_model
from .core import (
    DEFAULT_SEED,
    Halted,
    Mode,
    RunSpec,
    Trajectory,
    derive_seed,
    is_halting,
    make_rng,
    mode_from_name,
    propensities,
    propensity,
    run,
    step_equiprobable,
    step_gillespie_direct,
    step_gillespie_first_reaction,
    step_maximally_parallel,
    step_maximally_parallel_detailed,
    successors,
)
from .kernel import BACKEND, BACKENDS

__all__ = [
    "BACKEND", "BACKENDS", "CompiledModel", "DEFAULT_SEED", "Halted", "Mode", "RunSpec",
    "Trajectory", "compile_model", "derive_seed", "is_halting", "make_rng", "mode_from_name",
    "propensities", "propensity", "run", "step_equiprobable", "step_gillespie_direct",
    "step_gillespie_first_reaction", "step_maximally_parallel",
    "step_maximally_parallel_detailed", "successors",
]
