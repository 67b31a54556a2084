"""Generalized communicating P systems and population protocols in the fair sequential mode."""

from .model import (
    Configuration,
    GcpsModel,
    ModelError,
    PopulationProtocol,
    Rule,
    RuleNotApplicable,
    Transition,
    Violation,
    applicable_rules,
    apply_rule,
    gcps_to_pp,
    pp_to_gcps,
    validate_model,
)

__version__ = "0.1.0"
