from .certificates import (Certificate, SimplexVerdict, bound_violations, certify_bound,
                           certify_nonvanishing, hull_avoids_origin)
from .kernel import KernelResult, avoid_zero, avoid_zero_result, prescale_factor
from .oracle import oracle_constant_shift
from .regions import LevelSets, ShrinkSystem, level_sets, shrink

__all__ = [
    "Certificate", "SimplexVerdict", "bound_violations", "certify_bound", "certify_nonvanishing",
    "hull_avoids_origin", "KernelResult", "avoid_zero", "avoid_zero_result", "prescale_factor",
    "oracle_constant_shift", "LevelSets", "ShrinkSystem", "level_sets", "shrink",
]
