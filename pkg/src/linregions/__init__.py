"""Exact counts, probabilistic lower bounds and analytical upper bounds on
the number of linear regions of ReLU networks."""

from .bounds import (LayerActivityProfile, UpperBoundReport, build_profiles,
                     configuration_upper_bound, empirical_upper_bound, montufar_bound,
                     raghu_bound, upper_bounds)
from .counting import CountResult, count_bruteforce, count_exact, count_sampled
from .estimators import ActivationPatternEncoder, RegionCounter
from .formulation import (Leaning, Stability, UnitBounds, build_counting_milp,
                          convex_outer_polygon, region_lp, tighten_bounds)
from .lp import LinearProgram, LpStatus, Row, solve_lp
from .milp import MilpModel, MilpStatus, enumerate_solutions, solve_milp
from .mipbound import (ParityConstraint, ProbLowerBound, lb_probability, parity_cuts,
                       required_iterations, run_mipbound, sample_parity)
from .model import (ActivationPattern, InputBox, Layer, NetworkModel, forward,
                    generate_random_network, load_network, maps, save_network)

__version__ = "0.1.0"

__all__ = [
    "ActivationPattern", "ActivationPatternEncoder", "CountResult", "InputBox", "Layer",
    "LayerActivityProfile", "Leaning", "LinearProgram", "LpStatus", "MilpModel",
    "MilpStatus", "NetworkModel", "ParityConstraint", "ProbLowerBound", "RegionCounter",
    "Row", "Stability", "UnitBounds", "UpperBoundReport", "build_counting_milp",
    "build_profiles", "configuration_upper_bound", "convex_outer_polygon",
    "count_bruteforce", "count_exact", "count_sampled", "empirical_upper_bound",
    "enumerate_solutions", "forward", "generate_random_network", "lb_probability",
    "load_network", "maps", "montufar_bound", "parity_cuts", "raghu_bound", "region_lp",
    "required_iterations", "run_mipbound", "sample_parity", "save_network", "solve_lp",
    "solve_milp", "tighten_bounds", "upper_bounds",
]
