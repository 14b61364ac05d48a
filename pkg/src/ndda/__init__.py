"""Distributed dual averaging with second-order consensus (N-DDA) and baselines."""

from .algorithms import (AlgorithmKind, ControlSequence, DivergenceError, auxiliary_round,
                         cda_round, dda_round, dpg_round, ndda_init, ndda_round)
from .analysis import (check_admissible, fit_rate, max_admissible_a, rho_E, theorem_bound,
                       verify_trace)
from .graph import (Topology, WeightMatrix, erdos_renyi, metropolis_weights,
                    second_singular_value)
from .harness import RunConfig, certify, compare, preset, run
from .problem import generate_lasso, local_gradient, reference_solution, smoothness_constant
from .prox import DualProjector, L1Ball, bregman, da_project, project_l1

__version__ = "0.1.0"
