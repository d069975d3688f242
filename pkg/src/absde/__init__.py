"""Solvers and comparison checks for scalar anticipated BSDEs.

The lattice engine (:func:`solve_absde`) is exact in its conditional
expectations; the Monte Carlo engine (:func:`solve_absde_mc`) is an
independent regression-based cross-check.
"""

from .conditions import (ConditionReport, DomainBox, SamplerConfig, check_lipschitz_sampled,
                         check_order_conditions_sampled, check_square_integrability,
                         check_sufficient_conditions)
from .config import ExperimentConfig
from .generators import (REGISTRY, AnticipatedQuery, GeneratorSpec, PointQuery, TerminalData,
                         evaluate_generator, generator_from_text)
from .harness import run_comparison, run_convergence_study, run_equality_check
from .lattice import BinomialLattice, TimeGrid, build_grid
from .montecarlo import (PathEnsemble, RegressionBasis, regress_conditional, simulate_paths,
                         solve_absde_mc)
from .partition import (DelayPair, TimePartition, align_partition_to_grid, compute_partition,
                        validate_delay_assumptions)
from .solver import AbsdeProblem, solve_absde, solve_plain_bsde
from .surface import SolutionSurface, resolve_anticipated_query

__version__ = "0.1.0"
