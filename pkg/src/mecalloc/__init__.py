"""Energy-minimal time allocation and task sequencing for multi-user MEC offloading."""

from .closed_form import duration_from_lambda, solve_lambda, solve_negligible
from .constrained import kkt_residual, solve_duration_given_sequence
from .energy import EnergyBreakdown, required_power, total_weighted_energy, transmit_energy
from .errors import DomainError, FormatError, InfeasibleError, MecAllocError, SizeError
from .harness import (ScenarioConfig, SweepRow, emit_csv, emit_instance_json,
                      generate_instance, load_config, parse_instance_json, run_sweep)
from .model import Allocation, Instance, Schedule, SolveResult, SystemParams, TaskSpec, exec_duration
from .schedule import DurationTriple, build_schedule, check_feasible, makespan, makespan_relaxed
from .sequencing import brute_force_sequence, johnson_condition_holds, johnson_sequence
from .solvers import (baseline_equal_split, baseline_lemma1_horizon, solve_optimal,
                      solve_suboptimal)
from .special import lambert_w0

__version__ = "0.1.0"
