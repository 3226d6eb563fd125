"""Average-reward MDPs with probabilistic reward machines."""

from .agents import Agent, AgentConfig, make_agent
from .cross_product import (
    StructureReport,
    TabularMdp,
    build_cross_product,
    diameter,
    expected_hitting_times,
    reachable_rm_set,
    rm_restricted_diameter,
    structure_report,
    validate_closure,
)
from .envs import EnvSpec, build_env, cycle_mdprm, laundry_gridworld, lower_bound_mdprm, random_mdprm
from .errors import ConvergenceError, LabelError, MdprmError, NonCommunicatingError, ValidationError
from .harness import RegretTrace, RunConfig, export_csv, import_csv, run, sweep
from .labeled_mdp import JointState, LabeledMdp, Mdprm, Transition, label_of, step_env, validate_mdp
from .planner import evi, maxp_b, maxp_l1, optimal_gain, policy_gain
from .rm import EMPTY, RewardDistribution, RewardMachine, is_deterministic, mean_reward, step_rm, validate_rm

__version__ = "0.1.0"
