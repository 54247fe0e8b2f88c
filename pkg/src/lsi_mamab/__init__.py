"""Multi-agent bandits with limited shared information.

Balanced-ETC collaboration, the 2-UCB single-agent baseline and the
end-of-game compensation/cost mechanism, plus an experiment harness.
"""
from .board import ProtocolViolation, PublicBoard, confidence_radius
from .engine import (ConfigError, Diagnostics, RunConfig, RunResult, collect_diagnostics,
                     replicate, simulate, theorem1_bound)
from .env import (AgentProfile, ArmModel, CoverageError, SharingStructure, make_balanced_instance,
                  make_imbalanced_instance, make_paired_instance, make_random_instance, sample_reward)
from .incentive import (AgentLedger, IncentiveOutcome, check_ir, compute_compensation, compute_cost,
                        delta_bracket, ucb_pull_floor)
from .policies import ActionDecision, UcbState, balanced_etc_decide, run_ucb_baseline, ucb_decide

__version__ = "0.1.0"
