"""Context-aware reinforcement learning under randomized dynamics.

A small float64 autodiff core (MLP, LSTM, Adam), soft actor-critic over
composed (state, context) inputs, context estimators with three supervision
strategies, two contextual environments, and a Latin-hypercube
train/validate/test evaluation protocol.
"""

from .context import Arch, ContextModel, Mode, Strategy, compose_policy_input
from .envs import EnvFault, PendulumEnv, PushingEnv, StepResult, make_env
from .lhs import lhs_sample
from .nets import AdamState, ParamSet, adam_step, apply_network
from .replay import Batch, ContextSet, ReplayBuffer, Transition
from .sac import SACConfig, SACLearner
from .spaces import ConfigError, ContextSpace, ContextVector
from .stats import WelchResult, welch_t_test
from .tensor import Tape, Var
from .trainer import load_checkpoint, run_training, save_checkpoint

__all__ = [
    "AdamState",
    "Arch",
    "Batch",
    "ConfigError",
    "ContextModel",
    "ContextSet",
    "ContextSpace",
    "ContextVector",
    "EnvFault",
    "Mode",
    "ParamSet",
    "PendulumEnv",
    "PushingEnv",
    "ReplayBuffer",
    "SACConfig",
    "SACLearner",
    "StepResult",
    "Strategy",
    "Tape",
    "Transition",
    "Var",
    "WelchResult",
    "adam_step",
    "apply_network",
    "compose_policy_input",
    "lhs_sample",
    "load_checkpoint",
    "make_env",
    "run_training",
    "save_checkpoint",
    "welch_t_test",
]

__version__ = "0.1.0"
