"""Speed control for a battery-limited UAV collecting IoT data.

Modules: :mod:`~uavspeed.env` (simulator), :mod:`~uavspeed.tabular`
(Q-learning), :mod:`~uavspeed.network` (dueling network),
:mod:`~uavspeed.d3ql` (deep dueling double Q-learning) and
:mod:`~uavspeed.harness` (evaluation and experiments).
"""
from .env import CHARGING, DEFAULT_CONFIG, EnvConfig, StepOutcome, UavEnv, UavState
from .harness import EvalReport, FixedSpeedPolicy, evaluate_policy

__all__ = ["CHARGING", "DEFAULT_CONFIG", "EnvConfig", "StepOutcome", "UavEnv", "UavState",
           "EvalReport", "FixedSpeedPolicy", "evaluate_policy"]
__version__ = "0.1.0"
