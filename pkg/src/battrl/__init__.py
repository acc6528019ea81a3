"""Battery arbitrage/regulation RL toolkit with exact cycle-based degradation.

Layout:

- ``rainflow``: offline cycle decomposition, cycle costing, linearization
- ``engine``: online per-step degradation-cost tracker
- ``env``: battery MDP (energy arbitrage + frequency regulation + degradation)
- ``dqn``: from-scratch deep Q-learning (numpy)
- ``data``: market profiles, CSV/weights file formats, synthetic days
- ``report``: evaluation, policy comparison, DP arbitrage bound, fuzz checks
- ``cli``: command-line entry points
"""

from battrl.data import MarketProfile, SyntheticSpec, load_profile, synth_profile
from battrl.dqn import QNetworkParams, TrainConfig, train
from battrl.engine import CycleTracker
from battrl.env import BatteryEnv, BatteryParams, CostParams
from battrl.kernels import backend_name
from battrl.rainflow import (
    CycleRecord,
    DegradationParams,
    RainflowResult,
    SocTrajectory,
    cycle_cost,
    extract_turning_points,
    linearized_coefficient,
    rainflow_decompose,
)
from battrl.report import compare_cd_ld, dp_arbitrage_oracle, evaluate, verify_degradation

__version__ = "0.1.0"

__all__ = [
    "BatteryEnv",
    "BatteryParams",
    "CostParams",
    "CycleRecord",
    "CycleTracker",
    "DegradationParams",
    "MarketProfile",
    "QNetworkParams",
    "RainflowResult",
    "SocTrajectory",
    "SyntheticSpec",
    "TrainConfig",
    "backend_name",
    "compare_cd_ld",
    "cycle_cost",
    "dp_arbitrage_oracle",
    "evaluate",
    "extract_turning_points",
    "linearized_coefficient",
    "load_profile",
    "rainflow_decompose",
    "synth_profile",
    "train",
    "verify_degradation",
    "__version__",
]
