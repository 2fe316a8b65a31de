from .core import (
    LOG_COLUMNS,
    ContactParams,
    EnvConfig,
    EpisodeResult,
    NumericalDivergence,
    PerturbationSchedule,
    RewardWeights,
    SimState,
    check_termination,
    compute_reward,
    dynamics_step,
    initial_state,
    pd_torques,
    rollout,
    write_log_csv,
)
from .terrain import Terrain, build_track, parse_track
