"""Reservoir computing for synchronization-based inference across chaotic systems."""

from .dynamics import DatasetSplit, Scaler, SystemSpec, Trajectory, integrate, make_dataset, rk4_step
from .inference import DriveMask, auxiliary_test, run_autonomous, run_chain, run_driven, run_parallel
from .metrics import largest_lyapunov, pairwise_desync, sync_error, valid_prediction_time
from .reservoir import ReservoirConfig, build, run_teacher_forced
from .training import ReadoutMatrix, grid_search, ridge_solve, train

__version__ = "0.1.0"
