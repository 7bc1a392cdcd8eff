"""PINN loss, optimizers and the multi-restart training driver."""

from .driver import LOG_COLUMNS, RestartSummary, TrainConfig, TrainResult, build_model, restart_seeds, train, write_log_csv
from .loss import LossResult, LossState, evaluate_loss, loss, residual, update_adaptive_weights
from .optim import AdamState, LbfgsResult, LbfgsState, adam_step, lbfgs_run, strong_wolfe

__all__ = [
    "LOG_COLUMNS",
    "AdamState",
    "LbfgsResult",
    "LbfgsState",
    "LossResult",
    "LossState",
    "RestartSummary",
    "TrainConfig",
    "TrainResult",
    "adam_step",
    "build_model",
    "evaluate_loss",
    "lbfgs_run",
    "loss",
    "residual",
    "restart_seeds",
    "strong_wolfe",
    "train",
    "update_adaptive_weights",
    "write_log_csv",
]
