"""Miniature blimp inverted-pose simulator, TD3 trainer and evaluation harness."""

from ._core import (
    InvertEnv,
    command_from_force,
    default_params,
    derive_geometry,
    euler_from_rotation,
    eval_grid,
    integrate_rotation,
    load_params,
    motor_force,
    moving_average,
    neutral_extra_weight,
    rollout,
    rotation_error,
    sigma_at_episode,
    table2_defaults,
    train,
)

__all__ = [
    "InvertEnv",
    "command_from_force",
    "default_params",
    "derive_geometry",
    "euler_from_rotation",
    "eval_grid",
    "integrate_rotation",
    "load_params",
    "motor_force",
    "moving_average",
    "neutral_extra_weight",
    "rollout",
    "rotation_error",
    "sigma_at_episode",
    "table2_defaults",
    "train",
]
