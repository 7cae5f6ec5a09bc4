"""Particle solver for the gyro-averaged Vlasov-Poisson limit and its epsilon-scaled parent."""

from .core import Ensemble, Frame, PhysicalParams, TrajectoryRecord, from_gyro, to_gyro
from .diagnostics import electric_energy, moments, trajectory_error
from .epsilon_model import SplitStepConfig, filtered_trajectory, integrate_full
from .kernel import gyro_average_oracle, gyro_kernel, gyro_kernel_gradients
from .limit_model import IntegratorConfig, Scheme, integrate
from .treecode import fast_velocity_field

__all__ = [
    "Ensemble", "Frame", "PhysicalParams", "TrajectoryRecord", "from_gyro", "to_gyro",
    "electric_energy", "moments", "trajectory_error",
    "SplitStepConfig", "filtered_trajectory", "integrate_full",
    "gyro_average_oracle", "gyro_kernel", "gyro_kernel_gradients",
    "IntegratorConfig", "Scheme", "integrate", "fast_velocity_field",
]
