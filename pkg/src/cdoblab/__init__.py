"""Delay-tolerant lateral path-tracking simulation with a modified communication disturbance observer."""

from .cdob import Cdob, QFilterSpec, design_q
from .controller import DStabilitySpec, GainSchedule, PidGains, design_schedule, lookup_gains
from .paths import PRESETS, PresetGeometry, ReferencePath, make_preset_path
from .sim import Scenario, SimConfig, SimResult, run_scenario, sweep
from .vehicle import SchedulingConfig, TrackingState, VehicleParams, build_tracking_model

__version__ = "0.1.0"

__all__ = [
    "Cdob", "QFilterSpec", "design_q", "DStabilitySpec", "GainSchedule", "PidGains", "design_schedule",
    "lookup_gains", "PRESETS", "PresetGeometry", "ReferencePath", "make_preset_path", "Scenario", "SimConfig",
    "SimResult", "run_scenario", "sweep", "SchedulingConfig", "TrackingState", "VehicleParams",
    "build_tracking_model",
]
