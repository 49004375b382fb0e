"""Discrete-event simulation of coordinated spatial reuse in multi-AP Wi-Fi."""
from .params import Deployment, SimParams, generate_deployment, make_params, make_symmetric_deployment
from .grouping import GroupPlan, optimize_plan
from .traffic import TrafficSpec, calibrate_load
from .mac import SimResult, run_cosr, run_dcf, simulate

__all__ = [
    "Deployment", "SimParams", "generate_deployment", "make_params", "make_symmetric_deployment",
    "GroupPlan", "optimize_plan", "TrafficSpec", "calibrate_load",
    "SimResult", "run_cosr", "run_dcf", "simulate",
]
