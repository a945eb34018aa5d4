"""Scheduling a single server over ON/OFF channels with a one-slot switchover delay."""

from .channel import ChannelParams
from .policies import PolicySpec
from .region import RateRegion, closed_form_two_queue, corners_via_sweep, sum_rate_upper_bound
from .sim import ArrivalSpec, SimConfig, SimStats, run, run_saturated

__all__ = [
    "ArrivalSpec",
    "ChannelParams",
    "PolicySpec",
    "RateRegion",
    "SimConfig",
    "SimStats",
    "closed_form_two_queue",
    "corners_via_sweep",
    "run",
    "run_saturated",
    "sum_rate_upper_bound",
]
