"""Sum-rate simulation of a MIMO multi-way channel with an intermittent UAV node."""

from .allocation import StreamAllocation, allocate_streams, dof_formula, weighted_dof
from .channel import (AntennaConfig, ChannelSet, Environment, Geometry,
                      IntermittencyModel, los_probability, sample_channel_set,
                      tau_from_environment)
from .schemes import SCHEMES, LinkBudget, RateReport
from .simulate import SimConfig, SweepResult, run_sweep

__version__ = "0.1.0"
