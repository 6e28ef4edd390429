"""Secrecy-rate optimization for IRS-aided downlinks with low-resolution phase shifters."""
from .channel import (
    BeamformingSet,
    ChannelSet,
    PhaseConfig,
    SystemConfig,
    generate_channels,
    secrecy_rates,
)

__all__ = [
    "BeamformingSet",
    "ChannelSet",
    "PhaseConfig",
    "SystemConfig",
    "generate_channels",
    "secrecy_rates",
]
__version__ = "0.1.0"
