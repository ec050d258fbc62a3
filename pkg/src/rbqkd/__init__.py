"""Simulation and rate analysis of BB84 with a reusable pre-shared base string."""

from rbqkd.attacks import ChannelModel, KrausChannel, build_channel, parse_channel_spec, random_channel
from rbqkd.error_rates import ErrorRates, check_relations, error_rates_exact, error_rates_formula
from rbqkd.protocol import SessionConfig, run_reuse_loop, run_session
from rbqkd.rates import base_rate, binary_entropy, key_rate, key_threshold, total_key_ratio

__version__ = "0.1.0"

__all__ = [
    "ChannelModel",
    "ErrorRates",
    "KrausChannel",
    "SessionConfig",
    "base_rate",
    "binary_entropy",
    "build_channel",
    "check_relations",
    "error_rates_exact",
    "error_rates_formula",
    "key_rate",
    "key_threshold",
    "parse_channel_spec",
    "random_channel",
    "run_reuse_loop",
    "run_session",
    "total_key_ratio",
]
