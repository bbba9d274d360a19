"""Variable-length random coding over two-user discrete memoryless multiple-access channels."""

from .channel import McChannel, builtin_channel, parse_channel_name, validate_channel
from .decoders import DecoderConfig, Rule, TrialRecord, run_trial
from .infomeasures import ChannelSummary, InfoTriple, ProductInput, WalkKind, channel_summary, info_triple
from .regions import RateRegion, RegionQuery, block_capacity_region, outer_region
from .schemes import Codebook, SchemeSpec
from .simharness import ExperimentConfig, SimSummary, run_experiment

__version__ = "0.1.0"

__all__ = [
    "McChannel",
    "builtin_channel",
    "parse_channel_name",
    "validate_channel",
    "DecoderConfig",
    "Rule",
    "TrialRecord",
    "run_trial",
    "ChannelSummary",
    "InfoTriple",
    "ProductInput",
    "WalkKind",
    "channel_summary",
    "info_triple",
    "RateRegion",
    "RegionQuery",
    "block_capacity_region",
    "outer_region",
    "Codebook",
    "SchemeSpec",
    "ExperimentConfig",
    "SimSummary",
    "run_experiment",
]
