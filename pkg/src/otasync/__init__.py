"""Over-the-air TO/CFO synchronisation for distributed OFDM sensing nodes."""
from .config import NodeState, OfdmConfig, Scene, Target, load_scene
from .estimators import OffsetEstimate, estimate_offsets
from .harness import ExperimentConfig, ResultRecord, emit_csv, preset_config, run_experiment
from .network import SyncResult, apply_compensation, synchronize_network
from .signal_model import measure_channel, synthesize_channel

__version__ = "0.1.0"

__all__ = [
    "NodeState", "OfdmConfig", "Scene", "Target", "load_scene",
    "OffsetEstimate", "estimate_offsets",
    "ExperimentConfig", "ResultRecord", "emit_csv", "preset_config", "run_experiment",
    "SyncResult", "apply_compensation", "synchronize_network",
    "measure_channel", "synthesize_channel",
]
