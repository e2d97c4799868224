"""Manifests, pairing, configuration, the synthetic corpus and the end-to-end commands."""
from .commands import cmd_augment, cmd_evaluate, cmd_train, cmd_transform, load_artifacts, transform_waveform
from .config import PipelineConfig, load_config, parse_config
from .manifest import CorpusManifest, ManifestEntry, validate_manifest
from .pairs import Pair, PairPlan, build_pairs
from .synth_corpus import synth_corpus

__all__ = [
    "CorpusManifest", "ManifestEntry", "Pair", "PairPlan", "PipelineConfig", "build_pairs",
    "cmd_augment", "cmd_evaluate", "cmd_train", "cmd_transform", "load_artifacts", "load_config",
    "parse_config", "synth_corpus", "transform_waveform", "validate_manifest",
]
