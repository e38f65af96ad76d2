"""Preference data: containers, synthetic generation, noise and file I/O."""
from .dataset import PreferenceExample, PreferenceDataset, canonicalize, canonicalize_dataset, split
from .generator import GenConfig, generate, sample_levels
from .noise import NoiseKind, inject_shift_noise, inject_random_noise, inject_noise
from .io import read_jsonl, write_jsonl, write_dataset, read_metadata, write_metadata, meta_path, format_jsonl

__all__ = [
    "PreferenceExample", "PreferenceDataset", "canonicalize", "canonicalize_dataset", "split",
    "GenConfig", "generate", "sample_levels",
    "NoiseKind", "inject_shift_noise", "inject_random_noise", "inject_noise",
    "read_jsonl", "write_jsonl", "write_dataset", "read_metadata", "write_metadata", "meta_path", "format_jsonl",
]
