"""Label noise models for robustness experiments."""
import logging
from enum import Enum

import numpy as np

from config import NOISE_STREAM
from errors import SchemaError
from utils.rng import make_rng
from .dataset import PreferenceDataset

logger = logging.getLogger(__name__)


class NoiseKind(Enum):
    """Supported corruption processes."""
    SHIFT = "shift"    # move one level up or down, clamped to the scale
    RANDOM = "random"  # replace with a uniform level (may equal the original)


def _check_rate(rate: float) -> None:
    if not 0.0 <= rate <= 1.0:
        raise SchemaError(f"Noise rate must be in [0, 1], got {rate}")


def _apply(ds: PreferenceDataset, kind: NoiseKind, rate: float, seed: int, z_new: np.ndarray, selected: np.ndarray) -> PreferenceDataset:
    n_selected = int(selected.sum())
    z = np.where(selected, z_new, ds.z)
    n_changed = int((z != ds.z).sum())

    metadata = dict(ds.metadata)
    metadata["noise"] = {
        "kind": kind.value,
        "rate": float(rate),
        "seed": int(seed),
        "selected": n_selected,
        "changed": n_changed,
    }
    logger.info(f"{kind.value} noise at rate {rate}: {n_selected}/{ds.n} selected, {n_changed} labels changed")

    # ground truth is recorded only once something was actually corrupted
    z_clean = ds.z_clean
    if z_clean is None and n_selected > 0:
        z_clean = ds.z.copy()
    return ds.with_labels(z, z_clean, metadata)


def inject_shift_noise(ds: PreferenceDataset, rate: float, seed: int) -> PreferenceDataset:
    """Shift selected labels by +/-1 with equal probability, clamped to [-K, K].

    Each example is selected independently with probability ``rate``.
    """
    _check_rate(rate)
    rng = make_rng(seed, NOISE_STREAM)
    selected = rng.random(ds.n) < rate
    step = np.where(rng.random(ds.n) < 0.5, -1, 1)
    shifted = np.clip(ds.z + step, -ds.K, ds.K)
    return _apply(ds, NoiseKind.SHIFT, rate, seed, shifted, selected)


def inject_random_noise(ds: PreferenceDataset, rate: float, seed: int) -> PreferenceDataset:
    """Replace selected labels with a uniform draw from {-K..K}."""
    _check_rate(rate)
    rng = make_rng(seed, NOISE_STREAM)
    selected = rng.random(ds.n) < rate
    replacement = rng.integers(-ds.K, ds.K + 1, size=ds.n)
    return _apply(ds, NoiseKind.RANDOM, rate, seed, replacement, selected)


def inject_noise(ds: PreferenceDataset, kind: str, rate: float, seed: int) -> PreferenceDataset:
    """Dispatch on the noise kind name."""
    kind = NoiseKind(kind)
    if kind is NoiseKind.SHIFT:
        return inject_shift_noise(ds, rate, seed)
    return inject_random_noise(ds, rate, seed)
