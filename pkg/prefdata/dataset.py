"""Preference datasets: paired feature vectors with signed ordinal labels."""
import logging
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

import numpy as np

from config import SPLIT_STREAM
from errors import DimensionError, LevelError, SchemaError
from utils.artifacts import digest_arrays
from utils.rng import make_rng

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PreferenceExample:
    """One comparison: response a is preferred over b at level z."""
    features_a: np.ndarray
    features_b: np.ndarray
    z: int
    z_clean: Optional[int] = None


class PreferenceDataset:
    """Array-backed collection of preference examples.

    Attributes:
        a, b: Response features, shape (n, d)
        z: Observed levels in {-K..K}, shape (n,)
        z_clean: Labels before noise injection, or None
        K: Number of positive levels
        metadata: Free-form provenance (generator settings, noise counts)
    """

    def __init__(
        self,
        a: np.ndarray,
        b: np.ndarray,
        z: np.ndarray,
        K: int,
        z_clean: Optional[np.ndarray] = None,
        metadata: Optional[dict] = None,
    ):
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        z = np.asarray(z, dtype=np.int64).reshape(-1)
        if K < 1:
            raise SchemaError(f"K must be >= 1, got {K}")
        if a.ndim != 2 or a.shape != b.shape:
            raise DimensionError(f"Feature arrays must share shape (n, d): {a.shape} vs {b.shape}")
        if z.shape != (a.shape[0],):
            raise DimensionError(f"Expected {a.shape[0]} labels, got {z.shape[0]}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise SchemaError("Features must be finite")
        if np.any(np.abs(z) > K):
            raise LevelError(f"Labels must lie in {{-{K}..{K}}}")
        if z_clean is not None:
            z_clean = np.asarray(z_clean, dtype=np.int64).reshape(-1)
            if z_clean.shape != z.shape:
                raise DimensionError("z_clean must have one entry per example")
            if np.any(np.abs(z_clean) > K):
                raise LevelError(f"Clean labels must lie in {{-{K}..{K}}}")

        self.a = a
        self.b = b
        self.z = z
        self.K = int(K)
        self.z_clean = z_clean
        self.metadata = dict(metadata or {})

    @classmethod
    def empty(cls, K: int, d: int = 0, metadata: Optional[dict] = None) -> "PreferenceDataset":
        return cls(np.zeros((0, d)), np.zeros((0, d)), np.zeros(0, dtype=np.int64), K, metadata=metadata)

    @classmethod
    def from_examples(cls, examples: Iterable[PreferenceExample], K: int) -> "PreferenceDataset":
        examples = list(examples)
        if not examples:
            return cls.empty(K)
        a = np.stack([ex.features_a for ex in examples])
        b = np.stack([ex.features_b for ex in examples])
        z = np.array([ex.z for ex in examples])
        cleans = [ex.z_clean for ex in examples]
        z_clean = None if all(c is None for c in cleans) else np.array(cleans)
        return cls(a, b, z, K, z_clean)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def d(self) -> int:
        return self.a.shape[1]

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int) -> PreferenceExample:
        z_clean = None if self.z_clean is None else int(self.z_clean[i])
        return PreferenceExample(self.a[i].copy(), self.b[i].copy(), int(self.z[i]), z_clean)

    def __iter__(self) -> Iterator[PreferenceExample]:
        for i in range(self.n):
            yield self[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, PreferenceDataset):
            return NotImplemented
        same_clean = (self.z_clean is None and other.z_clean is None) or (
            self.z_clean is not None and other.z_clean is not None and np.array_equal(self.z_clean, other.z_clean)
        )
        return (
            self.K == other.K
            and self.a.shape == other.a.shape
            and np.array_equal(self.a, other.a)
            and np.array_equal(self.b, other.b)
            and np.array_equal(self.z, other.z)
            and same_clean
        )

    __hash__ = None

    def subset(self, indices: np.ndarray) -> "PreferenceDataset":
        """Examples at ``indices`` in that order; metadata is carried over."""
        idx = np.asarray(indices, dtype=np.int64)
        z_clean = None if self.z_clean is None else self.z_clean[idx]
        return PreferenceDataset(self.a[idx], self.b[idx], self.z[idx], self.K, z_clean, self.metadata)

    def with_labels(self, z: np.ndarray, z_clean: Optional[np.ndarray], metadata: dict) -> "PreferenceDataset":
        """Same features, new labels."""
        return PreferenceDataset(self.a, self.b, z, self.K, z_clean, metadata)

    def clean_labels(self) -> np.ndarray:
        """Ground-truth labels: z_clean when recorded, else z."""
        return self.z if self.z_clean is None else self.z_clean

    @property
    def digest(self) -> str:
        arrays = [self.a, self.b, self.z, np.array([self.K])]
        if self.z_clean is not None:
            arrays.append(self.z_clean)
        return digest_arrays(*arrays)


def canonicalize(ex: PreferenceExample) -> tuple[PreferenceExample, bool]:
    """Orient so the preferred response comes first (z >= 0)."""
    if ex.z >= 0:
        return ex, False
    z_clean = None if ex.z_clean is None else -ex.z_clean
    return PreferenceExample(ex.features_b, ex.features_a, -ex.z, z_clean), True


def canonicalize_dataset(ds: PreferenceDataset) -> tuple[PreferenceDataset, np.ndarray]:
    """Vectorized :func:`canonicalize`; returns the swapped mask."""
    swapped = ds.z < 0
    a = np.where(swapped[:, None], ds.b, ds.a)
    b = np.where(swapped[:, None], ds.a, ds.b)
    z = np.where(swapped, -ds.z, ds.z)
    z_clean = None if ds.z_clean is None else np.where(swapped, -ds.z_clean, ds.z_clean)
    return PreferenceDataset(a, b, z, ds.K, z_clean, ds.metadata), swapped


def split(ds: PreferenceDataset, fraction: float, seed: int) -> tuple[PreferenceDataset, PreferenceDataset]:
    """Random split; the first part holds round(fraction * n) examples."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"Split fraction must be in [0, 1], got {fraction}")
    perm = make_rng(seed, SPLIT_STREAM).permutation(ds.n)
    cut = int(round(fraction * ds.n))
    return ds.subset(np.sort(perm[:cut])), ds.subset(np.sort(perm[cut:]))
