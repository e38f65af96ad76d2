"""Counter-based random streams.

All randomness in the toolkit flows through numpy's Philox bit generator
keyed by the run seed. Independent streams are addressed by the counter:

    counter = (stream << 192) | (index << 128)

so example ``i`` of stream ``g`` under seed ``s`` always sees the same draws,
no matter how many other streams or examples were consumed before it.
"""
import numpy as np

from config import RNG_ALGORITHM


def make_rng(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    """Create the generator for ``(seed, stream, index)``.

    Args:
        seed: Non-negative run seed (Philox key)
        stream: Purpose identifier (see ``config.*_STREAM``)
        index: Sub-stream index, e.g. example or epoch number

    Returns:
        A numpy Generator positioned at the start of its stream
    """
    if seed < 0:
        raise ValueError(f"Seed must be non-negative, got {seed}")
    counter = (int(stream) << 192) | (int(index) << 128)
    return np.random.Generator(np.random.Philox(key=int(seed), counter=counter))


def rng_descriptor(seed: int) -> dict:
    """Describe the RNG for dataset metadata."""
    return {
        "algorithm": RNG_ALGORITHM,
        "key": int(seed),
        "counter_layout": "(stream << 192) | (index << 128)",
    }
