"""JSONL dataset files and their metadata sidecars.

Each line is {"a": [...], "b": [...], "z": int, "z_clean": int|null}. The
sidecar ``<stem>.meta.json`` next to the data file carries K and provenance.
"""
import json
import logging
from pathlib import Path
from typing import Optional

import numpy as np

from errors import DataParseError, DimensionError, SchemaError
from utils.artifacts import PathLike, all_or_nothing, atomic_write_text, read_json, write_json
from .dataset import PreferenceDataset

logger = logging.getLogger(__name__)


def meta_path(path: PathLike) -> Path:
    """Sidecar path for a dataset file."""
    path = Path(path)
    return path.with_name(f"{path.stem}.meta.json")


def format_jsonl(ds: PreferenceDataset) -> str:
    """Render the dataset as JSONL text; floats keep their shortest repr."""
    lines = []
    for i in range(ds.n):
        record = {
            "a": [float(v) for v in ds.a[i]],
            "b": [float(v) for v in ds.b[i]],
            "z": int(ds.z[i]),
            "z_clean": None if ds.z_clean is None else int(ds.z_clean[i]),
        }
        lines.append(json.dumps(record, allow_nan=False))
    return "".join(line + "\n" for line in lines)


def write_jsonl(ds: PreferenceDataset, path: PathLike) -> Path:
    """Write the examples atomically."""
    return atomic_write_text(path, format_jsonl(ds))


def write_metadata(ds: PreferenceDataset, path: PathLike) -> Path:
    """Write the sidecar for the dataset stored at ``path``."""
    metadata = {**ds.metadata, "n": ds.n, "d": ds.d, "K": ds.K}
    return write_json(meta_path(path), metadata)


def read_metadata(path: PathLike) -> Optional[dict]:
    """Sidecar contents, or None when there is no sidecar."""
    sidecar = meta_path(path)
    if not sidecar.exists():
        return None
    try:
        return read_json(sidecar)
    except json.JSONDecodeError as e:
        raise SchemaError(f"Malformed metadata file {sidecar}: {e}") from None


def _reject_constant(token: str):
    raise ValueError(f"non-finite value {token}")


def _features(record: dict, key: str, line: int) -> np.ndarray:
    values = record.get(key)
    if not isinstance(values, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
        raise DataParseError(f"field '{key}' must be a list of numbers", line)
    return np.asarray(values, dtype=np.float64)


def _level(record: dict, key: str, line: int, required: bool) -> Optional[int]:
    value = record.get(key)
    if value is None:
        if required:
            raise DataParseError(f"missing field '{key}'", line)
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise DataParseError(f"field '{key}' must be an integer, got {value!r}", line)
    return value


def read_jsonl(path: PathLike, K: Optional[int] = None) -> PreferenceDataset:
    """Read a dataset file.

    Args:
        path: JSONL file
        K: Expected number of positive levels; taken from the sidecar (or the
           largest |z| seen) when omitted

    Returns:
        The dataset, with sidecar metadata attached when present
    """
    path = Path(path)
    metadata = read_metadata(path) or {}
    if K is None and "K" in metadata:
        K = int(metadata["K"])
    elif K is not None and "K" in metadata and int(metadata["K"]) != K:
        raise SchemaError(f"{path} was written with K={metadata['K']}, expected K={K}")

    a_rows, b_rows, zs, cleans = [], [], [], []
    d = None
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw, parse_constant=_reject_constant)
            except ValueError as e:
                raise DataParseError(f"malformed JSON ({e})", line_no) from None
            if not isinstance(record, dict):
                raise DataParseError("expected a JSON object", line_no)

            fa = _features(record, "a", line_no)
            fb = _features(record, "b", line_no)
            if fa.size != fb.size or (d is not None and fa.size != d):
                raise DataParseError(
                    f"feature dimension mismatch (a={fa.size}, b={fb.size}, expected {d if d is not None else fa.size})",
                    line_no,
                )
            d = fa.size
            z = _level(record, "z", line_no, required=True)
            z_clean = _level(record, "z_clean", line_no, required=False)
            for value in (z, z_clean):
                if K is not None and value is not None and abs(value) > K:
                    raise DataParseError(f"level {value} outside {{-{K}..{K}}}", line_no)
            a_rows.append(fa)
            b_rows.append(fb)
            zs.append(z)
            cleans.append(z_clean)

    if K is None:
        K = max([1] + [abs(v) for v in zs] + [abs(v) for v in cleans if v is not None])
        logger.warning(f"No metadata for {path}; inferred K={K} from labels")
    if not zs:
        return PreferenceDataset.empty(K, metadata=metadata)

    known = [c is not None for c in cleans]
    if any(known) and not all(known):
        raise SchemaError(f"{path}: z_clean must be given for every example or for none")
    z_clean = np.array(cleans, dtype=np.int64) if all(known) else None
    try:
        ds = PreferenceDataset(np.stack(a_rows), np.stack(b_rows), np.array(zs), K, z_clean, metadata)
    except DimensionError as e:
        raise SchemaError(f"{path}: {e}") from None
    logger.debug(f"Read {ds.n} examples from {path}")
    return ds


def write_dataset(ds: PreferenceDataset, path: PathLike) -> tuple[Path, Path]:
    """Write examples and sidecar; returns both paths.

    A failed sidecar write removes the examples file again.
    """
    with all_or_nothing() as written:
        written.append(write_jsonl(ds, path))
        written.append(write_metadata(ds, path))
    return written[0], written[1]
