"""Artifact writing: atomic files, digests, CSV tables and run manifests."""
import csv
import hashlib
import io
import json
import logging
import os
import sys
import tempfile
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Iterator, Optional, Sequence, Union

import numpy as np

from config import TOOL_VERSION

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def canonical_json(obj: Any) -> str:
    """Serialize with sorted keys so equal objects give equal bytes."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def digest_bytes(data: bytes) -> str:
    """SHA-256 hex digest."""
    return hashlib.sha256(data).hexdigest()


def digest_json(obj: Any) -> str:
    """Digest of the canonical JSON form of ``obj``."""
    return digest_bytes(canonical_json(obj).encode("utf-8"))


def digest_file(path: PathLike) -> str:
    """Digest of a file's bytes."""
    return digest_bytes(Path(path).read_bytes())


def digest_arrays(*arrays: np.ndarray) -> str:
    """Digest of array shapes, dtypes and contents."""
    h = hashlib.sha256()
    for arr in arrays:
        arr = np.ascontiguousarray(arr)
        h.update(f"{arr.dtype.str}{arr.shape}".encode())
        h.update(arr.tobytes())
    return h.hexdigest()


def atomic_write_text(path: PathLike, text: str) -> Path:
    """Write text to ``path`` via a temp file and rename.

    Readers never observe a partially written file; parent directories are
    created on demand.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.debug(f"Wrote {path}")
    return path


@contextmanager
def all_or_nothing(written: Optional[list] = None) -> Iterator[list]:
    """Collect paths written inside the block; delete them all if it raises.

    Each file is itself written atomically, so only the files that were
    appended to the list before the failure need removing.
    """
    written = [] if written is None else written
    try:
        yield written
    except BaseException:
        for path in reversed(written):
            Path(path).unlink(missing_ok=True)
        if written:
            logger.warning(f"Removed {len(written)} partial artifact(s) after a failed write")
        raise


def write_json(path: PathLike, obj: Any) -> Path:
    """Write pretty JSON atomically (sorted keys, trailing newline)."""
    return atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def read_json(path: PathLike) -> Any:
    """Read a JSON file."""
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def format_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Render rows as CSV text; floats use ``repr`` for lossless round-trip."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write a CSV table atomically."""
    return atomic_write_text(path, format_csv(header, rows))


@dataclass
class RunManifest:
    """Provenance record for one CLI invocation.

    ``digest`` covers everything except timing and file locations, so reruns
    with the same inputs produce the same digest and the same artifact bytes.
    """
    command: list[str]
    config_digest: Optional[str] = None
    dataset_digests: dict = field(default_factory=dict)
    seeds: list[int] = field(default_factory=list)
    tool_version: str = TOOL_VERSION
    extra: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    paths: dict = field(default_factory=dict)
    started_at: float = field(default_factory=time.time)
    finished_at: Optional[float] = None

    def deterministic_part(self) -> dict:
        """Fields that feed the digest."""
        return {
            "command": list(self.command),
            "config_digest": self.config_digest,
            "dataset_digests": dict(self.dataset_digests),
            "seeds": list(self.seeds),
            "tool_version": self.tool_version,
            "extra": self.extra,
        }

    @property
    def digest(self) -> str:
        return digest_json(self.deterministic_part())

    def record_artifact(self, path: PathLike) -> None:
        """Register a written artifact by name and content digest."""
        path = Path(path)
        self.artifacts[path.name] = digest_file(path)

    def to_dict(self) -> dict:
        finished = self.finished_at if self.finished_at is not None else time.time()
        return {
            **self.deterministic_part(),
            "manifest_digest": self.digest,
            "artifacts": dict(sorted(self.artifacts.items())),
            "paths": dict(self.paths),
            "timing": {
                "started_at": datetime.fromtimestamp(self.started_at, timezone.utc).isoformat(),
                "finished_at": datetime.fromtimestamp(finished, timezone.utc).isoformat(),
                "duration_s": finished - self.started_at,
            },
            "python": sys.version.split()[0],
        }

    def write(self, path: PathLike) -> Path:
        self.finished_at = time.time()
        return write_json(path, self.to_dict())
