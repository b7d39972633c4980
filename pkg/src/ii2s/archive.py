"""Named-array container used for latents and whitening models.

An archive is a zip file holding one ``.npy`` member per named array (always
little-endian float32/float64/int64) and a ``manifest.json`` member with free-form
metadata. ``numpy.load`` can read the array members directly.
"""

from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import IncompatibleArtifactError

MANIFEST_NAME = "manifest.json"
_ALLOWED_KINDS = {"f", "i", "u", "b"}


def _to_little_endian(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.dtype.kind not in _ALLOWED_KINDS:
        raise TypeError(f"unsupported dtype for archive: {arr.dtype}")
    return np.ascontiguousarray(arr.astype(arr.dtype.newbyteorder("<"), copy=False))


def save_archive(path, arrays: Mapping[str, np.ndarray], manifest: Mapping[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # Fixed timestamps keep the bytes reproducible across runs.
    stamp = (1980, 1, 1, 0, 0, 0)
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.lib.format.write_array(buf, _to_little_endian(arrays[name]), allow_pickle=False)
            zf.writestr(zipfile.ZipInfo(f"{name}.npy", date_time=stamp), buf.getvalue())
        payload = json.dumps(dict(manifest), sort_keys=True, indent=2).encode()
        zf.writestr(zipfile.ZipInfo(MANIFEST_NAME, date_time=stamp), payload)
    return path


def load_archive(path) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"archive not found: {path}")
    try:
        zf = zipfile.ZipFile(path)
    except zipfile.BadZipFile as exc:
        raise IncompatibleArtifactError(f"{path} is not a named-array archive") from exc
    with zf:
        names = zf.namelist()
        if MANIFEST_NAME not in names:
            raise IncompatibleArtifactError(f"{path} has no {MANIFEST_NAME}")
        manifest = json.loads(zf.read(MANIFEST_NAME))
        arrays = {}
        for name in names:
            if name.endswith(".npy"):
                with zf.open(name) as fh:
                    arrays[name[:-4]] = np.lib.format.read_array(io.BytesIO(fh.read()), allow_pickle=False)
    return arrays, manifest
