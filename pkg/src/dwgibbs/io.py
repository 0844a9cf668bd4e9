"""CSV/JSON outputs and run manifests."""
from __future__ import annotations

import csv
import hashlib
import json
import platform
import time
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .lattice import LatticeVolume


def to_plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    if isinstance(obj, Mapping):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    return obj


def canonical_json(obj) -> str:
    return json.dumps(to_plain(obj), sort_keys=True, separators=(",", ":"))


def content_hash(obj) -> str:
    """sha256 of the canonical JSON form of ``obj``."""
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def file_hash(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_json(path: str | Path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_plain(obj), indent=2, sort_keys=True) + "\n")
    return path


def write_records_csv(path: str | Path, records: Iterable[Mapping]) -> Path:
    records = [to_plain(r) for r in records]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fields: list[str] = []
    for r in records:
        fields += [k for k in r if k not in fields]
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for r in records:
            w.writerow({k: json.dumps(v) if isinstance(v, (list, dict)) else v for k, v in r.items()})
    return path


def read_records_csv(path: str | Path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def matrix_records(M: np.ndarray, rows: LatticeVolume, cols: LatticeVolume | None = None, name: str = "value") -> list[dict]:
    """One record per entry, keyed by site indices and coordinates."""
    cols = rows if cols is None else cols
    M = np.asarray(M)
    out = []
    for x in range(M.shape[0]):
        cx = rows.site(x)
        for z in range(M.shape[1]):
            out.append({"x": x, "z": z, "x_coord": list(cx), "z_coord": list(cols.site(z)), name: float(M[x, z])})
    return out


def write_samples_csv(path: str | Path, samples: np.ndarray, prefix: str) -> Path:
    samples = np.atleast_2d(samples)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ",".join(f"{prefix}{i}" for i in range(samples.shape[1]))
    fmt = "%d" if np.issubdtype(samples.dtype, np.integer) else "%.17g"
    np.savetxt(path, samples, delimiter=",", header=header, comments="", fmt=fmt)
    return path


def write_manifest(outdir: str | Path, command: str, config: Mapping, outputs: Iterable[str | Path], extra: Mapping | None = None) -> Path:
    """``manifest.json`` with the resolved config, its hash and hashes of every output file."""
    outdir = Path(outdir)
    files = {}
    for p in outputs:
        p = Path(p)
        files[p.name] = file_hash(p)
    manifest = {
        "command": command,
        "config": to_plain(dict(config)),
        "config_hash": content_hash(dict(config)),
        "outputs": files,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    if extra:
        manifest.update(to_plain(dict(extra)))
    return write_json(outdir / "manifest.json", manifest)
