"""Field snapshot persistence.

A snapshot is two files: `<path>` holds the payload -- for each named
component in order, the complex field as little-endian float64 with real and
imaginary parts interleaved -- and `<path>.json` is a plain-text sidecar with
the grid geometry, the component list, a sha256 of the payload, and the
convention-ledger version, so a payload can be validated and decoded years
later without this package.  Writes go to a temporary file first and are
renamed into place; loads verify length and hash before building any arrays,
so a truncated or corrupted file never yields a partial state.
"""

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import SnapshotError

FORMAT_VERSION = 1


def _payload_bytes(arrays):
    chunks = []
    for arr in arrays:
        a = np.asarray(arr, dtype=complex)
        inter = np.empty(a.shape + (2,), dtype="<f8")
        inter[..., 0] = a.real
        inter[..., 1] = a.imag
        chunks.append(inter.tobytes())
    return b"".join(chunks)


def _atomic_write(path, data, mode="wb"):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".snap-")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_snapshot(path, grid, components, time=0.0, extra=None):
    """Write named complex fields to `path` (+ `<path>.json` sidecar).

    `components` is a name -> array mapping; iteration order is preserved and
    recorded.  Every array must be (N, N, n, n) on the given grid.
    """
    from . import CONVENTION_LEDGER_VERSION

    names = list(components)
    arrays = []
    for name in names:
        a = np.asarray(components[name], dtype=complex)
        if a.shape != (grid.N, grid.N, grid.n, grid.n):
            raise SnapshotError(
                f"component '{name}' has shape {a.shape}, expected "
                f"{(grid.N, grid.N, grid.n, grid.n)}"
            )
        arrays.append(a)
    payload = _payload_bytes(arrays)
    header = {
        "format_version": FORMAT_VERSION,
        "convention_ledger_version": CONVENTION_LEDGER_VERSION,
        "n_points": grid.N,
        "length": grid.L,
        "rank": grid.n,
        "time": float(time),
        "components": names,
        "endianness": "little",
        "dtype": "float64 real/imag interleaved, component-major",
        "payload_bytes": len(payload),
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    if extra:
        header["extra"] = extra
    _atomic_write(path, payload)
    _atomic_write(
        path + ".json",
        json.dumps(header, indent=2, sort_keys=True) + "\n",
        mode="w",
    )


@dataclass
class SnapshotData:
    n_points: int
    length: float
    rank: int
    time: float
    components: dict
    header: dict


def load_snapshot(path):
    """Read and verify a snapshot; SnapshotError on any mismatch."""
    sidecar = path + ".json"
    try:
        with open(sidecar, "r", encoding="utf-8") as fh:
            header = json.load(fh)
    except OSError as exc:
        raise SnapshotError(f"cannot read snapshot header {sidecar}: {exc}")
    except json.JSONDecodeError as exc:
        raise SnapshotError(f"malformed snapshot header {sidecar}: {exc}")
    try:
        with open(path, "rb") as fh:
            payload = fh.read()
    except OSError as exc:
        raise SnapshotError(f"cannot read snapshot payload {path}: {exc}")

    n = int(header["n_points"])
    rank = int(header["rank"])
    names = list(header["components"])
    per_component = n * n * rank * rank * 2 * 8
    expected = per_component * len(names)
    if header.get("payload_bytes") != expected:
        raise SnapshotError(
            f"{sidecar}: header inconsistent (payload_bytes "
            f"{header.get('payload_bytes')} != {expected})"
        )
    if len(payload) != expected:
        raise SnapshotError(
            f"{path}: truncated payload ({len(payload)} of {expected} bytes)"
        )
    digest = hashlib.sha256(payload).hexdigest()
    if digest != header.get("payload_sha256"):
        raise SnapshotError(f"{path}: payload hash mismatch")

    components = {}
    for i, name in enumerate(names):
        raw = payload[i * per_component:(i + 1) * per_component]
        flat = np.frombuffer(raw, dtype="<f8").reshape(n, n, rank, rank, 2)
        components[name] = (flat[..., 0] + 1j * flat[..., 1]).astype(complex)
    return SnapshotData(
        n_points=n,
        length=float(header["length"]),
        rank=rank,
        time=float(header["time"]),
        components=components,
        header=header,
    )


def save_aux_state(path, grid, aux):
    save_snapshot(
        path, grid,
        {"u": aux.u, "ut": aux.ut, "v": aux.v, "vt": aux.vt},
        time=aux.t,
    )


def load_aux_state(path):
    """Returns (TorusGrid, AuxState) rebuilt from a saved wave-variable
    snapshot."""
    from .auxsystem import AuxState
    from .spectral import TorusGrid

    snap = load_snapshot(path)
    missing = {"u", "ut", "v", "vt"} - set(snap.components)
    if missing:
        raise SnapshotError(
            f"{path}: not a wave-variable snapshot (missing "
            f"{sorted(missing)})"
        )
    grid = TorusGrid(snap.n_points, snap.length, rank=snap.rank)
    c = snap.components
    return grid, AuxState(c["u"], c["ut"], c["v"], c["vt"], t=snap.time)
