"""Precomputed per-UE channel-frequency-response datasets (CFR1 format).

A dataset directory holds
* ``metadata.json`` - header (dimensions and grid) plus the UE table,
* ``ue_<id>.cfr``   - one binary channel file per UE,
* ``manifest.json`` - file list with CRC32 checksums.

Channel file layout (little endian, normative):
``"CFR1"`` magic (4 bytes), then u32 n_stripes, n_rus, n_rx, n_tx, Q,
then f64 fc, bw (40 header bytes total), then float32 interleaved
(re, im) pairs in row-major order stripe -> ru -> rx -> tx -> q.

Storage is float32 (matching typical ray-tracing export precision);
in-memory tensors are complex128. Readers load metadata eagerly and
channel tensors lazily, one UE file at a time.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channel import (ChannelRealization, SPEED_OF_LIGHT, los_channel,
                      tdl_channel, TdlParams, ula_positions)
from .config import EnvironmentConfig
from .errors import (ChecksumError, FormatError, IoError, NotFound,
                     UnsupportedModel)
from .waveform import SubcarrierGrid
from . import streams

MAGIC = b"CFR1"
_HEADER = struct.Struct("<5I2d")  # n_stripes, n_rus, n_rx, n_tx, Q, fc, bw
HEADER_BYTES = len(MAGIC) + _HEADER.size
_MAX_ELEMENTS = 1 << 34  # refuse absurd dimension products early


@dataclass(frozen=True)
class DatasetHeader:
    n_stripes: int
    n_rus: int
    n_rx: int
    n_tx: int
    num_subcarriers: int
    fc: float
    bw: float

    @property
    def tensor_shape(self) -> tuple:
        return (self.n_stripes, self.n_rus, self.n_rx, self.n_tx,
                self.num_subcarriers)

    def grid(self, oversampling: int = 1) -> SubcarrierGrid:
        return SubcarrierGrid(self.fc, self.bw, self.num_subcarriers, oversampling)


@dataclass(frozen=True)
class UeMetadata:
    ue_id: int
    position: tuple
    grid_index: tuple | None = None


@dataclass(frozen=True)
class CfrDataset:
    """In-memory dataset: header, UE table, and one tensor per UE."""

    header: DatasetHeader
    ues: tuple
    channels: dict  # ue_id -> complex ndarray of header.tensor_shape

    def __post_init__(self):
        ids = [ue.ue_id for ue in self.ues]
        if len(ids) != len(set(ids)):
            raise FormatError("ue_id values must be unique")
        for ue in self.ues:
            tensor = self.channels[ue.ue_id]
            if tensor.shape != self.header.tensor_shape:
                raise FormatError(
                    f"UE {ue.ue_id}: tensor shape {tensor.shape} does not match "
                    f"header {self.header.tensor_shape}")


# ---------------------------------------------------------------------------
# Binary codec
# ---------------------------------------------------------------------------

def _encode_channel_file(header: DatasetHeader, tensor: np.ndarray) -> bytes:
    payload = np.ascontiguousarray(tensor.astype(np.complex64)).view("<c8")
    return (MAGIC
            + _HEADER.pack(header.n_stripes, header.n_rus, header.n_rx,
                           header.n_tx, header.num_subcarriers,
                           header.fc, header.bw)
            + payload.tobytes())


def _decode_channel_file(blob: bytes, path: str) -> tuple[DatasetHeader, np.ndarray]:
    if blob[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}")
    if len(blob) < HEADER_BYTES:
        raise FormatError(f"{path}: truncated header")
    fields = _HEADER.unpack(blob[4:HEADER_BYTES])
    header = DatasetHeader(*fields[:5], fc=fields[5], bw=fields[6])
    n_elements = int(np.prod(header.tensor_shape, dtype=np.int64))
    if n_elements <= 0 or n_elements > _MAX_ELEMENTS:
        raise FormatError(f"{path}: dimension overflow {header.tensor_shape}")
    expected = HEADER_BYTES + 8 * n_elements
    if len(blob) != expected:
        raise FormatError(f"{path}: file is {len(blob)} bytes, expected {expected}")
    flat = np.frombuffer(blob, dtype="<c8", offset=HEADER_BYTES)
    return header, flat.reshape(header.tensor_shape).astype(np.complex128)


def _ue_to_json(ue: UeMetadata) -> dict:
    out = {"id": ue.ue_id, "x": ue.position[0], "y": ue.position[1],
           "z": ue.position[2]}
    if ue.grid_index is not None:
        out["grid_i"], out["grid_j"] = ue.grid_index
    return out


def _ue_from_json(raw: dict) -> UeMetadata:
    grid_index = None
    if "grid_i" in raw and "grid_j" in raw:
        grid_index = (int(raw["grid_i"]), int(raw["grid_j"]))
    return UeMetadata(ue_id=int(raw["id"]),
                      position=(float(raw["x"]), float(raw["y"]), float(raw["z"])),
                      grid_index=grid_index)


def write_dataset(dataset: CfrDataset, directory) -> dict:
    """Write metadata, per-UE channel files and the checksum manifest.

    Returns the manifest mapping (also written to ``manifest.json``).
    """
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create dataset directory {out}: {exc}") from exc
    h = dataset.header
    metadata = {
        "header": {"n_stripes": h.n_stripes, "n_rus": h.n_rus, "n_rx": h.n_rx,
                   "n_tx": h.n_tx, "num_subcarriers": h.num_subcarriers,
                   "fc": h.fc, "bw": h.bw},
        "ues": [_ue_to_json(ue) for ue in dataset.ues],
    }
    files: dict[str, dict] = {}

    def _emit(name: str, blob: bytes):
        try:
            (out / name).write_bytes(blob)
        except OSError as exc:
            raise IoError(f"cannot write {out / name}: {exc}") from exc
        files[name] = {"crc32": zlib.crc32(blob), "size": len(blob)}

    _emit("metadata.json", json.dumps(metadata, indent=1).encode())
    for ue in dataset.ues:
        _emit(f"ue_{ue.ue_id}.cfr",
              _encode_channel_file(h, dataset.channels[ue.ue_id]))
    manifest = {"format": "CFR1", "files": files}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return manifest


class CfrDatasetReader:
    """Lazy dataset handle: metadata eager, channel tensors on demand.

    Read-only after open; safe for concurrent lookups. Each UE file is
    checksum-verified on first access and cached.
    """

    def __init__(self, directory):
        self._dir = Path(directory)
        manifest_path = self._dir / "manifest.json"
        if not manifest_path.is_file():
            raise IoError(f"no manifest.json in {self._dir}")
        self._manifest = json.loads(manifest_path.read_text())
        meta_blob = self._read_checked("metadata.json")
        meta = json.loads(meta_blob.decode())
        raw_h = meta["header"]
        self.header = DatasetHeader(
            n_stripes=int(raw_h["n_stripes"]), n_rus=int(raw_h["n_rus"]),
            n_rx=int(raw_h["n_rx"]), n_tx=int(raw_h["n_tx"]),
            num_subcarriers=int(raw_h["num_subcarriers"]),
            fc=float(raw_h["fc"]), bw=float(raw_h["bw"]))
        self.ues = tuple(_ue_from_json(u) for u in meta["ues"])
        self._by_id = {ue.ue_id: ue for ue in self.ues}
        self._cache: dict[int, np.ndarray] = {}

    def _read_checked(self, name: str) -> bytes:
        path = self._dir / name
        if not path.is_file():
            raise IoError(f"dataset file missing: {path}")
        blob = path.read_bytes()
        entry = self._manifest.get("files", {}).get(name)
        if entry is not None and zlib.crc32(blob) != entry["crc32"]:
            raise ChecksumError(f"{path}: CRC32 mismatch")
        return blob

    def _tensor(self, ue_id: int) -> np.ndarray:
        if ue_id not in self._by_id:
            raise IndexError(f"unknown ue_id {ue_id}")
        if ue_id not in self._cache:
            blob = self._read_checked(f"ue_{ue_id}.cfr")
            header, tensor = _decode_channel_file(blob, f"ue_{ue_id}.cfr")
            if header != self.header:
                raise FormatError(f"ue_{ue_id}.cfr header disagrees with metadata")
            self._cache[ue_id] = tensor
        return self._cache[ue_id]

    def query_ue(self, position, tolerance: float) -> int:
        """Nearest stored UE within tolerance; ties -> smallest ue_id."""
        if not self.ues:
            raise NotFound("dataset has no UEs")
        target = np.asarray(position, dtype=np.float64)
        best = min(
            ((float(np.linalg.norm(np.asarray(ue.position) - target)), ue.ue_id)
             for ue in self.ues))
        if best[0] > tolerance:
            raise NotFound(f"no UE within {tolerance} m of {tuple(target)} "
                           f"(closest: {best[0]:.4g} m)")
        return best[1]

    def get_channel(self, ue_id: int, stripe_id: int, ru_id: int,
                    oversampling: int = 1) -> ChannelRealization:
        """H tensor (Q x n_rx x n_tx) for one stripe/RU pair."""
        tensor = self._tensor(ue_id)
        if not 0 <= stripe_id < self.header.n_stripes:
            raise IndexError(f"stripe_id {stripe_id} out of range")
        if not 0 <= ru_id < self.header.n_rus:
            raise IndexError(f"ru_id {ru_id} out of range")
        h = np.transpose(tensor[stripe_id, ru_id], (2, 0, 1))  # (Q, n_rx, n_tx)
        return ChannelRealization(h=h, grid=self.header.grid(oversampling),
                                  provenance="dataset")

    def to_memory(self) -> CfrDataset:
        channels = {ue.ue_id: self._tensor(ue.ue_id) for ue in self.ues}
        return CfrDataset(header=self.header, ues=self.ues, channels=channels)


def read_dataset(directory) -> CfrDatasetReader:
    """Open a dataset directory with lazy per-UE loading."""
    return CfrDatasetReader(directory)


# ---------------------------------------------------------------------------
# Synthetic generation (stand-in for ray-traced exports)
# ---------------------------------------------------------------------------

def stripe_axis(nodes) -> np.ndarray:
    """Unit vector along a stripe, from its node positions."""
    positions = np.asarray([n.position for n in nodes], dtype=np.float64)
    direction = positions[-1] - positions[0]
    norm = np.linalg.norm(direction)
    if norm == 0:
        return np.array([1.0, 0.0, 0.0])
    return direction / norm


def array_geometry(env: EnvironmentConfig, grid: SubcarrierGrid, stripe_id: int,
                   ru_id: int, ue_position, n_tx: int, n_rx: int):
    """Element positions for one (stripe, RU, UE) triple.

    RU arrays run along the stripe axis, UE arrays along x; both are
    half-wavelength linear arrays centered on the node/UE position. The
    same helper feeds both the synthetic generator and on-the-fly model
    runs so the two paths agree exactly.
    """
    nodes = env.stripe_nodes(stripe_id)
    rus = nodes[1:]
    if not 0 <= ru_id < len(rus):
        raise IndexError(f"ru_id {ru_id} out of range [0, {len(rus)})")
    wavelength = SPEED_OF_LIGHT / grid.fc
    axis = stripe_axis(nodes)
    tx = ula_positions(rus[ru_id].position, axis, n_tx, wavelength)
    rx = ula_positions(ue_position, (1.0, 0.0, 0.0), n_rx, wavelength)
    return tx, rx


def generate_synthetic(env: EnvironmentConfig, grid: SubcarrierGrid,
                       model: str = "los", seed: int = 0,
                       tdl_params: TdlParams | None = None,
                       n_tx: int = 4, n_rx: int = 4) -> CfrDataset:
    """Synthesize a CFR1 dataset from the lightweight channel models.

    Evaluates the chosen model for every (UE, stripe, RU) triple with
    half-wavelength arrays at both ends (4 x 4 by default). Deterministic
    in ``seed``; the LoS model matches direct `los_channel` calls exactly.
    """
    if model not in ("los", "tdl"):
        raise UnsupportedModel(f"synthetic dataset model {model!r}")
    if model == "tdl" and tdl_params is None:
        tdl_params = TdlParams()
    n_stripes = env.n_stripes
    n_rus = min(len(stripe) - 1 for stripe in env.radio_stripes)
    q = grid.num_subcarriers
    ues = tuple(UeMetadata(ue_id=i, position=pos)
                for i, pos in enumerate(env.ue_positions))
    header = DatasetHeader(n_stripes=n_stripes, n_rus=n_rus, n_rx=n_rx,
                           n_tx=n_tx, num_subcarriers=q, fc=grid.fc, bw=grid.bw)
    channels = {}
    for ue in ues:
        tensor = np.empty(header.tensor_shape, dtype=np.complex128)
        for s in range(n_stripes):
            for r in range(n_rus):
                tx, rx = array_geometry(env, grid, s, r, ue.position, n_tx, n_rx)
                if model == "los":
                    real = los_channel(grid, tx, rx)
                else:
                    rng = streams.stream(seed, "synthetic-tdl", ue.ue_id, s, r)
                    centroid = float(np.linalg.norm(
                        np.mean(tx, axis=0) - np.mean(rx, axis=0)))
                    real = tdl_channel(grid, tdl_params, n_tx, n_rx, rng,
                                       distance=centroid)
                tensor[s, r] = np.transpose(real.h, (1, 2, 0))  # (n_rx, n_tx, Q)
        channels[ue.ue_id] = tensor
    return CfrDataset(header=header, ues=ues, channels=channels)
