"""The PGV1 binary tensor format shared across components.

Deliberately tiny so any language can read it in a few dozen lines:

    offset  size        field
    0       4           magic "PGV1"
    4       u16         format version (1)
    6       u8          dtype code: 1 = float32, 2 = float64
    7       u8          rank (always 3: [channel, bin, frame])
    8       rank * u32  dims
    ..      u32         sample_rate
    ..      u32         frame_size
    ..      u32         hop_size
    ..      u32         n_mels
    ..      ch * 8      channel role tags, ASCII, NUL-padded
    ..      payload     row-major, little-endian

Channel layouts in use: ("mel",) for log-mel inputs, ("mag", "dm", "dn")
for spectral triples, plus "lambda" when the component map rides along.
All integers are little-endian regardless of host byte order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .gradients import SpectralTriple
from .mel import MelSpectrogram
from .stft import StftConfig

MAGIC = b"PGV1"
VERSION = 1
_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_DTYPE_CODES = {np.dtype(np.float32): 1, np.dtype(np.float64): 2}
_ROLE_BYTES = 8

MEL_ROLES = ("mel",)
TRIPLE_ROLES = ("mag", "dm", "dn")
TRIPLE_LAMBDA_ROLES = ("mag", "dm", "dn", "lambda")


class TensorFormatError(Exception):
    """Raised when a tensor file violates the PGV1 layout."""


@dataclass(frozen=True)
class TensorFile:
    data: np.ndarray  # [channel, bin, frame], float32 or float64
    sample_rate: int
    frame_size: int
    hop_size: int
    n_mels: int
    roles: tuple[str, ...]

    def __post_init__(self):
        if self.data.ndim != 3:
            raise TensorFormatError(f"tensor rank must be 3, got {self.data.ndim}")
        if len(self.roles) != self.data.shape[0]:
            raise TensorFormatError(
                f"{len(self.roles)} roles declared for {self.data.shape[0]} channels"
            )
        if self.data.dtype not in _DTYPE_CODES:
            raise TensorFormatError(f"unsupported dtype {self.data.dtype}")
        for role in self.roles:
            if not role or len(role.encode("ascii")) > _ROLE_BYTES:
                raise TensorFormatError(f"bad channel role {role!r}")


def write_tensor(path, tensor: TensorFile) -> None:
    dims = tensor.data.shape
    header = bytearray()
    header += MAGIC
    header += struct.pack("<HBB", VERSION, _DTYPE_CODES[tensor.data.dtype], 3)
    header += struct.pack("<3I", *dims)
    header += struct.pack(
        "<4I", tensor.sample_rate, tensor.frame_size, tensor.hop_size, tensor.n_mels
    )
    for role in tensor.roles:
        header += role.encode("ascii").ljust(_ROLE_BYTES, b"\x00")
    payload = np.ascontiguousarray(tensor.data, dtype=tensor.data.dtype.newbyteorder("<"))
    Path(path).write_bytes(bytes(header) + payload.tobytes())


def read_tensor(path) -> TensorFile:
    blob = Path(path).read_bytes()
    if len(blob) < 8 or blob[:4] != MAGIC:
        raise TensorFormatError(f"{path}: not a PGV1 tensor file")
    version, dtype_code, rank = struct.unpack_from("<HBB", blob, 4)
    if version != VERSION:
        raise TensorFormatError(f"{path}: unsupported version {version}")
    if dtype_code not in _DTYPES:
        raise TensorFormatError(f"{path}: unknown dtype code {dtype_code}")
    if rank != 3:
        raise TensorFormatError(f"{path}: expected rank 3, got {rank}")
    off = 8
    dims = struct.unpack_from("<3I", blob, off)
    off += 12
    sample_rate, frame_size, hop_size, n_mels = struct.unpack_from("<4I", blob, off)
    off += 16
    roles = []
    for _ in range(dims[0]):
        raw = blob[off : off + _ROLE_BYTES]
        if len(raw) < _ROLE_BYTES:
            raise TensorFormatError(f"{path}: truncated role table")
        roles.append(raw.rstrip(b"\x00").decode("ascii"))
        off += _ROLE_BYTES
    dtype = _DTYPES[dtype_code]
    expected = int(np.prod(dims)) * dtype.itemsize
    payload = blob[off:]
    if len(payload) != expected:
        raise TensorFormatError(
            f"{path}: payload is {len(payload)} bytes, dims require {expected}"
        )
    data = np.frombuffer(payload, dtype=dtype).reshape(dims)
    return TensorFile(data, sample_rate, frame_size, hop_size, n_mels, tuple(roles))


def mel_tensor(
    mel: MelSpectrogram, config: StftConfig, sample_rate: int, dtype=np.float32
) -> TensorFile:
    data = mel.values[None, :, :].astype(dtype)
    return TensorFile(
        data, sample_rate, config.frame_size, config.hop_size, mel.n_mels, MEL_ROLES
    )


def triple_tensor(
    triple: SpectralTriple, lam: np.ndarray | None = None, dtype=np.float32
) -> TensorFile:
    channels = [triple.magnitude, triple.delta_m, triple.delta_n]
    roles = TRIPLE_ROLES
    if lam is not None:
        channels.append(lam)
        roles = TRIPLE_LAMBDA_ROLES
    data = np.stack(channels).astype(dtype)
    return TensorFile(
        data,
        triple.sample_rate,
        triple.config.frame_size,
        triple.config.hop_size,
        0,
        roles,
    )


def tensor_to_triple(
    tensor: TensorFile, window: str = "hann"
) -> tuple[SpectralTriple, np.ndarray | None]:
    """Unpack a triple(+lambda) tensor; offsets are re-clipped defensively."""
    if tuple(tensor.roles[:3]) != TRIPLE_ROLES:
        raise TensorFormatError(f"expected triple roles, got {tensor.roles}")
    fft_size = 2 * (tensor.data.shape[1] - 1)  # bins = fft/2 + 1
    if fft_size < tensor.frame_size:
        raise TensorFormatError(
            f"bin count {tensor.data.shape[1]} too small for frame size {tensor.frame_size}"
        )
    config = StftConfig(
        frame_size=tensor.frame_size,
        hop_size=tensor.hop_size,
        window=window,
        fft_size=fft_size,
    )
    data = tensor.data.astype(np.float64)
    magnitude = np.maximum(data[0], 0.0)
    bound = config.fft_size / (2.0 * config.hop_size)
    delta_m = np.clip(data[1], -4.0, 4.0)
    delta_n = np.clip(data[2], -bound, bound)
    triple = SpectralTriple(magnitude, delta_m, delta_n, config, tensor.sample_rate)
    lam = None
    if len(tensor.roles) > 3 and tensor.roles[3] == "lambda":
        lam = np.clip(data[3], 0.0, 1.0)
    return triple, lam


def tensor_to_mel(tensor: TensorFile) -> MelSpectrogram:
    if tuple(tensor.roles) != MEL_ROLES:
        raise TensorFormatError(f"expected a mel tensor, got roles {tensor.roles}")
    return MelSpectrogram(tensor.data[0].astype(np.float64))
