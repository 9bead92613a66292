"""Readers and writers for tensors, disparity maps (PFM), images and masks (PNM).

Every reader either returns a complete, finite result or raises
:class:`~ggev.errors.FormatError`; nothing is returned half-parsed.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .disparity import DisparityMap
from .errors import FormatError

TENSOR_MAGIC = b"GGEVTNSR"
_MAX_DIM = 1 << 28


def _read_bytes(path: str | Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"{path}: cannot read ({exc.strerror})") from exc


def _check_finite(values: np.ndarray, path) -> None:
    if not np.isfinite(values).all():
        raise FormatError(f"{path}: payload contains NaN or Inf")


# -- raw tensor container ---------------------------------------------------


def encode_tensor(x: np.ndarray) -> bytes:
    x = np.asarray(x, dtype=np.float32)
    if not 1 <= x.ndim <= 4:
        raise FormatError(f"tensor rank {x.ndim} outside 1..4")
    header = TENSOR_MAGIC + struct.pack(f"<{1 + x.ndim}I", x.ndim, *x.shape)
    return header + x.astype("<f4").tobytes()


def decode_tensor(blob: bytes, source: str = "<bytes>") -> np.ndarray:
    if blob[:8] != TENSOR_MAGIC:
        raise FormatError(f"{source}: bad magic {blob[:8]!r}")
    if len(blob) < 12:
        raise FormatError(f"{source}: truncated header")
    (rank,) = struct.unpack_from("<I", blob, 8)
    if not 1 <= rank <= 4:
        raise FormatError(f"{source}: rank {rank} outside 1..4")
    if len(blob) < 12 + 4 * rank:
        raise FormatError(f"{source}: truncated header")
    dims = struct.unpack_from(f"<{rank}I", blob, 12)
    if any(d == 0 or d > _MAX_DIM for d in dims):
        raise FormatError(f"{source}: invalid dims {dims}")
    n = int(np.prod(dims, dtype=np.int64))
    start = 12 + 4 * rank
    if len(blob) != start + 4 * n:
        raise FormatError(f"{source}: payload is {len(blob) - start} bytes, expected {4 * n}")
    values = np.frombuffer(blob, dtype="<f4", count=n, offset=start).astype(np.float32)
    _check_finite(values, source)
    return values.reshape(dims)


def write_tensor(x: np.ndarray, path: str | Path) -> None:
    Path(path).write_bytes(encode_tensor(x))


def read_tensor(path: str | Path) -> np.ndarray:
    return decode_tensor(_read_bytes(path), str(path))


# -- PFM ----------------------------------------------------------------------


def _split_header(blob: bytes, n_fields: int, path) -> tuple[list[bytes], int]:
    """Whitespace-separated header tokens (``#`` comments allowed) and payload offset."""
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < n_fields:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated header")
        tokens.append(blob[start:pos])
    if pos >= len(blob):
        raise FormatError(f"{path}: truncated header")
    return tokens, pos + 1  # exactly one whitespace byte precedes the raster


def read_pfm(path: str | Path) -> DisparityMap:
    """Read a single-channel (``Pf``) PFM into a full-resolution disparity map."""
    blob = _read_bytes(path)
    if blob[:2] == b"PF":
        raise FormatError(f"{path}: colour PFM ('PF') is not a disparity map")
    if blob[:2] != b"Pf" or not blob[2:3].isspace():
        raise FormatError(f"{path}: bad magic {blob[:2]!r}")
    (w_tok, h_tok, s_tok), offset = _split_header(blob[2:], 3, path)
    offset += 2
    try:
        width, height, scale = int(w_tok), int(h_tok), float(s_tok)
    except ValueError as exc:
        raise FormatError(f"{path}: malformed header") from exc
    if not (0 < width <= _MAX_DIM and 0 < height <= _MAX_DIM) or scale == 0:
        raise FormatError(f"{path}: invalid dims {width}x{height} or scale {scale}")
    n = width * height
    if len(blob) - offset != 4 * n:
        raise FormatError(f"{path}: payload is {len(blob) - offset} bytes, expected {4 * n}")
    dtype = "<f4" if scale < 0 else ">f4"
    values = np.frombuffer(blob, dtype=dtype, count=n, offset=offset).astype(np.float32)
    _check_finite(values, path)
    return DisparityMap(np.flipud(values.reshape(height, width)).copy())


def write_pfm(disp: DisparityMap | np.ndarray, path: str | Path) -> None:
    """Write little-endian ``Pf`` with rows stored bottom-up."""
    values = disp.values if isinstance(disp, DisparityMap) else np.asarray(disp, np.float32)
    if values.ndim != 2:
        raise FormatError(f"PFM needs a 2-D map, got {values.shape}")
    h, w = values.shape
    header = f"Pf\n{w} {h}\n-1.0\n".encode("ascii")
    Path(path).write_bytes(header + np.flipud(values).astype("<f4").tobytes())


# -- PNM ----------------------------------------------------------------------


def _read_pnm_raw(path) -> tuple[bytes, np.ndarray]:
    blob = _read_bytes(path)
    magic = blob[:2]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"{path}: unsupported PNM magic {magic!r}")
    (w_tok, h_tok, m_tok), offset = _split_header(blob[2:], 3, path)
    offset += 2
    try:
        width, height, maxval = int(w_tok), int(h_tok), int(m_tok)
    except ValueError as exc:
        raise FormatError(f"{path}: malformed header") from exc
    if maxval != 255:
        raise FormatError(f"{path}: maxval {maxval} unsupported (need 255)")
    if not (0 < width <= _MAX_DIM and 0 < height <= _MAX_DIM):
        raise FormatError(f"{path}: invalid dims {width}x{height}")
    channels = 1 if magic == b"P5" else 3
    n = width * height * channels
    if len(blob) - offset != n:
        raise FormatError(f"{path}: payload is {len(blob) - offset} bytes, expected {n}")
    raw = np.frombuffer(blob, np.uint8, count=n, offset=offset)
    return magic, raw.reshape(height, width, channels)


def read_pnm(path: str | Path, rgb: bool = False) -> np.ndarray:
    """Read binary PGM/PPM as ``[C, H, W]`` float32 in ``[0, 1]``.

    ``rgb=True`` replicates grayscale images to three channels.
    """
    _, raw = _read_pnm_raw(path)
    img = raw.transpose(2, 0, 1).astype(np.float32) / np.float32(255.0)
    if rgb and img.shape[0] == 1:
        img = np.repeat(img, 3, axis=0)
    return img


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(img, np.float64) * 255.0), 0, 255).astype(np.uint8)


def write_pnm(img: np.ndarray, path: str | Path) -> None:
    """Write ``[1|3, H, W]`` values in ``[0, 1]`` (or uint8) as P5/P6."""
    img = np.asarray(img)
    if img.ndim == 2:
        img = img[None]
    if img.ndim != 3 or img.shape[0] not in (1, 3):
        raise FormatError(f"PNM needs [1|3, H, W], got {img.shape}")
    data = img if img.dtype == np.uint8 else to_uint8(img)
    c, h, w = data.shape
    magic = "P5" if c == 1 else "P6"
    header = f"{magic}\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + data.transpose(1, 2, 0).tobytes())


def read_mask(path: str | Path) -> np.ndarray:
    """Boolean ``[H, W]`` mask from a P5 file; any nonzero byte is ``True``."""
    magic, raw = _read_pnm_raw(path)
    if magic != b"P5":
        raise FormatError(f"{path}: masks must be P5 (grayscale)")
    return raw[:, :, 0] != 0


def write_mask(mask: np.ndarray, path: str | Path) -> None:
    write_pnm(np.where(np.asarray(mask, bool), 255, 0).astype(np.uint8)[None], path)


# -- colour maps --------------------------------------------------------------


def _jet_table() -> np.ndarray:
    # entry i (t = i/255): R = clip(1.5 - |4t - 3|), G = clip(1.5 - |4t - 2|), B = clip(1.5 - |4t - 1|)
    t = np.arange(256, dtype=np.float64) / 255.0
    rgb = [np.clip(1.5 - np.abs(4.0 * t - c), 0.0, 1.0) for c in (3.0, 2.0, 1.0)]
    return np.rint(np.stack(rgb, axis=1) * 255.0).astype(np.uint8)


COLOR_TABLE = _jet_table()


def colormap_indices(disp: DisparityMap) -> np.ndarray:
    """Table index per pixel after min-max normalisation over valid pixels."""
    vals = disp.values[disp.valid].astype(np.float64)
    if vals.size == 0:
        raise FormatError("cannot colour-map a map with no valid pixels")
    lo, hi = vals.min(), vals.max()
    if hi > lo:
        t = (disp.values.astype(np.float64) - lo) / (hi - lo)
    else:
        t = np.zeros(disp.shape)
    return np.clip(np.rint(t * 255.0), 0, 255).astype(np.int64)


def write_colormap(disp: DisparityMap, path: str | Path) -> None:
    """Render ``disp`` through :data:`COLOR_TABLE` as a P6 image; invalid pixels are black."""
    rgb = COLOR_TABLE[colormap_indices(disp)]
    rgb[~disp.valid] = 0
    write_pnm(rgb.transpose(2, 0, 1), path)
