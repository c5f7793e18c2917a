"""Image I/O: 8-bit PGM/PPM scaled to/from [0, 1], and a raw float64
dump (.f64) for bit-exact regression comparisons.

Buffers are indexed [x, y] / [x, y, c]; image files are row-major, so
reads and writes transpose.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .executor import Buffer
from .ir import PipelineError

_F64_MAGIC = b"f64\n"


class ImageFormatError(PipelineError):
    pass


def _pnm_header(data: bytes, path: str):
    # magic, dims, maxval; '#' comments allowed between tokens
    tokens = []
    pos = 0
    while len(tokens) < 4:
        m = re.match(rb"(?:\s|#[^\n]*\n)*(\S+)", data[pos:])
        if not m:
            raise ImageFormatError(f"{path}: truncated header")
        tokens.append(m.group(1))
        pos += m.end()
    return tokens, pos + 1  # single whitespace byte after maxval


def read_image(path: str | Path) -> np.ndarray:
    """Read PGM/PPM/.f64 into a float64 array shaped (x, y[, c])."""
    path = Path(path)
    data = path.read_bytes()
    if data.startswith(_F64_MAGIC):
        header_end = data.index(b"\n", len(_F64_MAGIC)) + 1
        dims = tuple(int(t) for t in data[len(_F64_MAGIC):header_end].split())
        arr = np.frombuffer(data[header_end:], dtype="<f8").reshape(dims)
        return arr.copy()
    if data[:2] in (b"P5", b"P6"):
        (magic, w, h, maxval), offset = _pnm_header(data, str(path))
        w, h, maxval = int(w), int(h), int(maxval)
        if maxval != 255:
            raise ImageFormatError(f"{path}: only maxval 255 is supported")
        channels = 3 if magic == b"P6" else 1
        raw = np.frombuffer(data, dtype=np.uint8, count=w * h * channels, offset=offset)
        img = raw.reshape((h, w, channels) if channels == 3 else (h, w))
        img = img.astype(np.float64) / 255.0
        # file is (row=y, col=x); buffers are (x, y[, c])
        return np.swapaxes(img, 0, 1).copy()
    raise ImageFormatError(f"{path}: unknown image format")


def write_image(path: str | Path, arr: np.ndarray | Buffer) -> None:
    """Write by extension: .pgm (2-D), .ppm (3-D, 3 channels), .f64 (any)."""
    path = Path(path)
    data = arr.data if isinstance(arr, Buffer) else np.asarray(arr, dtype=np.float64)
    suffix = path.suffix.lower()
    if suffix == ".f64":
        header = _F64_MAGIC + (" ".join(str(d) for d in data.shape) + "\n").encode()
        path.write_bytes(header + data.astype("<f8").tobytes())
        return
    img = np.swapaxes(data, 0, 1)
    quantized = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    if suffix == ".pgm":
        if quantized.ndim != 2:
            raise ImageFormatError(f"{path}: PGM requires a 2-D image")
        h, w = quantized.shape
        path.write_bytes(b"P5\n%d %d\n255\n" % (w, h) + quantized.tobytes())
    elif suffix == ".ppm":
        if quantized.ndim != 3 or quantized.shape[2] != 3:
            raise ImageFormatError(f"{path}: PPM requires a 3-channel image")
        h, w, _ = quantized.shape
        path.write_bytes(b"P6\n%d %d\n255\n" % (w, h) + quantized.tobytes())
    else:
        raise ImageFormatError(f"{path}: unsupported extension {suffix!r}")


def synthetic_input(extent: tuple[int, ...]) -> np.ndarray:
    """Deterministic test pattern in (0, 1]; avoids zeros so ratio-style
    divisions stay finite."""
    grids = np.meshgrid(*[np.arange(e) for e in extent], indexing="ij")
    v = grids[0] * 31
    for i, g in enumerate(grids[1:], start=1):
        v = v + g * (17 if i == 1 else 7)
    return ((v % 251) + 1).astype(np.float64) / 252.0
