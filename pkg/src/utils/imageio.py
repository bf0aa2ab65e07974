"""Raw float images and 8-bit graymap label masks.

Image file layout (16-byte header, then data):

    bytes 0-3    magic b"MFIM"
    byte  4      b"L" little-endian or b"B" big-endian
    bytes 5-7    zero padding
    bytes 8-11   width, uint32
    bytes 12-15  height, uint32
    then         width * height float32 values, row-major, in the header's byte order
"""

from pathlib import Path

import numpy as np
from PIL import Image

from src.errors import ImageFormatError

MAGIC = b"MFIM"
HEADER_SIZE = 16
_ORDER = {b"L": "<", b"B": ">"}


def write_image(path, pixels: np.ndarray, byteorder: str = "L") -> Path:
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise ImageFormatError(f"image must be 2D, got shape {pixels.shape}")
    tag = byteorder.encode()
    if tag not in _ORDER:
        raise ImageFormatError(f"byte order must be 'L' or 'B', got {byteorder!r}")
    prefix = _ORDER[tag]
    height, width = pixels.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC + tag + b"\x00" * 3)
        f.write(np.array([width, height], dtype=prefix + "u4").tobytes())
        f.write(pixels.astype(prefix + "f4").tobytes())
    return path


def read_image(path) -> np.ndarray:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as err:
        raise ImageFormatError(f"cannot read image {path}: {err}") from err
    if len(raw) < HEADER_SIZE or raw[:4] != MAGIC:
        raise ImageFormatError(f"{path} is not an mfseg image (bad magic)")
    prefix = _ORDER.get(raw[4:5])
    if prefix is None:
        raise ImageFormatError(f"{path} has an unknown byte-order flag")
    width, height = np.frombuffer(raw[8:16], dtype=prefix + "u4")
    expected = HEADER_SIZE + 4 * int(width) * int(height)
    if len(raw) != expected:
        raise ImageFormatError(f"{path} holds {len(raw)} bytes, header implies {expected}")
    data = np.frombuffer(raw[HEADER_SIZE:], dtype=prefix + "f4")
    return data.reshape(int(height), int(width)).astype(np.float64)


def write_mask(path, labels: np.ndarray) -> Path:
    """Labels 1..K as a binary (P5) graymap."""
    labels = np.asarray(labels)
    if labels.min() < 1 or labels.max() > 255:
        raise ImageFormatError("mask labels must lie in 1..255")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(labels.astype(np.uint8)).save(path, format="PPM")
    return path


def read_mask(path) -> np.ndarray:
    """Labels 1..K as int64."""
    try:
        with Image.open(path) as img:
            if img.mode != "L":
                raise ImageFormatError(f"{path} is not an 8-bit graymap (mode {img.mode})")
            labels = np.array(img, dtype=np.int64)
    except (OSError, ValueError) as err:
        if isinstance(err, ImageFormatError):
            raise
        raise ImageFormatError(f"cannot read mask {path}: {err}") from err
    if labels.min() < 1:
        raise ImageFormatError(f"{path} has label 0; masks use 1..K")
    return labels
