"""File formats for the CLI: PGM (P5), PNG via Pillow, CSV matrices."""

from __future__ import annotations

import re
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image

from .errors import InvalidInputError

PathLike = Union[str, Path]


def read_pgm(path: PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    m = re.match(rb"P5\s+(?:#.*\s+)*(\d+)\s+(\d+)\s+(\d+)\s", data)
    if not m:
        raise InvalidInputError(f"{path} is not a binary PGM (P5) file")
    width, height, maxval = (int(m.group(i)) for i in (1, 2, 3))
    if maxval > 255:
        raise InvalidInputError("16-bit PGM is not supported")
    pixels = np.frombuffer(data[m.end() :], dtype=np.uint8, count=width * height)
    return pixels.reshape(height, width).astype(float)


def write_pgm(path: PathLike, array: np.ndarray) -> None:
    arr = np.asarray(array)
    if arr.ndim != 2:
        raise InvalidInputError("PGM output must be 2D")
    arr = np.clip(np.round(arr), 0, 255).astype(np.uint8)
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode()
    Path(path).write_bytes(header + arr.tobytes())


def read_image(path: PathLike) -> np.ndarray:
    """Load PGM or 8-bit PNG (gray or RGB) as a float array in [0, 255]."""
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return read_pgm(path)
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB" if "A" in im.mode or im.mode == "P" else "L")
        return np.asarray(im, dtype=float)


def heatmap_bytes(attr: np.ndarray) -> np.ndarray:
    """Min-max normalize a real-valued map to the 0..255 range."""
    attr = np.asarray(attr, dtype=float)
    lo, hi = attr.min(), attr.max()
    if hi == lo:
        return np.zeros(attr.shape, dtype=np.uint8)
    return np.round((attr - lo) / (hi - lo) * 255.0).astype(np.uint8)


def write_csv_matrix(path: PathLike, array: np.ndarray) -> None:
    arr = np.asarray(array, dtype=float)
    with open(path, "w") as fh:
        for row in np.atleast_2d(arr):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_csv_matrix(path: PathLike) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(v) for v in line.split(",")])
    if not rows:
        raise InvalidInputError(f"{path} holds no data")
    return np.array(rows, dtype=float)
