"""Raster file I/O (binary PGM and 8-bit grayscale PNG) plus overlay rendering.

Masks are stored as images with 0 = background and 255 = object.
"""

from __future__ import annotations

import io as _io
import re
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InvalidImage
from .validation import check_binary_mask, check_gray_image

_PGM_HEADER = re.compile(rb"^P5\s+(?:#.*\s+)*(\d+)\s+(?:#.*\s+)*(\d+)\s+(?:#.*\s+)*(\d+)\s")


def encode_pgm(image) -> bytes:
    """Serialize a grayscale image as binary PGM (P5, maxval 255)."""
    arr = check_gray_image(image)
    h, w = arr.shape
    return b"P5\n%d %d\n255\n" % (w, h) + arr.tobytes()


def decode_pgm(data: bytes) -> np.ndarray:
    """Parse binary PGM (P5, maxval 255) into a 2-D uint8 array."""
    m = _PGM_HEADER.match(data)
    if not m:
        raise InvalidImage("not a binary PGM (P5) stream")
    w, h, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise InvalidImage(f"unsupported PGM maxval {maxval}")
    raw = data[m.end():]
    if len(raw) < h * w:
        raise InvalidImage("truncated PGM payload")
    return np.frombuffer(raw[: h * w], dtype=np.uint8).reshape(h, w)


def read_image(path) -> np.ndarray:
    """Read a grayscale image from a PGM or PNG file."""
    path = Path(path)
    data = path.read_bytes()
    if data[:2] == b"P5":
        return decode_pgm(data)
    with Image.open(_io.BytesIO(data)) as im:
        return np.asarray(im.convert("L"), dtype=np.uint8)


def write_image(path, image) -> None:
    """Write a grayscale image as PGM or PNG, chosen by file extension."""
    path = Path(path)
    arr = check_gray_image(image)
    if path.suffix.lower() == ".pgm":
        path.write_bytes(encode_pgm(arr))
    else:
        Image.fromarray(arr, mode="L").save(path)


def read_mask(path) -> np.ndarray:
    """Read a binary mask (nonzero = object) from a PGM or PNG file."""
    return read_image(path) > 0


def write_mask(path, mask) -> None:
    mask = check_binary_mask(mask)
    write_image(path, mask.astype(np.uint8) * 255)


# Overlay gray levels: boxes and crosses must stay distinguishable from
# each other and from typical image content.
BOX_GRAY = 255
POINT_GRAY = 128


def draw_overlay(image, boxes=(), points=(), box_gray: int = BOX_GRAY,
                 point_gray: int = POINT_GRAY, arm: int = 3) -> np.ndarray:
    """Render detections and ground-truth points onto a copy of ``image``.

    Each box is drawn as a 1-px rectangle outline around its center; each
    point as a small cross. Returns a new uint8 array.
    """
    out = check_gray_image(image).copy()
    h, w = out.shape
    for box in boxes:
        r, c = box.center
        top = r - box.height // 2
        left = c - box.width // 2
        bottom, right = top + box.height - 1, left + box.width - 1
        rr = slice(max(top, 0), min(bottom, h - 1) + 1)
        cc = slice(max(left, 0), min(right, w - 1) + 1)
        if 0 <= top < h:
            out[top, cc] = box_gray
        if 0 <= bottom < h:
            out[bottom, cc] = box_gray
        if 0 <= left < w:
            out[rr, left] = box_gray
        if 0 <= right < w:
            out[rr, right] = box_gray
    for (r, c) in points:
        rr = slice(max(r - arm, 0), min(r + arm, h - 1) + 1)
        cc = slice(max(c - arm, 0), min(c + arm, w - 1) + 1)
        if 0 <= c < w:
            out[rr, c] = point_gray
        if 0 <= r < h:
            out[r, cc] = point_gray
    return out
