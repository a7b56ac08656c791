"""Promptable segmenter backends.

A promptable segmenter takes a grayscale image plus foreground point
prompts and returns one or more candidate masks with confidence scores.
Two backends are provided:

* :class:`OracleSegmenter` - deterministic region growing, used for
  phantom experiments and tests.
* :class:`ExternalProcessSegmenter` - drives an external adapter process
  (e.g. one wrapping a pretrained promptable segmentation model) over a
  newline-delimited JSON protocol on its standard streams.

Wire protocol (one JSON object per line):

* handshake, emitted by the adapter on startup::

    {"ready": true, "protocol": 1}

* request::

    {"id": <u64>, "op": "segment", "height": H, "width": W,
     "image_pgm_b64": "<base64 of binary PGM bytes>",
     "points": [[row, col], ...]}

* response::

    {"id": <u64>, "masks": [{"rle": [c0, c1, ...], "score": s}, ...]}
    {"id": <u64>, "error": "<message>"}

Masks travel run-length encoded over the row-major scan: ``c0`` counts
leading False bits, then runs alternate True/False; the counts sum to
``H * W``.
"""

from __future__ import annotations

import base64
import json
import os
import select
import subprocess
import sys
import time
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
from scipy import ndimage

from .errors import BackendError, BackendTimeout, ProtocolError, ShapeError
from .io import encode_pgm
from .validation import check_gray_image, check_point_in_bounds

DEFAULT_TIMEOUT = 120.0
PROTOCOL_VERSION = 1


@dataclass(frozen=True)
class MaskCandidate:
    mask: np.ndarray  # 2-D bool
    score: float


@dataclass(frozen=True)
class SegmenterOutput:
    candidates: tuple[MaskCandidate, ...]

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)


class PromptableSegmenter(Protocol):
    """Capability contract for segmentation backends.

    Implementations should return candidate masks that include the prompt
    points, but downstream selection does not trust this: real backends
    may violate it.
    """

    def segment(self, image, points) -> SegmenterOutput: ...


def rle_encode(mask) -> list[int]:
    """Encode a bool mask as alternating run lengths over the row-major scan.

    The first count covers leading False bits (possibly zero), and counts
    always sum to the number of pixels.
    """
    flat = np.asarray(mask, dtype=bool).ravel()
    if flat.size == 0:
        return [0]
    changes = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs.insert(0, 0)
    return [int(r) for r in runs]


def rle_decode(runs: Sequence[int], height: int, width: int) -> np.ndarray:
    """Decode alternating run lengths into an (height, width) bool mask."""
    runs = [int(r) for r in runs]
    if any(r < 0 for r in runs):
        raise ProtocolError("negative run length")
    total = sum(runs)
    if total != height * width:
        raise ProtocolError(f"run lengths sum to {total}, expected {height * width}")
    flat = np.zeros(total, dtype=bool)
    pos = 0
    value = False
    for r in runs:
        if value:
            flat[pos:pos + r] = True
        pos += r
        value = not value
    return flat.reshape(height, width)


class OracleSegmenter:
    """Region-growing segmenter with exact, deterministic behaviour.

    For each prompt, grows an 8-connected region over pixels whose
    intensity lies within ``fill_tolerance`` of the prompt pixel's
    intensity. Enclosed holes (small bright particles inside an otherwise
    uniform region) are filled, mirroring how a real promptable segmenter
    returns the whole object rather than a speckled one. The union of the
    grown regions is returned as a single candidate with score 1.0.
    """

    def __init__(self, fill_tolerance: int = 10):
        if fill_tolerance < 0:
            raise ValueError("fill_tolerance must be >= 0")
        self.fill_tolerance = fill_tolerance

    def segment(self, image, points) -> SegmenterOutput:
        arr = check_gray_image(image)
        union = np.zeros(arr.shape, dtype=bool)
        values = arr.astype(np.int16)
        for point in points:
            r, c = check_point_in_bounds(point, arr.shape)
            reach = np.abs(values - int(arr[r, c])) <= self.fill_tolerance
            labels, _ = ndimage.label(reach, structure=np.ones((3, 3), dtype=bool))
            union |= labels == labels[r, c]
        union = ndimage.binary_fill_holes(union)
        return SegmenterOutput((MaskCandidate(union, 1.0),))


class _LineChannel:
    """Line-oriented reader over a pipe file descriptor with timeouts."""

    def __init__(self, fd: int):
        self._fd = fd
        self._buf = bytearray()

    def readline(self, timeout: float) -> bytes:
        deadline = None if timeout is None else (time.monotonic() + timeout)
        while True:
            nl = self._buf.find(b"\n")
            if nl >= 0:
                line = bytes(self._buf[:nl])
                del self._buf[:nl + 1]
                return line
            remaining = None if deadline is None else deadline - time.monotonic()
            if remaining is not None and remaining <= 0:
                raise BackendTimeout("timed out waiting for adapter response")
            ready, _, _ = select.select([self._fd], [], [], remaining)
            if not ready:
                raise BackendTimeout("timed out waiting for adapter response")
            chunk = os.read(self._fd, 65536)
            if not chunk:
                raise BackendError("adapter closed its output stream")
            self._buf.extend(chunk)


class ExternalProcessSegmenter:
    """Adapter-process backend speaking the newline-JSON wire protocol.

    Requests are strictly serial per connection; run one connection per
    worker for parallelism. Usable as a context manager.
    """

    def __init__(self, command: Sequence[str], timeout: float = DEFAULT_TIMEOUT):
        self.command = list(command)
        self.timeout = timeout
        self._next_id = 1
        self._proc = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=sys.stderr.fileno() if hasattr(sys.stderr, "fileno") else None,
        )
        self._channel = _LineChannel(self._proc.stdout.fileno())
        self._handshake()

    def _handshake(self) -> None:
        try:
            line = self._channel.readline(self.timeout)
        except BackendError:
            self.close()
            raise
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            self.close()
            raise ProtocolError(f"malformed handshake line: {line!r}") from exc
        if msg.get("ready") is not True or msg.get("protocol") != PROTOCOL_VERSION:
            self.close()
            raise ProtocolError(f"unexpected handshake: {msg}")

    def segment(self, image, points) -> SegmenterOutput:
        arr = check_gray_image(image)
        h, w = arr.shape
        request_id = self._next_id
        self._next_id += 1
        request = {
            "id": request_id,
            "op": "segment",
            "height": h,
            "width": w,
            "image_pgm_b64": base64.b64encode(encode_pgm(arr)).decode("ascii"),
            "points": [[int(p[0]), int(p[1])] for p in points],
        }
        if self._proc.poll() is not None:
            raise BackendError("adapter process has exited")
        try:
            self._proc.stdin.write(json.dumps(request).encode() + b"\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BackendError("adapter closed its input stream") from exc

        line = self._channel.readline(self.timeout)
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"malformed response line: {line[:200]!r}") from exc
        if msg.get("id") != request_id:
            raise ProtocolError(f"response id {msg.get('id')} does not echo request id {request_id}")
        if "error" in msg:
            raise BackendError(f"adapter error: {msg['error']}")
        if not isinstance(msg.get("masks"), list) or not msg["masks"]:
            raise ProtocolError("response carries no masks")
        candidates = []
        for entry in msg["masks"]:
            mask = rle_decode(entry.get("rle", []), h, w)
            if mask.shape != (h, w):
                raise ProtocolError("mask dimensions do not match the image")
            candidates.append(MaskCandidate(mask, float(entry.get("score", 0.0))))
        return SegmenterOutput(tuple(candidates))

    def close(self) -> None:
        proc = self._proc
        if proc is None:
            return
        try:
            if proc.stdin and not proc.stdin.closed:
                proc.stdin.close()
            try:
                proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()
        finally:
            if proc.stdout:
                proc.stdout.close()
            self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass


def validate_candidates(output: SegmenterOutput, shape) -> SegmenterOutput:
    """Check that every candidate mask matches the image dimensions."""
    for cand in output:
        if cand.mask.shape != tuple(shape):
            raise ShapeError(
                f"candidate mask shape {cand.mask.shape} does not match image {tuple(shape)}")
    return output
