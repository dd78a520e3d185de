"""Binary PGM (P5) output for reconstructed frames.

Intensities are mapped linearly from [u_min, u_max] to 0..255 with
round-half-up, which keeps golden files bit-exact across platforms.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def to_gray(image, bounds):
    """Map a float image with values in ``bounds`` to uint8 0..255."""
    u_min, u_max = bounds
    if u_max <= u_min:
        raise ValueError(f"bounds must satisfy u_min < u_max, got {bounds}")
    scaled = 255.0 * (np.asarray(image, dtype=np.float64) - u_min) / (u_max - u_min)
    # floor(x + 0.5) is round-half-up; np.round would round half to even
    gray = np.floor(scaled + 0.5)
    return np.clip(gray, 0, 255).astype(np.uint8)


def write_pgm(image, bounds, path):
    """Write a binary PGM (magic P5, maxval 255), rows top to bottom."""
    gray = to_gray(image, bounds)
    if gray.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {gray.shape}")
    h, w = gray.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(gray.tobytes())
    except OSError as exc:
        raise OSError(f"failed to write PGM {path}: {exc}") from exc


def write_pgm_autoscale(image, path):
    """Write a PGM scaled to the image's own min/max (debug dumps)."""
    arr = np.asarray(image, dtype=np.float64)
    lo, hi = float(arr.min()), float(arr.max())
    if hi <= lo:
        hi = lo + 1.0
    write_pgm(arr, (lo, hi), path)


def read_pgm(path):
    """Read a binary PGM written by write_pgm; returns a uint8 array."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    # header = magic, width, height, maxval as whitespace-separated tokens
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    w, h, maxval = tokens
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    payload = data[pos : pos + w * h]
    if len(payload) != w * h:
        raise ValueError(f"{path}: truncated payload ({len(payload)} of {w * h} bytes)")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w)


def frame_path(directory, prefix, index):
    """Frame file naming convention: <prefix>_<six-digit index>.pgm"""
    return Path(directory) / f"{prefix}_{index:06d}.pgm"
