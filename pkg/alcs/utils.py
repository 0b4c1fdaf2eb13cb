"""Utility functions."""

import os
import time
import tempfile
from pathlib import Path
import numpy as np
from loguru import logger as log


class timer:
    def __init__(self, message: str):
        self.message = message
        self.elapsed = 0.0

    def __enter__(self):
        self.start_time = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        self.elapsed = time.perf_counter() - self.start_time
        log.debug(f"{self.message} {self.elapsed:.4f} seconds")


def round_half_even(x):
    # type: (float) -> int
    """Round to the nearest integer, ties to even."""
    return int(np.rint(x))


def apportion(sizes, total):
    # type: (list[int], int) -> list[int]
    """
    Split `total` proportionally to `sizes` so that the shares sum to `total` exactly.

    Shares are rounded half-to-even, then repaired one unit at a time: a missing unit goes to
    the group with the largest fractional remainder, a surplus unit is taken from the group with
    the smallest one. Ties go to the larger group, then the lower index. No share exceeds its
    group size or drops below zero.

    :param sizes: Group sizes (non-negative)
    :param total: Units to distribute, at most sum(sizes)
    :return: Per-group shares
    """
    n = sum(sizes)
    if total < 0 or total > n:
        raise ValueError(f"Cannot apportion {total} units over groups of total size {n}")
    if n == 0:
        return [0 for _ in sizes]
    raw = [size / n * total for size in sizes]
    shares = [min(size, round_half_even(r)) for size, r in zip(sizes, raw)]
    while sum(shares) < total:
        open_ = [i for i, s in enumerate(shares) if s < sizes[i]]
        i = min(open_, key=lambda j: (-(raw[j] - shares[j]), -sizes[j], j))
        shares[i] += 1
    while sum(shares) > total:
        open_ = [i for i, s in enumerate(shares) if s > 0]
        i = min(open_, key=lambda j: (raw[j] - shares[j], -sizes[j], j))
        shares[i] -= 1
    return shares


def atomic_write_text(path, text):
    # type: (str|Path, str) -> Path
    """
    Write text to a temporary sibling file and rename it into place.

    :param path: Destination file
    :param text: Content to write (LF line endings)
    :return: Destination path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path
