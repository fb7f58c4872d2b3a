from __future__ import annotations

import math
from typing import Iterable, Sequence, Tuple

import numpy as np


def child_rng(seed: int, *counter: int) -> np.random.Generator:
    """Generator for the stream addressed by ``counter`` under ``seed``.

    Streams depend only on (seed, counter), never on which worker draws them,
    so chunked work reproduces the serial result for any worker count.
    """
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(c) for c in counter))
    return np.random.default_rng(ss)


def sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def ceil_tol(x: float, rel: float = 1e-12) -> int:
    # ceil that ignores float noise just above an integer
    return int(math.ceil(x - rel * max(1.0, abs(x))))


def parity(v: np.ndarray) -> np.ndarray:
    """Bit parity of non-negative int64 values (0 or 1)."""
    v = np.asarray(v, dtype=np.int64)
    v = v ^ (v >> 32)
    v = v ^ (v >> 16)
    v = v ^ (v >> 8)
    v = v ^ (v >> 4)
    v = v & 0xF
    return (np.int64(0x6996) >> v) & 1


def encode(digits: Sequence[int], n: int) -> int:
    code = 0
    for d in digits:
        code = code * n + int(d)
    return code


def decode(code: int, n: int, k: int) -> Tuple[int, ...]:
    out = [0] * k
    for i in range(k - 1, -1, -1):
        code, out[i] = divmod(code, n)
    return tuple(out)


def decode_array(codes: np.ndarray, n: int, k: int) -> np.ndarray:
    """Row-wise base-n digits (most significant first) of an int64 code array."""
    codes = np.asarray(codes, dtype=np.int64).copy()
    out = np.zeros((codes.shape[0], k), dtype=np.int64)
    for i in range(k - 1, -1, -1):
        out[:, i] = codes % n
        codes //= n
    return out


def masks_from_digits(digits: np.ndarray) -> np.ndarray:
    """XOR of 1 << d along each row: the support of the monomial x^S (repeats cancel)."""
    digits = np.asarray(digits, dtype=np.int64)
    mask = np.zeros(digits.shape[0], dtype=np.int64)
    for col in range(digits.shape[1]):
        mask ^= np.left_shift(np.int64(1), digits[:, col])
    return mask


def within(a: float, b: float, rel: float, abs_tol: float = 0.0) -> bool:
    return abs(a - b) <= max(rel * max(abs(a), abs(b)), abs_tol)


def rel_residual(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(b))


def chunks(total: int, size: int) -> Iterable[Tuple[int, int]]:
    for i, start in enumerate(range(0, total, size)):
        yield i, min(size, total - start)
