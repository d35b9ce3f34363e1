"""Complex linear algebra and seeded sampling shared by the rest of the package."""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

# Triangular-factor diagonal below this fraction of the largest one => rank deficient.
RANK_RTOL = 1e-10


class ParameterError(ValueError):
    """Invalid scalar parameter or inconsistent dimensions."""


class RankDeficientError(np.linalg.LinAlgError):
    """Least-squares column set is numerically rank deficient."""

    def __init__(self, n_columns: int, rank: int):
        self.n_columns = n_columns
        self.rank = rank
        super().__init__(f"rank-deficient column set: {n_columns} columns, numerical rank {rank}")


def stream_id(*keys) -> int:
    """Stable 64-bit id for a tuple of ints/strings (independent of PYTHONHASHSEED)."""
    h = hashlib.blake2b(digest_size=8)
    for k in keys:
        if isinstance(k, str):
            h.update(b"s" + k.encode("utf-8") + b"\0")
        else:
            h.update(b"i" + struct.pack("<Q", int(k) & 0xFFFFFFFFFFFFFFFF))
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(master_seed, stream_id)``.

    Each call to :meth:`generator` starts the stream from the beginning, so two
    consumers given the same ``RngStream`` see bitwise-identical samples.
    """

    master_seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence([self.master_seed & (2**64 - 1), self.stream_id & (2**64 - 1)])
        return np.random.Generator(np.random.PCG64(seq))

    def child(self, *keys) -> "RngStream":
        return RngStream(self.master_seed, stream_id(self.stream_id, *keys))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def sample_complex_gaussian(rows: int, cols: int, variance: float, rng) -> np.ndarray:
    """I.i.d. circularly-symmetric CN(0, variance) entries, shape (rows, cols)."""
    if variance < 0:
        raise ParameterError(f"variance must be >= 0, got {variance}")
    gen = as_generator(rng)
    # Interleaved (re, im) pairs reinterpreted in place as complex128.
    z = gen.standard_normal((rows, 2 * cols)).view(np.complex128)
    z *= np.sqrt(variance / 2.0)
    return z


def conj_transpose(m: np.ndarray) -> np.ndarray:
    return np.conj(np.asarray(m)).T


def frobenius_norm(m: np.ndarray) -> float:
    m = np.asarray(m)
    return float(np.sqrt(np.sum(m.real**2 + m.imag**2)))


def least_squares(A_sub: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Solve ``min ||Y - A_sub X||_F`` through a reduced QR factorization.

    Raises :class:`RankDeficientError` when a diagonal entry of R falls below
    ``RANK_RTOL`` times the largest one.
    """
    A_sub = np.asarray(A_sub)
    Y = np.asarray(Y)
    m, n = A_sub.shape
    if Y.shape[0] != m:
        raise ParameterError(f"row mismatch: A_sub has {m} rows, Y has {Y.shape[0]}")
    if n == 0:
        return np.zeros((0,) + Y.shape[1:], dtype=np.result_type(A_sub, Y, np.complex128))
    if n > m:
        raise RankDeficientError(n, m)
    q, r = np.linalg.qr(A_sub, mode="reduced")
    diag = np.abs(np.diag(r))
    top = diag.max()
    if top == 0.0 or np.any(diag < RANK_RTOL * top):
        raise RankDeficientError(n, int(np.sum(diag >= RANK_RTOL * top)) if top > 0 else 0)
    return solve_triangular(r, conj_transpose(q) @ Y, lower=False)
