"""Shared construction helpers for the test suite.

Everything is seeded through an explicit numpy Generator so repeated runs
see identical data.  Oracles used by the tests (power iteration, scalar
recursions) live next to the tests that use them, not here.
"""

from __future__ import annotations

import numpy as np

from ergocert.linalg import BlockMatrix, HermitianOperator


def random_complex(rng: np.random.Generator, n: int, m: int | None = None) -> np.ndarray:
    m = n if m is None else m
    return rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))


def random_block_matrix(rng: np.random.Generator, dims) -> BlockMatrix:
    return BlockMatrix([random_complex(rng, d) for d in dims])


def random_hermitian(rng: np.random.Generator, dims, scale: float = 1.0) -> HermitianOperator:
    blocks = []
    for d in dims:
        g = random_complex(rng, d)
        blocks.append(scale * 0.5 * (g + g.conj().T))
    return HermitianOperator(blocks)


def random_psd(rng: np.random.Generator, dims, rank=None) -> HermitianOperator:
    blocks = []
    for d in dims:
        r = d if rank is None else min(rank, d)
        g = random_complex(rng, d, r)
        blocks.append(g @ g.conj().T)
    return HermitianOperator(blocks)


def random_unitary(rng: np.random.Generator, dims) -> BlockMatrix:
    blocks = []
    for d in dims:
        q, r = np.linalg.qr(random_complex(rng, d))
        blocks.append(q * (np.diag(r) / np.abs(np.diag(r))))
    return BlockMatrix(blocks)
