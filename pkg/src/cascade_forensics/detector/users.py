"""Account co-engagement vectors from a truncated SVD of the account x cascade incidence."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import svds

from ..synth.rng import make_rng

logger = logging.getLogger(__name__)

DENSE_LIMIT = 4_000_000


@dataclass
class UserVectors:
    accounts: list[str]
    vectors: np.ndarray
    singular_values: np.ndarray

    def __post_init__(self) -> None:
        self.index = {a: i for i, a in enumerate(self.accounts)}

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def lookup(self, accounts: Sequence[str]) -> np.ndarray:
        """Rows for ``accounts``; unknown accounts get the zero vector."""
        out = np.zeros((len(accounts), self.dim))
        for i, a in enumerate(accounts):
            j = self.index.get(a)
            if j is not None:
                out[i] = self.vectors[j]
        return out


def incidence_matrix(account_sets: Sequence[Sequence[str]]) -> tuple[sp.csr_matrix, list[str]]:
    accounts = sorted({a for s in account_sets for a in s})
    idx = {a: i for i, a in enumerate(accounts)}
    rows, cols = [], []
    for j, s in enumerate(account_sets):
        for a in set(s):
            rows.append(idx[a])
            cols.append(j)
    m = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(accounts), len(account_sets)))
    return m, accounts


def _fix_signs(u: np.ndarray, vt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pick = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[pick, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs, vt * signs[:, None]


def build_user_vectors(account_sets: Sequence[Sequence[str]], k: int = 50, seed: int = 0) -> UserVectors:
    """Rank-k projections ``M V_k = U_k S_k`` of each account's binary engagement row.

    ``account_sets[j]`` lists the accounts that engaged in training cascade j.
    The largest-magnitude entry of each left singular vector is made positive.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not account_sets:
        raise ValueError("no cascades")
    m, accounts = incidence_matrix(account_sets)
    n_rows, n_cols = m.shape
    if n_rows * n_cols <= DENSE_LIMIT or min(m.shape) <= k + 1:
        u, s, vt = np.linalg.svd(m.toarray(), full_matrices=False)
    else:
        v0 = make_rng(seed).uniform(-1.0, 1.0, min(m.shape))
        u, s, vt = svds(m, k=k, v0=v0, solver="arpack")
        order = np.argsort(-s, kind="stable")
        u, s, vt = u[:, order], s[order], vt[order]
    tol = (s.max() if s.size else 0.0) * max(m.shape) * np.finfo(float).eps
    rank = int((s > tol).sum())
    if k > rank:
        msg = f"user vector dimension {k} exceeds incidence rank {rank}; truncated"
        warnings.warn(msg, stacklevel=2)
        logger.warning(msg)
        k = rank
    u, vt = _fix_signs(u[:, :k], vt[:k])
    return UserVectors(accounts, u * s[:k], s[:k].copy())
