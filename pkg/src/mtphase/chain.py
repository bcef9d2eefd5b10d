"""Finite-strip chain of order m: generator, stationary distribution, exact velocity.

The order-m chain keeps only the ``m + 1`` rightmost monomers of the head;
attachment shifts the window, detachment prepends a MINUS on the left, and
conversion acts as in the full chain.  Words are (m+1)-bit integers, bit 0
being the active end; all ``2**(m+1)`` words are valid states (there is no
leftmost-PLUS constraint after truncation, and the all-MINUS word plays the
role of the empty head).

The stationary mass ``pi_plus`` of words with a PLUS active end determines
the exact drift of the position component:

    velocity = pi_plus * lambda_plus + pi_minus * (lambda_minus - mu)

``pi_plus`` increases strictly with m, so these velocities approximate the
full-chain velocity from below.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverDivergence
from .model import Monomer, Rates

#: Largest order accepted by default (2**23 states).
MAX_ORDER = 22

#: Number of states up to which the dense LU path is used.
_DENSE_LIMIT = 2048

_UNIFORMIZATION_MAX_ITERS = 500_000


def word_from_string(text: str) -> int:
    """Parse a display-order ``+``/``-`` word into its integer encoding."""
    bits = 0
    for ch in text:
        bits = (bits << 1) | (1 if ch == "+" else 0)
    return bits


def word_to_string(word: int, m: int) -> str:
    """Render an (m+1)-bit word in display order, leftmost first."""
    return "".join("+" if word >> j & 1 else "-" for j in range(m, -1, -1))


def word_symbols(word: int, m: int) -> tuple[Monomer, ...]:
    return tuple(
        Monomer.PLUS if word >> j & 1 else Monomer.MINUS for j in range(m, -1, -1)
    )


@dataclass(frozen=True)
class GeneratorMatrix:
    """Off-diagonal rate entries of the order-m word chain.

    The diagonal is implied (negative row sum).  Entries may repeat an
    ``(i, j)`` pair when two event kinds share a target; they sum.
    """

    m: int
    rows: np.ndarray
    cols: np.ndarray
    rates: np.ndarray

    @property
    def n_states(self) -> int:
        return 1 << (self.m + 1)

    def csr(self) -> sp.csr_matrix:
        """Full generator, diagonal included, as CSR."""
        n = self.n_states
        off = sp.coo_matrix(
            (self.rates, (self.rows, self.cols)), shape=(n, n)
        ).tocsr()
        off.sum_duplicates()
        diag = -np.asarray(off.sum(axis=1)).ravel()
        return (off + sp.diags(diag)).tocsr()


@dataclass(frozen=True)
class StationaryDist:
    """Stationary probability vector of the word chain plus both end-class masses."""

    m: int
    pi: np.ndarray
    pi_plus: float
    pi_minus: float
    residual: float


@dataclass(frozen=True)
class MarginalRow:
    m: int
    pi_plus: float
    velocity: float


def build_generator(m: int, rates: Rates) -> GeneratorMatrix:
    """Generator of the order-m word chain.

    Transitions per word ``w``:

    * attach at ``lambda_plus``/``lambda_minus`` by the active-end bit;
      target ``((w << 1) | 1) & mask`` (the all-PLUS word self-loops and is
      dropped);
    * detach at ``mu`` when bit 0 is clear and the word is not all-MINUS;
      target ``w >> 1``.  Detachment from the all-MINUS word moves the
      position but leaves the word fixed, so it contributes no entry;
    * conversion at rate 1 per set bit ``j``; target clears bit ``j``.
    """
    if m < 0:
        raise ValueError("order m must be nonnegative")
    if m > MAX_ORDER:
        raise ValueError(f"order m={m} exceeds the supported cap {MAX_ORDER}")
    n = 1 << (m + 1)
    mask = n - 1
    words = np.arange(n, dtype=np.int64)
    plus_end = (words & 1).astype(bool)

    rows = []
    cols = []
    vals = []

    attach_to = ((words << 1) | 1) & mask
    keep = attach_to != words  # only the all-PLUS word maps to itself
    rows.append(words[keep])
    cols.append(attach_to[keep])
    vals.append(np.where(plus_end[keep], rates.lambda_plus, rates.lambda_minus))

    detach_from = words[~plus_end & (words != 0)]
    rows.append(detach_from)
    cols.append(detach_from >> 1)
    vals.append(np.full(detach_from.size, rates.mu))

    for j in range(m + 1):
        bit = np.int64(1 << j)
        src = words[(words & bit) != 0]
        rows.append(src)
        cols.append(src ^ bit)
        vals.append(np.ones(src.size))

    return GeneratorMatrix(
        m=m,
        rows=np.concatenate(rows),
        cols=np.concatenate(cols),
        rates=np.concatenate(vals).astype(np.float64),
    )


def _residual(q: sp.csr_matrix, pi: np.ndarray) -> float:
    return float(np.max(np.abs(q.T @ pi)))


def _solve_dense(q: sp.csr_matrix) -> np.ndarray:
    n = q.shape[0]
    a = q.toarray().T
    a[0, :] = 1.0  # replace one redundant balance equation by normalization
    b = np.zeros(n)
    b[0] = 1.0
    return np.linalg.solve(a, b)


def _solve_sparse(q: sp.csr_matrix) -> np.ndarray:
    n = q.shape[0]
    qt = q.T.tocsr()
    ones = sp.csr_matrix(np.ones((1, n)))
    a = sp.vstack([ones, qt[1:, :]]).tocsc()
    b = np.zeros(n)
    b[0] = 1.0
    return spla.spsolve(a, b)


def _uniformization_refine(
    q: sp.csr_matrix, pi: np.ndarray, tol: float, max_iters: int
) -> np.ndarray:
    """Power iteration on the uniformized kernel, warm-started at ``pi``."""
    qt = q.T.tocsr()
    lam = 1.01 * float(np.max(-q.diagonal()))
    pi = np.maximum(pi, 0.0)
    pi /= pi.sum()
    for it in range(max_iters):
        pi = pi + (qt @ pi) / lam
        if it % 64 == 0:
            pi = np.maximum(pi, 0.0)
            pi /= pi.sum()
            if float(np.max(np.abs(qt @ pi))) <= 0.5 * tol:
                break
    pi = np.maximum(pi, 0.0)
    return pi / pi.sum()


def stationary(gen: GeneratorMatrix, tol: float = 1e-12) -> StationaryDist:
    """Probability vector solving ``pi Q = 0`` with residual at most ``tol``.

    Direct LU (dense below ``_DENSE_LIMIT`` states, sparse above) with a
    uniformization fallback if the direct residual misses the tolerance.
    """
    q = gen.csr()
    n = q.shape[0]
    pi = _solve_dense(q) if n <= _DENSE_LIMIT else _solve_sparse(q)
    if not np.all(np.isfinite(pi)):
        pi = np.full(n, 1.0 / n)
    pi = np.maximum(pi, 0.0)
    total = pi.sum()
    if total <= 0:
        raise SolverDivergence(f"stationary solve collapsed at m={gen.m}")
    pi /= total
    res = _residual(q, pi)
    if res > tol:
        pi = _uniformization_refine(q, pi, tol, _UNIFORMIZATION_MAX_ITERS)
        res = _residual(q, pi)
        if res > tol:
            raise SolverDivergence(
                f"stationary residual {res:.3e} above tol {tol:.3e} at m={gen.m}"
            )
    plus_mass = float(pi[1::2].sum())  # states with bit 0 set
    return StationaryDist(
        m=gen.m,
        pi=pi,
        pi_plus=plus_mass,
        pi_minus=1.0 - plus_mass,
        residual=res,
    )


def exact_velocity(m: int, rates: Rates, tol: float = 1e-12) -> float:
    """Exact drift of the order-m chain's position component."""
    dist = stationary(build_generator(m, rates), tol=tol)
    return velocity_from_plus_mass(dist.pi_plus, rates)


def velocity_from_plus_mass(pi_plus: float, rates: Rates) -> float:
    v_plus = rates.lambda_plus
    v_minus = rates.lambda_minus - rates.mu
    return pi_plus * v_plus + (1.0 - pi_plus) * v_minus


def plus_marginal_table(
    m_max: int, rates: Rates, tol: float = 1e-12
) -> list[MarginalRow]:
    """PLUS-end stationary mass and exact velocity for every order up to ``m_max``."""
    rows = []
    for m in range(m_max + 1):
        dist = stationary(build_generator(m, rates), tol=tol)
        rows.append(
            MarginalRow(
                m=m,
                pi_plus=dist.pi_plus,
                velocity=velocity_from_plus_mass(dist.pi_plus, rates),
            )
        )
    return rows
