"""Lifetime transforms via the unit-shift recursion, and mean lifetimes.

Let ``phi_plus(s)`` be the Laplace transform of the lifetime of a freshly
attached PLUS monomer (the time until the chain first sits one site below
the attachment point with an empty head).  A first-step decomposition closes
on the pair ``(phi_plus(s), phi_plus(s + 1))``: with a = lp*lm,

    a * phi^2
    + [lp*mu + lm + lp*(mu + s)*c - (1 + lp + s)*(mu + lm + s)] * phi
    + mu * (1 - lp*c) = 0,          c = phi_plus(s + 1),

so seeding ``phi_plus(s + N) = 0`` deep in the chain and solving the
quadratic backwards recovers the transform on the whole unit chain.
Truncation is verified by doubling N until the answer stops moving.

The MINUS-end lifetime transform follows pointwise:

    phi_minus(s) = mu / (mu + lm + s - lm * phi_plus(s))

and the two mean lifetimes satisfy the exact balance
``1 + mu * E[T_minus] = lm * E[T_plus]``; the residual of that identity is
reported as a solver diagnostic.  When ``phi_plus(0) < 1`` the passage is
defective (regime transient to plus infinity) and both means are infinite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonConvergence, NoRootInUnitInterval
from .model import Rates

_RANGE_EPS = 1e-9
_DEFECTIVE_TOL = 1e-8


@dataclass(frozen=True)
class LaplaceGrid:
    """Transforms on a grid of shifts, plus solver diagnostics."""

    s_values: np.ndarray
    phi_plus: np.ndarray
    phi_minus: np.ndarray
    depth: int
    residual: float
    ambiguous_roots: bool


@dataclass(frozen=True)
class LifetimeMeans:
    """Mean lifetimes of both end classes; ``math.inf`` in the defective regime."""

    e_t_plus: float
    e_t_minus: float
    identity_defect: float
    phi0: float

    @property
    def infinite(self) -> bool:
        return math.isinf(self.e_t_plus)


def _quadratic_coeffs(rates: Rates, s, c):
    lp, lm, mu = rates.lambda_plus, rates.lambda_minus, rates.mu
    a = lp * lm
    b = lp * mu + lm + lp * (mu + s) * c - (1.0 + lp + s) * (mu + lm + s)
    c0 = mu * (1.0 - lp * c)
    return a, b, c0


def _unit_root(rates: Rates, s: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, bool]:
    """Root of the recursion quadratic inside [0, 1]; the smaller if both fit."""
    a, b, c0 = _quadratic_coeffs(rates, s, c)
    disc = b * b - 4.0 * a * c0
    scale = np.maximum(b * b, 1.0)
    bad = disc < -1e-10 * scale
    disc = np.where(disc < 0.0, 0.0, disc)
    sq = np.sqrt(disc)
    # stable companion-root form; q == 0 only when b == 0 and disc == 0
    q = -0.5 * (b + np.where(b >= 0.0, sq, -sq))
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = np.where(q != 0.0, q / a, 0.0)
        r2 = np.where(q != 0.0, c0 / q, 0.0)
    in1 = (r1 >= -_RANGE_EPS) & (r1 <= 1.0 + _RANGE_EPS) & ~bad
    in2 = (r2 >= -_RANGE_EPS) & (r2 <= 1.0 + _RANGE_EPS) & ~bad
    if not np.all(in1 | in2):
        idx = int(np.argmin(in1 | in2))
        raise NoRootInUnitInterval(
            f"no admissible root at shift {float(s[idx]):g} "
            f"(roots {float(r1[idx]):g}, {float(r2[idx]):g})"
        )
    big = 2.0  # sentinel outside [0, 1]
    cand1 = np.where(in1, r1, big)
    cand2 = np.where(in2, r2, big)
    root = np.minimum(cand1, cand2)
    both = in1 & in2 & (np.abs(r1 - r2) > 1e-12)
    return np.clip(root, 0.0, 1.0), bool(np.any(both))


def _backward_sweep(
    rates: Rates, s: np.ndarray, depth: int
) -> tuple[np.ndarray, np.ndarray, bool]:
    """One pass down the unit chains; returns (phi(s), phi(s+1), ambiguity)."""
    values = np.zeros_like(s)
    phi1 = values
    ambiguous = False
    for k in range(depth - 1, -1, -1):
        values, amb = _unit_root(rates, s + k, values)
        ambiguous = ambiguous or amb
        if k == 1:
            phi1 = values.copy()
    return values, phi1, ambiguous


def equation_defect(rates: Rates, s, phi_s, phi_s1):
    """Absolute defect of the recursion at one grid point."""
    lp, lm, mu = rates.lambda_plus, rates.lambda_minus, rates.mu
    denom = (1.0 + lp + s) * (mu + lm + s)
    rhs = (
        (1.0 + lp * phi_s) * (mu + lm * phi_s)
        + lp * ((mu + s) * phi_s - mu) * phi_s1
    ) / denom
    return np.abs(phi_s - rhs)


def phi_minus_from_plus(rates: Rates, s, phi_plus_at_s):
    """MINUS-end transform from the PLUS-end one at the same shift."""
    return rates.mu / (
        rates.mu + rates.lambda_minus + s - rates.lambda_minus * phi_plus_at_s
    )


def solve_phi(
    rates: Rates,
    s_values,
    depth: int = 40,
    tol: float = 1e-10,
    max_depth: int = 5120,
) -> LaplaceGrid:
    """Solve the recursion on ``s_values``, doubling the depth until stable.

    ``depth`` is the initial truncation level N (seed ``phi(s + N) = 0``);
    each verification pass doubles it and requires the answers to move by
    less than ``tol``.
    """
    s = np.asarray(s_values, dtype=np.float64)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("s_values must be a nonempty 1-d grid")
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise ValueError("shifts must be finite and nonnegative")
    if s.size > 1 and np.any(np.diff(s) <= 0):
        raise ValueError("s_values must be strictly increasing")
    if depth < 2:
        raise ValueError("depth must be at least 2")

    prev, _, _ = _backward_sweep(rates, s, depth)
    d = depth
    while True:
        d *= 2
        if d > max_depth:
            raise NonConvergence(f"depth doubling did not stabilize below {max_depth}")
        phi0, phi1, ambiguous = _backward_sweep(rates, s, d)
        if float(np.max(np.abs(phi0 - prev))) < tol:
            break
        prev = phi0

    residual = float(np.max(equation_defect(rates, s, phi0, phi1)))
    phi_minus = phi_minus_from_plus(rates, s, phi0)
    return LaplaceGrid(
        s_values=s,
        phi_plus=phi0,
        phi_minus=phi_minus,
        depth=d,
        residual=residual,
        ambiguous_roots=ambiguous,
    )


def mean_lifetimes(
    rates: Rates,
    tol: float = _DEFECTIVE_TOL,
    h: float = 1e-4,
    depth: int = 60,
) -> LifetimeMeans:
    """Mean lifetimes by Richardson-extrapolated one-sided differences at 0.

    ``phi(0) < 1 - tol`` flags the defective regime, where both means are
    infinite simultaneously.
    """
    grid = solve_phi(rates, np.array([0.0, 0.5 * h, h]), depth=depth, tol=1e-13)
    phi0 = float(grid.phi_plus[0])
    if phi0 < 1.0 - tol:
        return LifetimeMeans(
            e_t_plus=math.inf,
            e_t_minus=math.inf,
            identity_defect=math.nan,
            phi0=phi0,
        )

    def richardson(values: np.ndarray) -> float:
        d_h = (values[0] - values[2]) / h
        d_h2 = (values[0] - values[1]) / (0.5 * h)
        return 2.0 * d_h2 - d_h

    e_plus = richardson(grid.phi_plus)
    e_minus = richardson(grid.phi_minus)
    defect = abs(1.0 + rates.mu * e_minus - rates.lambda_minus * e_plus)
    return LifetimeMeans(
        e_t_plus=e_plus,
        e_t_minus=e_minus,
        identity_defect=defect,
        phi0=phi0,
    )
