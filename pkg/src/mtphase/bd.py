"""Birth-and-death hitting-time transforms: closed forms, linear solves, resummation.

Three layers, matching how the transforms factor over a trajectory:

* a homogeneous walk with up rate ``lam`` and down rate ``nu > lam`` admits a
  closed-form joint transform of (jumps, duration) to absorption at 0 -- the
  smallest positive root of ``lam * psi^2 + nu = a * psi`` with
  ``a = (lam + nu - s) / z``, finite exactly when ``4 lam nu z^2 <= (lam +
  nu - s)^2``;
* a finite chain on ``{1..M}`` with absorbing boundary {0, M+1} satisfies a
  tridiagonal first-step system for the two absorption functionals, solved
  directly;
* the full birth-and-death process (birth ``lam``, death ``m * mu`` from
  state m) is resummed from those pieces: the excursion transform above the
  threshold is estimated by Monte Carlo and the geometric series over
  returns to the threshold closes the answer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DomainError, SingularSystem
from .rng import as_draws

INFINITE = math.inf


@dataclass(frozen=True)
class BdParams:
    """Birth rate, per-individual death rate, and the resummation threshold."""

    birth_rate: float
    death_rate: float
    threshold: int

    def __post_init__(self) -> None:
        if self.birth_rate <= 0 or self.death_rate <= 0:
            raise ValueError("rates must be positive")
        if self.threshold < 1:
            raise ValueError("threshold must be a positive integer")
        if self.threshold * self.death_rate <= self.birth_rate:
            raise ValueError(
                "need threshold * death_rate > birth_rate for a stable resummation"
            )


@dataclass(frozen=True)
class FiniteChainSpec:
    """Up/down probabilities and holding rates of a finite chain on {1..M}."""

    p: np.ndarray
    q: np.ndarray
    rho: np.ndarray

    def __post_init__(self) -> None:
        p, q, rho = map(np.asarray, (self.p, self.q, self.rho))
        if not (p.shape == q.shape == rho.shape) or p.ndim != 1 or p.size == 0:
            raise ValueError("p, q, rho must be equal-length nonempty vectors")
        if np.any(p <= 0) or np.any(q <= 0) or np.any(rho <= 0):
            raise ValueError("entries must be strictly positive")
        if not np.allclose(p + q, 1.0, rtol=0, atol=1e-12):
            raise ValueError("p_m + q_m must equal 1")

    @property
    def size(self) -> int:
        return self.p.size


@dataclass(frozen=True)
class ResummationResult:
    """Resummed absorption transform with its exact and sampled ingredients."""

    z: float
    s: float
    phi0: np.ndarray
    phiM1: np.ndarray
    psi_hat: float
    psi_hat_se: float
    denominator_margin: float
    psi_bar: np.ndarray

    @property
    def infinite(self) -> bool:
        return self.denominator_margin <= 0.0


def psi1_closed_form(up_rate: float, down_rate: float, z: float, s: float) -> float:
    """Joint transform of (jumps, time) to absorption from state 1.

    Returns ``math.inf`` outside the finiteness region
    ``4 * up * down * z^2 <= (up + down - s)^2`` (with positive numerator
    ``a``); requires negative drift ``down_rate > up_rate``.
    """
    if down_rate <= up_rate:
        raise DomainError("need down_rate > up_rate (negative drift)")
    if z <= 0:
        raise DomainError("z must be positive")
    a = (up_rate + down_rate - s) / z
    if a <= 0:
        return INFINITE
    disc = a * a - 4.0 * up_rate * down_rate
    if disc < 0:
        return INFINITE
    return (a - math.sqrt(disc)) / (2.0 * up_rate)


def stability_region_check(
    up_rate: float, down_rate: float, z_prime: float, s_prime: float
) -> bool:
    """True iff ``s' + 2 (z' - 1) sqrt(up * down) < (sqrt(down) - sqrt(up))^2``.

    A true verdict guarantees the closed-form transform is finite on the
    whole rectangle ``z <= z'``, ``s <= s'``.
    """
    if down_rate <= up_rate:
        raise DomainError("need down_rate > up_rate (negative drift)")
    root = math.sqrt(up_rate * down_rate)
    return s_prime + 2.0 * (z_prime - 1.0) * root < (
        math.sqrt(down_rate) - math.sqrt(up_rate)
    ) ** 2


def finite_chain_functionals(
    spec: FiniteChainSpec, z: float, s: float
) -> tuple[np.ndarray, np.ndarray]:
    """Both absorption functionals of the finite chain at transform point (z, s).

    Solves the first-step system phi_m = g_m (p_m phi_{m+1} + q_m phi_{m-1})
    with g_m = z rho_m / (rho_m - s), once per boundary condition:
    phi0 fixes (phi_0, phi_{M+1}) = (1, 0) and phiM1 fixes (0, 1).
    """
    rho_min = float(np.min(spec.rho))
    if s >= rho_min:
        raise ValueError(f"need s < min holding rate ({rho_min:g})")
    g = z * spec.rho / (spec.rho - s)
    n = spec.size
    ab = np.zeros((3, n))
    ab[1, :] = 1.0
    ab[0, 1:] = -g[:-1] * spec.p[:-1]  # superdiagonal
    ab[2, :-1] = -g[1:] * spec.q[1:]  # subdiagonal
    rhs = np.zeros((n, 2))
    rhs[0, 0] = g[0] * spec.q[0]
    rhs[-1, 1] = g[-1] * spec.p[-1]
    try:
        sol = scipy.linalg.solve_banded((1, 1), ab, rhs)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystem(f"tridiagonal solve failed: {exc}") from exc
    if not np.all(np.isfinite(sol)):
        raise SingularSystem("tridiagonal solve produced non-finite values")
    # residual check guards against a numerically degenerate (z, s)
    full = np.zeros((n, n))
    np.fill_diagonal(full, 1.0)
    for i in range(n - 1):
        full[i, i + 1] = ab[0, i + 1]
        full[i + 1, i] = ab[2, i]
    resid = np.max(np.abs(full @ sol - rhs))
    scale = max(1.0, float(np.max(np.abs(sol))))
    if resid > 1e-8 * scale:
        raise SingularSystem(f"solve residual {resid:.2e} indicates degeneracy")
    return sol[:, 0].copy(), sol[:, 1].copy()


def bd_chain_spec(params: BdParams) -> FiniteChainSpec:
    """Finite-chain spec induced by a birth-and-death process below its threshold."""
    m = np.arange(1, params.threshold + 1, dtype=np.float64)
    rho = params.birth_rate + m * params.death_rate
    p = params.birth_rate / rho
    return FiniteChainSpec(p=p, q=1.0 - p, rho=rho)


def sample_descent_transform(
    params: BdParams, z: float, s: float, n_samples: int, rng
) -> tuple[float, float]:
    """Monte Carlo estimate of ``E[z^jumps e^{s * time}]`` for the excursion
    from ``threshold + 1`` down to ``threshold``; returns (mean, std. error)."""
    if n_samples < 2:
        raise ValueError("need at least two samples")
    draws = as_draws(rng)
    lam = params.birth_rate
    mu = params.death_rate
    target = params.threshold
    log_z = math.log(z)
    total_w = 0.0
    total_w2 = 0.0
    for _ in range(n_samples):
        k = target + 1
        jumps = 0
        t = 0.0
        while k > target:
            rate_down = k * mu
            total = lam + rate_down
            t += draws.exp() / total
            jumps += 1
            if draws.u01() * total < lam:
                k += 1
            else:
                k -= 1
        w = math.exp(jumps * log_z + s * t)
        total_w += w
        total_w2 += w * w
    mean = total_w / n_samples
    var = max(total_w2 / n_samples - mean * mean, 0.0) * n_samples / (n_samples - 1)
    return mean, math.sqrt(var / n_samples)


def sample_absorption_transform(
    params: BdParams, start: int, z: float, s: float, n_samples: int, rng
) -> tuple[float, float]:
    """Direct Monte Carlo of ``E_start[z^jumps e^{s * time}]`` to absorption at 0."""
    if start < 1:
        raise ValueError("start state must be at least 1")
    draws = as_draws(rng)
    lam = params.birth_rate
    mu = params.death_rate
    log_z = math.log(z)
    total_w = 0.0
    total_w2 = 0.0
    for _ in range(n_samples):
        k = start
        jumps = 0
        t = 0.0
        while k > 0:
            rate_down = k * mu
            total = lam + rate_down
            t += draws.exp() / total
            jumps += 1
            if draws.u01() * total < lam:
                k += 1
            else:
                k -= 1
        w = math.exp(jumps * log_z + s * t)
        total_w += w
        total_w2 += w * w
    mean = total_w / n_samples
    var = max(total_w2 / n_samples - mean * mean, 0.0) * n_samples / (n_samples - 1)
    return mean, math.sqrt(var / n_samples)


def psibar_resummation(
    params: BdParams, z: float, s: float, mc_budget: int, rng
) -> ResummationResult:
    """Absorption transform of the birth-and-death process for every start
    state up to the threshold.

    Exact finite-chain functionals carry the part below the threshold; the
    excursion transform above it is sampled; the alternation between the two
    resums as a geometric series whose denominator margin
    ``1 - phiM1[M] * psi_hat`` is reported (nonpositive margin means the
    transform is infinite at this (z, s)).
    """
    spec = bd_chain_spec(params)
    phi0, phiM1 = finite_chain_functionals(spec, z, s)
    psi_hat, psi_se = sample_descent_transform(params, z, s, mc_budget, rng)
    margin = 1.0 - phiM1[-1] * psi_hat
    if margin <= 0.0:
        psi_bar = np.full(spec.size, INFINITE)
    else:
        psi_bar = phi0 + phiM1 * psi_hat * phi0[-1] / margin
    return ResummationResult(
        z=z,
        s=s,
        phi0=phi0,
        phiM1=phiM1,
        psi_hat=psi_hat,
        psi_hat_se=psi_se,
        denominator_margin=margin,
        psi_bar=psi_bar,
    )
