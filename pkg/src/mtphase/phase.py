"""Phase classification and zero-velocity boundary computation.

A parameter point is transient to plus infinity when the end velocity is
positive and to minus infinity when it is negative; the boundary is the
zero-velocity set.  Three routes are combined, ordered by strength:

1. rate dominance: ``lambda_minus >= mu + lambda_plus`` certifies drift to
   plus infinity outright;
2. a positive exact order-m velocity certifies drift to plus infinity (the
   order-m velocities increase to the true one, so positivity transfers; a
   negative one is only evidence, since the truncation may be too small);
3. a Monte Carlo velocity confidence interval excluding zero decides either
   sign, with NEAR_BOUNDARY as the honest fallback.

The order-0 chain solves in closed form and its boundary
``mu = lambda_minus * (1 + lambda_plus)`` is an exact lower envelope of the
true one, which makes it the natural bracketing seed for bisection in mu.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product

from .chain import exact_velocity
from .errors import BracketFailure, MtphaseError
from .model import Rates
from .rng import RngSeed
from .simulate import estimate_velocity


class Verdict(str, enum.Enum):
    TRANSIENT_PLUS = "TRANSIENT_PLUS"
    TRANSIENT_MINUS = "TRANSIENT_MINUS"
    NEAR_BOUNDARY = "NEAR_BOUNDARY"


class BoundaryMethod(str, enum.Enum):
    M0_CLOSED_FORM = "M0_CLOSED_FORM"
    EXACT_M = "EXACT_M"
    MONTE_CARLO = "MONTE_CARLO"


@dataclass(frozen=True)
class Evidence:
    criterion: str
    value: float
    tol: float


@dataclass(frozen=True)
class Classification:
    verdict: Verdict
    evidence: tuple[Evidence, ...]


@dataclass(frozen=True)
class ClassifyConfig:
    """Knobs for :func:`classify`; ``mc_cycles=0`` disables the Monte Carlo stage."""

    m: int = 12
    tol: float = 1e-9
    mc_cycles: int = 10**6
    seed: int = 0
    ci_z: float = 3.0


@dataclass(frozen=True)
class BoundaryPoint:
    lambda_plus: float
    lambda_minus: float
    mu_star: float
    method: BoundaryMethod
    tol: float
    velocity_residual: float


@dataclass(frozen=True)
class SweepRow:
    lambda_plus: float
    lambda_minus: float
    point: BoundaryPoint | None = None
    error: str | None = None

    @property
    def status(self) -> str:
        return "ok" if self.point is not None else f"error: {self.error}"


def closed_form_boundary_m0(lambda_plus: float, lambda_minus: float) -> float:
    """Detachment rate at which the order-0 velocity vanishes."""
    if lambda_plus <= 0 or lambda_minus <= 0:
        raise ValueError("attachment rates must be positive")
    return lambda_minus * (1.0 + lambda_plus)


def classify(rates: Rates, config: ClassifyConfig = ClassifyConfig()) -> Classification:
    """Classify a parameter point, recording the evidence used at each stage."""
    evidence: list[Evidence] = []

    slack = rates.lambda_minus - rates.mu - rates.lambda_plus
    evidence.append(Evidence("rate_dominance_slack", slack, 0.0))
    if slack >= 0.0:
        return Classification(Verdict.TRANSIENT_PLUS, tuple(evidence))

    v_m = exact_velocity(config.m, rates)
    evidence.append(Evidence(f"exact_velocity_m{config.m}", v_m, config.tol))
    if v_m > config.tol:
        return Classification(Verdict.TRANSIENT_PLUS, tuple(evidence))

    if config.mc_cycles >= 2:
        est = estimate_velocity(
            rates, config.mc_cycles, RngSeed(config.seed).generator()
        )
        half_width = config.ci_z * est.std_err
        evidence.append(Evidence("mc_velocity", est.v_hat, half_width))
        if est.v_hat - half_width > 0.0:
            return Classification(Verdict.TRANSIENT_PLUS, tuple(evidence))
        if est.v_hat + half_width < 0.0:
            return Classification(Verdict.TRANSIENT_MINUS, tuple(evidence))

    return Classification(Verdict.NEAR_BOUNDARY, tuple(evidence))


def find_boundary(
    lambda_plus: float,
    lambda_minus: float,
    method: BoundaryMethod = BoundaryMethod.EXACT_M,
    tol: float = 1e-9,
    m: int = 12,
    mc_cycles: int = 10**6,
    seed: int = 0,
    max_factor_log2: int = 10,
) -> BoundaryPoint:
    """Zero of the velocity in ``mu`` at fixed attachment rates.

    Brackets by doubling upward from the order-0 boundary (an exact lower
    bound) and bisects; the sign change is verified rather than assumed.
    Monte Carlo evaluations use one fresh deterministic stream each, so the
    result is reproducible for a fixed ``seed``.
    """
    mu0 = closed_form_boundary_m0(lambda_plus, lambda_minus)
    if method is BoundaryMethod.M0_CLOSED_FORM:
        return BoundaryPoint(
            lambda_plus=lambda_plus,
            lambda_minus=lambda_minus,
            mu_star=mu0,
            method=method,
            tol=tol,
            velocity_residual=0.0,
        )

    n_evals = 0

    def velocity(mu: float) -> float:
        nonlocal n_evals
        rates = Rates(lambda_plus, lambda_minus, mu)
        if method is BoundaryMethod.EXACT_M:
            return exact_velocity(m, rates)
        rng = RngSeed(seed, stream_index=n_evals).generator()
        n_evals += 1
        return estimate_velocity(rates, mc_cycles, rng).v_hat

    def done(mu: float, v: float) -> BoundaryPoint:
        return BoundaryPoint(
            lambda_plus=lambda_plus,
            lambda_minus=lambda_minus,
            mu_star=mu,
            method=method,
            tol=tol,
            velocity_residual=abs(v),
        )

    lo = mu0
    v_lo = velocity(lo)
    if abs(v_lo) <= tol:
        return done(lo, v_lo)
    if v_lo < 0.0:
        raise BracketFailure(
            f"velocity already negative at the order-0 boundary mu={lo:g}"
        )
    cap = float(1 << max_factor_log2) * mu0
    hi = 2.0 * mu0
    v_hi = velocity(hi)
    while v_hi >= 0.0:
        if abs(v_hi) <= tol:
            return done(hi, v_hi)
        if hi >= cap:
            raise BracketFailure(f"no sign change for mu up to {cap:g}")
        lo = hi
        hi = min(2.0 * hi, cap)
        v_hi = velocity(hi)

    mid, v_mid = hi, v_hi
    while hi - lo > tol * max(0.5 * (lo + hi), 1e-300):
        mid = 0.5 * (lo + hi)
        v_mid = velocity(mid)
        if abs(v_mid) <= tol:
            return done(mid, v_mid)
        if v_mid > 0.0:
            lo = mid
        else:
            hi = mid
    return done(mid, v_mid)


@dataclass(frozen=True)
class _SweepTask:
    lambda_plus: float
    lambda_minus: float
    method: BoundaryMethod
    tol: float
    kwargs: dict = field(default_factory=dict)


def _sweep_one(task: _SweepTask) -> SweepRow:
    try:
        point = find_boundary(
            task.lambda_plus, task.lambda_minus, task.method, task.tol, **task.kwargs
        )
        return SweepRow(task.lambda_plus, task.lambda_minus, point=point)
    except (MtphaseError, ValueError) as exc:
        return SweepRow(task.lambda_plus, task.lambda_minus, error=str(exc))


def sweep(
    lambda_plus_values,
    lambda_minus_values,
    method: BoundaryMethod = BoundaryMethod.M0_CLOSED_FORM,
    tol: float = 1e-9,
    jobs: int = 1,
    **kwargs,
) -> list[SweepRow]:
    """One boundary point per grid node; failing rows carry their error and
    do not stop the sweep.  Rows are independent and run in parallel when
    ``jobs > 1``."""
    lps = [float(v) for v in lambda_plus_values]
    lms = [float(v) for v in lambda_minus_values]
    if not lps or not lms:
        raise ValueError("grids must be nonempty")
    tasks = [
        _SweepTask(lp, lm, method, tol, dict(kwargs)) for lp, lm in product(lps, lms)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_one, tasks))
    return [_sweep_one(t) for t in tasks]


def verify_boundary_residual(point: BoundaryPoint) -> bool:
    return point.velocity_residual <= point.tol or math.isclose(
        point.velocity_residual, point.tol
    )
