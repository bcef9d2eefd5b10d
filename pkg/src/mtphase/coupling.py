"""Runtime-checked monotone couplings.

Two joint constructions, each preserving an order relation that the checks
here enforce event by event:

* **population domination** -- the growth chain runs jointly with a
  birth-and-death population (birth rate ``max(lambda_plus, lambda_minus)``,
  unit death rate per individual) so that the number of PLUS monomers never
  exceeds the population.  Attachments ride along with births, conversions
  with deaths; the leftover birth/death rates fire alone.

* **window pairing** -- the order-m and order-(m+1) strip chains run jointly
  so that every PLUS of the narrow word is a PLUS of the wide word at the
  same distance from the end.  Shared PLUS monomers convert together,
  surplus ones alone; attachments coincide up to the ``|lambda_plus -
  lambda_minus|`` excess, which lands on whichever component has the larger
  attachment rate.

Along coupled trajectories the two words can disagree only in a constrained
pattern: when ``lambda_minus >= lambda_plus`` the disagreement is a single
position (the leftmost PLUS of the wide word, with agreement below and all
MINUS above); otherwise it may smear over an interval, but the narrow word
is all MINUS from the first disagreement up.  ``check_discrepancy_structure``
classifies a pair against the pattern admissible in its regime, and the
check suites count any ``MALFORMED`` verdict as a violation.

Both couplings leave each component's own law untouched; the suites verify
this with chi-square tests of jump-chain frequencies, grouped by the exact
conditional category distribution (which depends only on the end-monomer
class and the PLUS count, respectively the population size).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .errors import InvariantViolation
from .model import Head, MtState, Rates
from .rng import Draws, RngSeed, as_draws

# joint event categories, in fixed draw order
_BD_ATTACH_BIRTH = 0
_BD_BIRTH_ONLY = 1
_BD_DETACH = 2
_BD_HYD_DEATH = 3
_BD_DEATH_ONLY = 4

_PAIR_ATTACH_BOTH = 0
_PAIR_ATTACH_LOWER = 1
_PAIR_ATTACH_UPPER = 2
_PAIR_DETACH = 3
_PAIR_HYD_BOTH = 4
_PAIR_HYD_UPPER = 5


class Regime(enum.Enum):
    MINUS_DOMINANT = "MINUS_DOMINANT"  # lambda_minus >= lambda_plus
    PLUS_DOMINANT = "PLUS_DOMINANT"  # lambda_plus >= lambda_minus


def regime_for(rates: Rates) -> Regime:
    """Equal rates fall under MINUS_DOMINANT: both patterns hold, the single-
    position one is the stricter and is asserted."""
    if rates.lambda_minus >= rates.lambda_plus:
        return Regime.MINUS_DOMINANT
    return Regime.PLUS_DOMINANT


class VerdictKind(str, enum.Enum):
    EQUAL = "EQUAL"
    SINGLE = "SINGLE"
    INTERVAL = "INTERVAL"
    MALFORMED = "MALFORMED"


@dataclass(frozen=True)
class DiscrepancyVerdict:
    kind: VerdictKind
    j0: int | None = None
    j1: int | None = None


@dataclass(frozen=True)
class BdCoupledState:
    """Growth chain plus the dominating population count."""

    mt: MtState
    y: int

    def __post_init__(self) -> None:
        if self.y < 0:
            raise ValueError("population must be nonnegative")


@dataclass(frozen=True)
class PairCoupledState:
    """Order-m and order-(m+1) strip states evolving jointly."""

    m: int
    lower_x: int
    lower_word: int
    upper_x: int
    upper_word: int

    def __post_init__(self) -> None:
        if self.m < 0:
            raise ValueError("order m must be nonnegative")
        if not 0 <= self.lower_word < (1 << (self.m + 1)):
            raise ValueError("lower word out of range")
        if not 0 <= self.upper_word < (1 << (self.m + 2)):
            raise ValueError("upper word out of range")

    @property
    def ordered(self) -> bool:
        return (self.lower_word | self.upper_word) == self.upper_word


def _clear_kth_set_bit(word: int, k: int) -> int:
    b = word
    for _ in range(k):
        b &= b - 1
    return word & ~(b & -b)


def _classify_words(a: int, b: int, minus_dominant: bool) -> tuple[VerdictKind, int, int]:
    """Classify the aligned pair (narrow word left-padded with MINUS)."""
    if a == b:
        return VerdictKind.EQUAL, -1, -1
    if a & ~b:
        return VerdictKind.MALFORMED, -1, -1  # order violated
    d = b & ~a
    j0 = (d & -d).bit_length() - 1
    j1 = d.bit_length() - 1
    if a >> (j0 + 1):
        # the narrow word holds a PLUS above the first disagreement
        return VerdictKind.MALFORMED, j0, j1
    if j0 == j1:
        return VerdictKind.SINGLE, j0, j1
    if minus_dominant:
        return VerdictKind.MALFORMED, j0, j1
    return VerdictKind.INTERVAL, j0, j1


def check_discrepancy_structure(
    state: PairCoupledState, regime: Regime
) -> DiscrepancyVerdict:
    """Structured verdict on the word pair under the given regime's pattern."""
    kind, j0, j1 = _classify_words(
        state.lower_word, state.upper_word, regime is Regime.MINUS_DOMINANT
    )
    if kind is VerdictKind.EQUAL:
        return DiscrepancyVerdict(VerdictKind.EQUAL)
    if kind is VerdictKind.MALFORMED:
        return DiscrepancyVerdict(VerdictKind.MALFORMED)
    return DiscrepancyVerdict(kind, j0=j0, j1=j1)


def _bd_step_ints(
    lp: float,
    lm: float,
    mu: float,
    lam: float,
    x: int,
    head: int,
    y: int,
    draws: Draws,
) -> tuple[int, int, int, float, int]:
    plus = head & 1
    r_attach = lp if plus else lm
    r_birth = lam - r_attach
    r_detach = 0.0 if plus else mu
    h = head.bit_count()
    n_extra = y - h
    total = r_attach + r_birth + r_detach + h + n_extra
    dt = draws.exp() / total
    u = draws.u01() * total
    if u < r_attach:
        return x + 1, (head << 1) | 1, y + 1, dt, _BD_ATTACH_BIRTH
    u -= r_attach
    if u < r_birth:
        return x, head, y + 1, dt, _BD_BIRTH_ONLY
    u -= r_birth
    if u < r_detach:
        return x - 1, head >> 1, y, dt, _BD_DETACH
    u -= r_detach
    if u < h:
        k = int(u)
        if k >= h:
            k = h - 1
        return x, _clear_kth_set_bit(head, k), y - 1, dt, _BD_HYD_DEATH
    return x, head, y - 1, dt, _BD_DEATH_ONLY


def bd_coupled_step(
    state: BdCoupledState, rates: Rates, rng
) -> tuple[BdCoupledState, float]:
    """One joint transition; raises InvariantViolation if domination breaks."""
    head = state.mt.head.bits
    if head.bit_count() > state.y:
        raise InvariantViolation("PLUS count exceeds population on entry")
    draws = as_draws(rng)
    lam = max(rates.lambda_plus, rates.lambda_minus)
    x, new_head, y, dt, _cat = _bd_step_ints(
        rates.lambda_plus,
        rates.lambda_minus,
        rates.mu,
        lam,
        state.mt.x,
        head,
        state.y,
        draws,
    )
    if new_head.bit_count() > y:
        raise InvariantViolation("PLUS count exceeds population after the step")
    return BdCoupledState(mt=MtState(x, Head(new_head)), y=y), dt


def _pair_step_ints(
    lp: float,
    lm: float,
    mu: float,
    mask_lo: int,
    mask_up: int,
    ax: int,
    a: int,
    bx: int,
    b: int,
    draws: Draws,
) -> tuple[int, int, int, int, float, int]:
    r_lo = lp if a & 1 else lm
    r_up = lp if b & 1 else lm
    r_both = r_lo if r_lo <= r_up else r_up
    r_alo = r_lo - r_both
    r_aup = r_up - r_both
    r_det = 0.0 if a & 1 else mu
    n0 = a.bit_count()
    n1 = b.bit_count() - n0
    total = r_both + r_alo + r_aup + r_det + n0 + n1
    dt = draws.exp() / total
    u = draws.u01() * total
    if u < r_both:
        return (
            ax + 1,
            ((a << 1) | 1) & mask_lo,
            bx + 1,
            ((b << 1) | 1) & mask_up,
            dt,
            _PAIR_ATTACH_BOTH,
        )
    u -= r_both
    if u < r_alo:
        return ax + 1, ((a << 1) | 1) & mask_lo, bx, b, dt, _PAIR_ATTACH_LOWER
    u -= r_alo
    if u < r_aup:
        return ax, a, bx + 1, ((b << 1) | 1) & mask_up, dt, _PAIR_ATTACH_UPPER
    u -= r_aup
    if u < r_det:
        # every MINUS-ended component sheds its end monomer; the all-MINUS
        # word keeps its (empty) window while the position still moves
        if b & 1:
            return ax - 1, a >> 1, bx, b, dt, _PAIR_DETACH
        return ax - 1, a >> 1, bx - 1, b >> 1, dt, _PAIR_DETACH
    u -= r_det
    if u < n0:
        k = int(u)
        if k >= n0:
            k = n0 - 1
        bit = _kth_set_bit(a, k)
        return ax, a & ~bit, bx, b & ~bit, dt, _PAIR_HYD_BOTH
    u -= n0
    k = int(u)
    if k >= n1:
        k = n1 - 1
    bit = _kth_set_bit(b & ~a, k)
    return ax, a, bx, b & ~bit, dt, _PAIR_HYD_UPPER


def _kth_set_bit(word: int, k: int) -> int:
    b = word
    for _ in range(k):
        b &= b - 1
    return b & -b


def pair_coupled_step(
    state: PairCoupledState, rates: Rates, rng
) -> tuple[PairCoupledState, float]:
    """One joint transition; raises InvariantViolation if the order breaks.

    Meaningful on states reachable from the all-MINUS pair (the coupling's
    own orbit); arbitrary ordered pairs outside that orbit may legitimately
    lose the order, which the runtime check reports.
    """
    if not state.ordered:
        raise InvariantViolation("word order violated on entry")
    draws = as_draws(rng)
    mask_lo = (1 << (state.m + 1)) - 1
    mask_up = (1 << (state.m + 2)) - 1
    ax, a, bx, b, dt, _cat = _pair_step_ints(
        rates.lambda_plus,
        rates.lambda_minus,
        rates.mu,
        mask_lo,
        mask_up,
        state.lower_x,
        state.lower_word,
        state.upper_x,
        state.upper_word,
        draws,
    )
    nxt = PairCoupledState(
        m=state.m, lower_x=ax, lower_word=a, upper_x=bx, upper_word=b
    )
    if not nxt.ordered:
        raise InvariantViolation("word order violated after the step")
    return nxt, dt


# --- check suites -----------------------------------------------------------

#: Parameter points spanning both regimes plus the equal-rate edge.
DEFAULT_CHECK_POINTS = (
    Rates(1.0, 2.0, 1.0),
    Rates(2.0, 1.0, 1.0),
    Rates(0.7, 0.7, 1.5),
    Rates(0.4, 1.9, 0.6),
)


@dataclass(frozen=True)
class CouplingReport:
    coupling: str
    rates: Rates
    m: int | None
    events_per_seed: int
    seeds: int
    violations: int
    verdict_histogram: dict[str, int]
    marginal_p_values: dict[str, float]
    minus_plus_time_fraction: float | None = None

    def ok(self, alpha: float = 1e-3) -> bool:
        if self.violations:
            return False
        return all(p >= alpha for p in self.marginal_p_values.values())


def _chi_square(groups: dict[int, list[int]], prob_for_key) -> float:
    """Aggregate chi-square p-value over signature groups.

    Within a group the event category is exactly categorical with the
    group's probability vector, so cells add independently; groups whose
    smallest expected count falls below 5 are skipped.
    """
    stat = 0.0
    dof = 0
    for key, counts in groups.items():
        probs = np.asarray(prob_for_key(key), dtype=np.float64)
        counts_arr = np.asarray(counts, dtype=np.float64)
        keep = probs > 0.0
        probs = probs[keep]
        counts_arr = counts_arr[keep]
        if probs.size < 2:
            continue
        probs = probs / probs.sum()
        n = counts_arr.sum()
        expected = n * probs
        if n == 0 or expected.min() < 5.0:
            continue
        stat += float(((counts_arr - expected) ** 2 / expected).sum())
        dof += probs.size - 1
    if dof == 0:
        return 1.0
    return float(chi2.sf(stat, dof))


def _run_bd(
    rates: Rates,
    n_events: int,
    draws: Draws,
    mt_groups: dict[int, list[int]],
    y_groups: dict[int, list[int]],
) -> int:
    lp, lm, mu = rates.lambda_plus, rates.lambda_minus, rates.mu
    lam = max(lp, lm)
    x = 0
    head = 0
    y = 0
    violations = 0
    for _ in range(n_events):
        plus = head & 1
        h = head.bit_count()
        y_pre = y
        x, head, y, _dt, cat = _bd_step_ints(lp, lm, mu, lam, x, head, y, draws)
        if cat != _BD_BIRTH_ONLY and cat != _BD_DEATH_ONLY:
            key = (h << 1) | plus
            bucket = mt_groups.get(key)
            if bucket is None:
                bucket = mt_groups.setdefault(key, [0, 0, 0])
            if cat == _BD_ATTACH_BIRTH:
                bucket[0] += 1
            elif cat == _BD_DETACH:
                bucket[1] += 1
            else:
                bucket[2] += 1
        if cat != _BD_DETACH:
            bucket = y_groups.get(y_pre)
            if bucket is None:
                bucket = y_groups.setdefault(y_pre, [0, 0])
            if cat == _BD_ATTACH_BIRTH or cat == _BD_BIRTH_ONLY:
                bucket[0] += 1
            else:
                bucket[1] += 1
        if head.bit_count() > y:
            violations += 1
    return violations


def check_bd_coupling(
    rates: Rates,
    events: int = 100_000,
    seeds: int = 8,
    seed: int = 0,
) -> CouplingReport:
    """Population-domination suite: invariant plus both marginal laws."""
    mt_groups: dict[int, list[int]] = {}
    y_groups: dict[int, list[int]] = {}
    violations = 0
    for i in range(seeds):
        draws = Draws(RngSeed(seed, stream_index=i).generator())
        violations += _run_bd(rates, events, draws, mt_groups, y_groups)

    lp, lm, mu = rates.lambda_plus, rates.lambda_minus, rates.mu
    lam = max(lp, lm)

    def mt_probs(key: int):
        plus = key & 1
        h = key >> 1
        return (lp if plus else lm, 0.0 if plus else mu, float(h))

    def y_probs(y: int):
        return (lam, float(y))

    p_values = {
        "polymer_marginal": _chi_square(mt_groups, mt_probs),
        "population_marginal": _chi_square(y_groups, y_probs),
    }
    return CouplingReport(
        coupling="bd",
        rates=rates,
        m=None,
        events_per_seed=events,
        seeds=seeds,
        violations=violations,
        verdict_histogram={},
        marginal_p_values=p_values,
    )


def _run_pair(
    rates: Rates,
    m: int,
    n_events: int,
    draws: Draws,
    lower_groups: dict[int, list[int]],
    upper_groups: dict[int, list[int]],
    histogram: dict[str, int],
) -> tuple[int, float, float]:
    lp, lm, mu = rates.lambda_plus, rates.lambda_minus, rates.mu
    minus_dominant = lm >= lp
    mask_lo = (1 << (m + 1)) - 1
    mask_up = (1 << (m + 2)) - 1
    ax = bx = 0
    a = b = 0
    violations = 0
    mixed_time = 0.0
    total_time = 0.0
    for _ in range(n_events):
        a_plus = a & 1
        b_plus = b & 1
        n0 = a.bit_count()
        nb = b.bit_count()
        ax, a, bx, b, dt, cat = _pair_step_ints(
            lp, lm, mu, mask_lo, mask_up, ax, a, bx, b, draws
        )
        total_time += dt
        if not a_plus and b_plus:
            mixed_time += dt
        if cat in (_PAIR_ATTACH_BOTH, _PAIR_ATTACH_LOWER, _PAIR_DETACH, _PAIR_HYD_BOTH):
            key = (n0 << 1) | a_plus
            bucket = lower_groups.get(key)
            if bucket is None:
                bucket = lower_groups.setdefault(key, [0, 0, 0])
            if cat in (_PAIR_ATTACH_BOTH, _PAIR_ATTACH_LOWER):
                bucket[0] += 1
            elif cat == _PAIR_DETACH:
                bucket[1] += 1
            else:
                bucket[2] += 1
        if cat != _PAIR_ATTACH_LOWER and (
            cat != _PAIR_DETACH or not b_plus
        ):
            key = (nb << 1) | b_plus
            bucket = upper_groups.get(key)
            if bucket is None:
                bucket = upper_groups.setdefault(key, [0, 0, 0])
            if cat in (_PAIR_ATTACH_BOTH, _PAIR_ATTACH_UPPER):
                bucket[0] += 1
            elif cat == _PAIR_DETACH:
                bucket[1] += 1
            else:
                bucket[2] += 1
        if (a | b) != b:
            violations += 1
        kind, _, _ = _classify_words(a, b, minus_dominant)
        histogram[kind.value] = histogram.get(kind.value, 0) + 1
        if kind is VerdictKind.MALFORMED:
            violations += 1
    return violations, mixed_time, total_time


def check_pair_coupling(
    rates: Rates,
    m: int = 3,
    events: int = 100_000,
    seeds: int = 8,
    seed: int = 0,
) -> CouplingReport:
    """Window-pairing suite: order, discrepancy pattern, and both marginals."""
    lower_groups: dict[int, list[int]] = {}
    upper_groups: dict[int, list[int]] = {}
    histogram: dict[str, int] = {}
    violations = 0
    mixed = 0.0
    total = 0.0
    for i in range(seeds):
        draws = Draws(RngSeed(seed, stream_index=i).generator())
        v, mt, tt = _run_pair(
            rates, m, events, draws, lower_groups, upper_groups, histogram
        )
        violations += v
        mixed += mt
        total += tt

    lp, lm, mu = rates.lambda_plus, rates.lambda_minus, rates.mu

    def word_probs(key: int):
        plus = key & 1
        n = key >> 1
        return (lp if plus else lm, 0.0 if plus else mu, float(n))

    p_values = {
        "narrow_marginal": _chi_square(lower_groups, word_probs),
        "wide_marginal": _chi_square(upper_groups, word_probs),
    }
    return CouplingReport(
        coupling="pair",
        rates=rates,
        m=m,
        events_per_seed=events,
        seeds=seeds,
        violations=violations,
        verdict_histogram=dict(sorted(histogram.items())),
        marginal_p_values=p_values,
        minus_plus_time_fraction=mixed / total if total > 0 else 0.0,
    )
