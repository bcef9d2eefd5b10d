"""Two-symbol monomer words and the exact transition structure of the growth chain.

The chain tracks the lattice position of the polymer's active end together
with its *head*: the shortest suffix of the polymer that contains every PLUS
monomer (everything further left stays MINUS forever, since conversion is
irreversible).  A head is encoded as a nonnegative integer whose bit ``j`` is
set iff the monomer at distance ``j`` from the active end is PLUS.  The
encoding makes the head invariant automatic -- an integer carries no leading
zero bits -- and turns every transition into O(1) bit arithmetic.

Three moves drive the dynamics:

* attachment of a PLUS monomer at the active end, at rate ``lambda_plus``
  when the end monomer is PLUS and ``lambda_minus`` otherwise;
* detachment of the end monomer, at rate ``mu``, enabled only when the end
  monomer is MINUS (an empty head detaches "virtually": the position moves
  left, the head stays empty);
* conversion PLUS -> MINUS of each PLUS monomer independently at unit rate
  (the unit fixes the time scale; it is deliberately not a parameter).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple


class Monomer(enum.Enum):
    """One polymer unit. PLUS converts to MINUS at unit rate, never back."""

    MINUS = 0
    PLUS = 1

    def __str__(self) -> str:
        return "+" if self is Monomer.PLUS else "-"


@dataclass(frozen=True)
class Head:
    """Suffix of the polymer from the active end up to its leftmost PLUS.

    ``bits`` holds the encoding; bit 0 is the active end.  ``Head(0)`` is the
    empty head.  Any nonnegative integer is a valid head: its leading binary
    digit is 1, which is exactly the leftmost-PLUS invariant.
    """

    bits: int = 0

    def __post_init__(self) -> None:
        if self.bits < 0:
            raise ValueError("head bits must be nonnegative")

    @property
    def length(self) -> int:
        return self.bits.bit_length()

    @property
    def plus_end(self) -> bool:
        """True when the active-end monomer is PLUS."""
        return bool(self.bits & 1)

    @property
    def symbols(self) -> tuple[Monomer, ...]:
        """Monomers in display order: leftmost (highest index) first."""
        return tuple(
            Monomer.PLUS if self.bits >> j & 1 else Monomer.MINUS
            for j in range(self.length - 1, -1, -1)
        )

    @classmethod
    def from_string(cls, text: str) -> "Head":
        """Parse a display-order string of ``+``/``-`` characters."""
        return normalize(
            Monomer.PLUS if ch == "+" else Monomer.MINUS for ch in text
        )

    def __str__(self) -> str:
        return "".join(str(s) for s in self.symbols)


EMPTY_HEAD = Head(0)


@dataclass(frozen=True)
class MtState:
    """Position of the active end plus the head word."""

    x: int
    head: Head


@dataclass(frozen=True)
class Rates:
    """The three positive transition rates; conversion is fixed at 1."""

    lambda_plus: float
    lambda_minus: float
    mu: float

    def __post_init__(self) -> None:
        for name in ("lambda_plus", "lambda_minus", "mu"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be strictly positive and finite")

    def attach_rate(self, head: Head) -> float:
        return self.lambda_plus if head.plus_end else self.lambda_minus


class EventKind(enum.Enum):
    ATTACH = "attach"
    DETACH = "detach"
    HYDROLYZE = "hydrolyze"


@dataclass(frozen=True)
class Event:
    """A single transition; HYDROLYZE carries the index of the converting PLUS."""

    kind: EventKind
    index: int | None = None

    def __post_init__(self) -> None:
        if self.kind is EventKind.HYDROLYZE:
            if self.index is None or self.index < 0:
                raise ValueError("hydrolysis event needs a nonnegative index")
        elif self.index is not None:
            raise ValueError(f"{self.kind.value} event carries no index")


ATTACH = Event(EventKind.ATTACH)
DETACH = Event(EventKind.DETACH)


def hydrolyze(index: int) -> Event:
    return Event(EventKind.HYDROLYZE, index)


class Transition(NamedTuple):
    event: Event
    rate: float
    target: MtState


def normalize(word: Iterable[Monomer]) -> Head:
    """Project a raw word (display order) onto its head.

    Leading MINUS monomers vanish because they contribute zero high bits, so
    the result is the shortest suffix whose leftmost symbol is PLUS, or the
    empty head when the word has no PLUS at all.
    """
    bits = 0
    for sym in word:
        bits = (bits << 1) | (1 if sym is Monomer.PLUS else 0)
    return Head(bits)


def head_norm(head: Head) -> int:
    """Number of PLUS monomers in the head."""
    return head.bits.bit_count()


def project(head: Head, m: int) -> int:
    """The ``m + 1`` rightmost monomers of ``head`` as an (m+1)-bit word.

    Bit ``j`` of the result is the monomer at distance ``j`` from the active
    end; missing positions read as MINUS, i.e. the word is left-padded.
    """
    if m < 0:
        raise ValueError("projection order m must be nonnegative")
    return head.bits & ((1 << (m + 1)) - 1)


def enabled_transitions(state: MtState, rates: Rates) -> list[Transition]:
    """All enabled events with their individual rates and target states.

    Exactly one ATTACH entry is always present; a DETACH entry appears iff
    the end monomer is MINUS (including the empty head); one HYDROLYZE entry
    appears per PLUS monomer.  The total exit rate is the sum of the listed
    rates.
    """
    head = state.head
    out = [
        Transition(
            ATTACH,
            rates.attach_rate(head),
            MtState(state.x + 1, Head((head.bits << 1) | 1)),
        )
    ]
    if not head.plus_end:
        out.append(
            Transition(DETACH, rates.mu, MtState(state.x - 1, Head(head.bits >> 1)))
        )
    bits = head.bits
    j = 0
    while bits:
        if bits & 1:
            out.append(
                Transition(
                    hydrolyze(j),
                    1.0,
                    MtState(state.x, Head(head.bits & ~(1 << j))),
                )
            )
        bits >>= 1
        j += 1
    return out
