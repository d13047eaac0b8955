"""
Conversion between tick durations and GuitarPro note values.

A GP duration is a note value (1 whole .. 64 sixty-fourth), a dot flag and
an optional tuplet. Arbitrary tick spans are written as the shortest chain
of representable values.
"""

import functools
from fractions import Fraction
from typing import Dict, List, Tuple

import attr
import guitarpro as gp

from ..song_model import TICKS_PER_WHOLE

NOTE_VALUES = (1, 2, 4, 8, 16, 32, 64)
WRITTEN_TUPLETS = ((1, 1), (3, 2), (5, 4))
SPLIT_LIMIT = 2 * TICKS_PER_WHOLE


def duration_ticks(duration: gp.Duration) -> int:
    """Tick length of a PyGuitarPro duration."""
    value = Fraction(TICKS_PER_WHOLE, duration.value)
    if duration.isDotted:
        value *= Fraction(3, 2)
    tuplet = duration.tuplet
    if tuplet.enters > 1:
        value = value * tuplet.times / tuplet.enters
    return round(value)


@attr.s(frozen=True, slots=True)
class NoteValue:
    value = attr.ib(type=int)
    dotted = attr.ib(default=False)
    enters = attr.ib(default=1)
    times = attr.ib(default=1)

    def to_gp(self) -> gp.Duration:
        return gp.Duration(
            value=self.value,
            isDotted=self.dotted,
            tuplet=gp.Tuplet(enters=self.enters, times=self.times),
        )

    @property
    def ticks(self) -> int:
        return duration_ticks(self.to_gp())


def _build_table() -> Dict[int, NoteValue]:
    table: Dict[int, NoteValue] = {}
    for enters, times in WRITTEN_TUPLETS:
        for dotted in (False, True):
            if dotted and enters > 1:
                continue
            for value in NOTE_VALUES:
                note_value = NoteValue(value, dotted, enters, times)
                table.setdefault(note_value.ticks, note_value)
    return table


REPRESENTABLE: Dict[int, NoteValue] = _build_table()


@functools.lru_cache(maxsize=1)
def _split_table() -> Tuple[Tuple[int, ...], ...]:
    """Fewest-pieces decomposition of every tick count below SPLIT_LIMIT."""
    values = sorted(REPRESENTABLE, reverse=True)
    best: List = [None] * SPLIT_LIMIT
    best[0] = ()
    for total in range(1, SPLIT_LIMIT):
        choice = None
        for value in values:
            if value > total or best[total - value] is None:
                continue
            candidate = (value,) + best[total - value]
            if choice is None or len(candidate) < len(choice):
                choice = candidate
        best[total] = choice
    return tuple(best)


def split_ticks(ticks: int) -> Tuple[List[int], int]:
    """
    Split a tick span into representable pieces, longest first.

    Returns the pieces and the residue that could not be represented.
    """
    if ticks <= 0:
        return [], max(ticks, 0)
    table = _split_table()
    wholes = 0
    rest = ticks
    while rest >= SPLIT_LIMIT:
        wholes += 1
        rest -= TICKS_PER_WHOLE
    reachable = rest
    while table[reachable] is None:
        reachable -= 1
    pieces = [TICKS_PER_WHOLE] * wholes + sorted(table[reachable], reverse=True)
    return pieces, rest - reachable


def is_split_chain(pieces: List[int]) -> bool:
    """True when the pieces are exactly what split_ticks makes of their sum."""
    return len(pieces) > 1 and split_ticks(sum(pieces)) == (list(pieces), 0)


def to_gp_duration(ticks: int) -> gp.Duration:
    return REPRESENTABLE[ticks].to_gp()
