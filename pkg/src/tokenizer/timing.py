"""
Tick arithmetic and the musical-equivalence relation between Songs.
"""

import logging
from collections import defaultdict
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Tuple

import attr

from ..song_model import (
    DEFAULT_TEMPO,
    TICKS_PER_QUARTER,
    BeatEffectKind,
    ContractError,
    NoteEffect,
    Song,
    pitch_of,
)
from .tokens import Bfx, End, Tempo, Token, Wait

logger = logging.getLogger(__name__)

MAX_REPORTED_DIFFERENCES = 20


def ticks_to_seconds(ticks: int, tempo_bpm) -> Fraction:
    """Seconds spanned by `ticks` at a constant tempo, as an exact fraction."""
    if tempo_bpm <= 0:
        raise ContractError(f"tempo must be positive, got {tempo_bpm}")
    return Fraction(ticks * 60) / (Fraction(tempo_bpm) * TICKS_PER_QUARTER)


def tempo_map(song: Song) -> List[Tuple[int, int]]:
    """(absolute tick, bpm) pairs, starting with the initial tempo at tick 0."""
    changes = [(0, song.initial_tempo)]
    for start, header in zip(song.measure_starts(), song.measure_headers):
        if header.tempo_change is not None:
            changes.append((start, header.tempo_change))
    return changes


def song_seconds(song: Song) -> Fraction:
    total = Fraction(0)
    tempo = song.initial_tempo
    for header in song.measure_headers:
        if header.tempo_change is not None:
            tempo = header.tempo_change
        total += ticks_to_seconds(header.span, tempo)
    return total


def token_seconds(
    tokens: Iterable[Token], initial_tempo: Optional[int] = None
) -> Fraction:
    """
    Play time of a token stream: every Wait at the tempo in force, where the
    first Tempo token sets it and tempo_change beat effects update it.
    """
    total = Fraction(0)
    tempo = initial_tempo
    for token in tokens:
        if isinstance(token, End):
            break
        if isinstance(token, Tempo) and tempo is None:
            tempo = token.bpm
        elif isinstance(token, Bfx) and token.kind is BeatEffectKind.TEMPO_CHANGE:
            tempo = token.params[0]
        elif isinstance(token, Wait):
            total += ticks_to_seconds(token.ticks, tempo or DEFAULT_TEMPO)
    return total


@attr.s(frozen=True, slots=True)
class SoundingNote:
    slot = attr.ib()
    onset = attr.ib(type=int)
    duration = attr.ib(type=int)
    pitch = attr.ib(type=int)
    effects = attr.ib(converter=tuple)

    def sort_key(self):
        return (self.onset, self.pitch, self.duration, self.effects)


def _effect_key(effects) -> Tuple:
    ordered = sorted(effects, key=NoteEffect.sort_key)
    return tuple((effect.kind.value, effect.params) for effect in ordered)


def sounding_notes(song: Song) -> Dict[object, List[SoundingNote]]:
    """
    Notes of every track with the time they actually sound.

    A note stops at the next beat of its track unless that beat holds only
    ghost notes. Let-ring notes sustain to the end of the measure or the next
    note on the same string.
    """
    result: Dict[object, List[SoundingNote]] = defaultdict(list)
    starts = song.measure_starts()
    for track in song.tracks:
        for measure, start, header in zip(
            track.measures, starts, song.measure_headers
        ):
            active: Dict[int, Tuple[int, object]] = {}

            def close(position: int, tick: int) -> None:
                onset, note = active.pop(position)
                result[track.slot].append(
                    SoundingNote(
                        track.slot,
                        onset,
                        tick - onset,
                        pitch_of(track, note),
                        _effect_key(note.effects),
                    )
                )

            for beat in measure.beats:
                tick = start + beat.onset
                if not beat.is_ghost_only:
                    held = [p for p, (_onset, n) in active.items() if not n.lets_ring]
                    for position in held:
                        close(position, tick)
                for note in beat.notes:
                    if note.position in active:
                        close(note.position, tick)
                    active[note.position] = (tick, note)
            for position in list(active):
                close(position, start + header.span)

    for notes in result.values():
        notes.sort(key=SoundingNote.sort_key)
    return dict(result)


def compare_songs(a: Song, b: Song) -> List[str]:
    """
    Differences between two Songs under musical equivalence: tempo map,
    measure tick spans and the sounding notes of every slot. Empty when the
    Songs are equivalent.
    """
    differences: List[str] = []
    if tempo_map(a) != tempo_map(b):
        differences.append(f"tempo map {tempo_map(a)} != {tempo_map(b)}")

    spans_a = [header.span for header in a.measure_headers]
    spans_b = [header.span for header in b.measure_headers]
    if len(spans_a) != len(spans_b):
        differences.append(f"measure count {len(spans_a)} != {len(spans_b)}")
    for index, (left, right) in enumerate(zip(spans_a, spans_b)):
        if left != right:
            differences.append(f"measure {index} span {left} != {right}")

    notes_a, notes_b = sounding_notes(a), sounding_notes(b)
    for slot in sorted(set(notes_a) | set(notes_b), key=lambda s: str(s)):
        left, right = notes_a.get(slot, []), notes_b.get(slot, [])
        if left == right:
            continue
        name = getattr(slot, "value", slot)
        if len(left) != len(right):
            differences.append(f"{name}: {len(left)} notes != {len(right)}")
        for note_a, note_b in zip(left, right):
            if note_a != note_b:
                differences.append(f"{name}: {note_a} != {note_b}")
                break

    if len(differences) > MAX_REPORTED_DIFFERENCES:
        logger.debug(f"{len(differences)} differences, reporting the first few")
        differences = differences[:MAX_REPORTED_DIFFERENCES]
    return differences
