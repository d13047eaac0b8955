"""
Song Factories

Hand-built and seeded random Songs for the tests. Every Song built here is
normalized: tracks in slot order, contiguous beats, standard tunings at one
downtune. Beat durations are single GP note values and tied notes carry the
fret they continue, so the Songs also survive a GP5 write and read
unchanged.
"""

import random
from typing import List, Optional, Sequence, Tuple

from src.song_model import (
    GRACE_TICKS,
    SLIDE_NAMES,
    STROKE_TICKS,
    TREMOLO_PICKING_TICKS,
    TRILL_TICKS,
    Beat,
    BeatEffect,
    BeatEffectKind,
    InstrumentSlot,
    Measure,
    MeasureHeader,
    Note,
    NoteEffect,
    NoteEffectKind,
    Song,
    TimeSignature,
    make_track,
    mark_measure_repeats,
    supported_string_counts,
)

PALM_MUTE = NoteEffect(NoteEffectKind.PALM_MUTE)
LET_RING = NoteEffect(NoteEffectKind.LET_RING)
GHOST = NoteEffect(NoteEffectKind.GHOST_NOTE)
TIE = NoteEffect(NoteEffectKind.TIE)

SLAP_KINDS = (BeatEffectKind.TAP, BeatEffectKind.SLAP, BeatEffectKind.POP)
FLAG_BEAT_KINDS = (
    BeatEffectKind.VIBRATO,
    BeatEffectKind.FADE_IN,
    BeatEffectKind.RASGUEADO,
)
SIGNATURES = ((4, 4), (3, 4), (2, 4), (5, 4), (6, 8), (7, 8), (12, 8), (7, 16))
DURATIONS = (240, 480, 720, 960, 1440, 1920)

FLAG_NOTE_KINDS = (
    NoteEffectKind.PALM_MUTE,
    NoteEffectKind.VIBRATO,
    NoteEffectKind.HAMMER,
    NoteEffectKind.TIE,
    NoteEffectKind.LET_RING,
    NoteEffectKind.GHOST_NOTE,
    NoteEffectKind.ACCENTUATED_NOTE,
    NoteEffectKind.HEAVY_ACCENTUATED_NOTE,
    NoteEffectKind.STACCATO,
)


def headers(
    count: int,
    signature: Tuple[int, int] = (4, 4),
    tempo_changes: Optional[dict] = None,
) -> Tuple[MeasureHeader, ...]:
    tempo_changes = tempo_changes or {}
    return tuple(
        MeasureHeader(i, TimeSignature(*signature), False, tempo_changes.get(i))
        for i in range(count)
    )


def quarters(*events) -> Measure:
    """A 4/4 measure of quarter-note beats; None is a rest."""
    beats = []
    for index, notes in enumerate(events):
        notes = () if notes is None else notes
        beats.append(Beat(index * 960, 960, notes))
    return Measure(tuple(beats))


def build_song(
    tracks, measure_headers, artist="Test Artist", title="Test Song", **kwargs
) -> Song:
    song = Song(
        artist=artist,
        title=title,
        tracks=tuple(tracks),
        measure_headers=tuple(measure_headers),
        **kwargs,
    )
    return mark_measure_repeats(song)


def riff_song(measures: int = 4, tempo: int = 120) -> Song:
    """A palm-muted open-string riff, every measure the same."""
    muted = Note.pitched(6, 0, {PALM_MUTE})
    riff = quarters((muted,), (muted,), (Note.pitched(6, 3),), (Note.pitched(5, 5),))
    track = make_track(InstrumentSlot.DISTORTED0, [riff] * measures)
    return build_song([track], headers(measures), initial_tempo=tempo)


def drum_and_bass_song() -> Song:
    """Bass and drums over two 4/4 measures, the second one at 90 bpm."""
    kick, snare, hat = Note.percussion(36), Note.percussion(38), Note.percussion(42)
    drums = make_track(
        InstrumentSlot.DRUMS,
        [
            quarters((kick, hat), (snare,), (kick, hat), (snare, hat)),
            quarters((kick,), None, (kick, snare), None),
        ],
    )
    bass = make_track(
        InstrumentSlot.BASS,
        [
            quarters((Note.pitched(4, 0),), None, (Note.pitched(4, 3),), None),
            Measure((Beat(0, 3840, (Note.pitched(3, 2, {LET_RING}),)),)),
        ],
        string_count=5,
    )
    return build_song(
        [bass, drums],
        headers(2, tempo_changes={1: 90}),
        artist="Rhythm Section",
        title="Groove",
        album="Live",
        initial_tempo=140,
    )


def _bend_params(rng: random.Random) -> Tuple[int, ...]:
    return (rng.randint(1, 11), 0, 0, 0, 60, rng.choice((50, 100, 200)), 0)


def random_note_effects(rng: random.Random, max_effects: int = 2) -> List[NoteEffect]:
    """Up to max_effects valid note effects, never two of one kind."""
    kinds = rng.sample(list(NoteEffectKind), rng.randint(0, max_effects))
    effects = []
    for kind in kinds:
        if kind in FLAG_NOTE_KINDS:
            effects.append(NoteEffect(kind))
        elif kind is NoteEffectKind.BEND:
            effects.append(NoteEffect(kind, _bend_params(rng)))
        elif kind is NoteEffectKind.SLIDE:
            effects.append(NoteEffect(kind, (rng.choice(list(SLIDE_NAMES)),)))
        elif kind is NoteEffectKind.HARMONIC:
            params = rng.choice(
                [(1,), (2, rng.randint(0, 11), rng.randint(-1, 1), 1), (3, 12), (4,)]
            )
            effects.append(NoteEffect(kind, params))
        elif kind is NoteEffectKind.TRILL:
            effects.append(
                NoteEffect(kind, (rng.randint(0, 24), rng.choice(TRILL_TICKS)))
            )
        elif kind is NoteEffectKind.GRACE:
            params = (
                rng.randint(0, 24),
                rng.randint(0, 3),
                rng.choice(GRACE_TICKS),
                rng.randint(0, 1),
                rng.randint(0, 1),
            )
            effects.append(NoteEffect(kind, params))
        elif kind is NoteEffectKind.TREMOLO_PICKING:
            effects.append(NoteEffect(kind, (rng.choice(TREMOLO_PICKING_TICKS),)))
    return effects


def random_beat_effects(rng: random.Random) -> List[BeatEffect]:
    """At most one stroke, one of tap/slap/pop and one tremolo bar."""
    effects = []
    if rng.random() < 0.1:
        effects.append(
            BeatEffect(
                rng.choice((BeatEffectKind.DOWNSTROKE, BeatEffectKind.UPSTROKE)),
                (rng.choice(STROKE_TICKS),),
            )
        )
    if rng.random() < 0.05:
        effects.append(BeatEffect(rng.choice(SLAP_KINDS)))
    if rng.random() < 0.05:
        effects.append(BeatEffect(BeatEffectKind.TREMOLO_BAR, _bend_params(rng)))
    for kind in FLAG_BEAT_KINDS:
        if rng.random() < 0.03:
            effects.append(BeatEffect(kind))
    return effects


def _random_measure(
    rng: random.Random, span: int, slot: InstrumentSlot, string_count: int
) -> Measure:
    beats = []
    cursor = 0
    while cursor < span:
        duration = rng.choice([d for d in DURATIONS if cursor + d <= span])
        if rng.random() < 0.25 and not (beats and beats[-1].is_rest):
            beats.append(Beat(cursor, duration))
        else:
            if slot is InstrumentSlot.DRUMS:
                notes = [
                    Note.percussion(
                        midi,
                        [e for e in random_note_effects(rng, 1) if e != TIE],
                    )
                    for midi in rng.sample(range(35, 82), rng.randint(1, 3))
                ]
            else:
                strings = rng.sample(
                    range(1, string_count + 1), rng.randint(1, min(3, string_count))
                )
                notes = [
                    Note.pitched(string, rng.randint(0, 24), random_note_effects(rng))
                    for string in strings
                ]
            beats.append(Beat(cursor, duration, notes, random_beat_effects(rng)))
        cursor += duration
    return Measure(tuple(beats))


def _settle_ties(measures: Sequence[Measure]) -> List[Measure]:
    """
    Give tied notes the fret of the note they continue, as GuitarPro reads
    them, and untie beats that would read back as the tail of the beat before.
    """
    last_fret = {}
    settled = []
    for measure in measures:
        beats = []
        for beat in measure.beats:
            previous = beats[-1] if beats else None
            bare = (
                previous is not None
                and not previous.is_rest
                and not beat.effects
                and [n.position for n in beat.notes]
                == [n.position for n in previous.notes]
                and all(note.effects == {TIE} for note in beat.notes)
            )
            notes = []
            for note in beat.notes:
                if note.is_percussion:
                    notes.append(note)
                    continue
                if bare:
                    note = Note.pitched(note.string, note.fret)
                elif note.is_tied:
                    fret = last_fret.get(note.string, 0)
                    note = Note.pitched(note.string, fret, note.effects)
                last_fret[note.string] = note.fret
                notes.append(note)
            beats.append(Beat(beat.onset, beat.duration, notes, beat.effects))
        settled.append(Measure(tuple(beats)))
    return settled


def random_song(seed: int, max_measures: int = 6, slots: Sequence = ()) -> Song:
    """A seeded random normalized Song with one to four tracks."""
    rng = random.Random(seed)
    if not slots:
        slots = rng.sample(list(InstrumentSlot), rng.randint(1, 4))
    slots = sorted(slots, key=lambda slot: slot.order)
    downtune = rng.choice((0, 0, 0, -1, -2, -5))

    layouts = []
    for slot in slots:
        counts = supported_string_counts(slot.family)
        string_count = rng.choice(counts)
        drop = slot is not InstrumentSlot.DRUMS and rng.random() < 0.2
        layouts.append((slot, string_count, drop))

    measure_headers: List[MeasureHeader] = []
    columns: List[List[Measure]] = [[] for _ in slots]
    for index in range(rng.randint(1, max_measures)):
        if index and rng.random() < 0.2:
            previous = measure_headers[-1]
            measure_headers.append(MeasureHeader(index, previous.time_signature))
            for column in columns:
                column.append(column[-1])
            continue
        signature = TimeSignature(*rng.choice(SIGNATURES))
        tempo_change = rng.randint(60, 200) if rng.random() < 0.2 else None
        measure_headers.append(MeasureHeader(index, signature, False, tempo_change))
        for column, (slot, string_count, _drop) in zip(columns, layouts):
            column.append(_random_measure(rng, signature.ticks, slot, string_count))

    tracks = [
        make_track(slot, _settle_ties(column), string_count, downtune, drop)
        for (slot, string_count, drop), column in zip(layouts, columns)
    ]
    pitched = any(slot is not InstrumentSlot.DRUMS for slot in slots)
    return build_song(
        tracks,
        measure_headers,
        artist=f"Artist {seed}",
        title=f"Song {seed}",
        initial_tempo=rng.randint(40, 240),
        downtune=downtune if pitched else 0,
    )
