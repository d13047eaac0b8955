"""
Song Model

Canonical in-memory score shared by the GP5 reader/writer and the tokenizer,
plus the normalization passes (instrument-slot assignment, drum and overflow
merging, tuning validation) that make a raw score encodable.
"""

import enum
import logging
from collections import defaultdict
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import attr

logger = logging.getLogger(__name__)

TICKS_PER_QUARTER = 960
TICKS_PER_WHOLE = 4 * TICKS_PER_QUARTER
MAX_MEASURE_TICKS = 32 * TICKS_PER_QUARTER

DEFAULT_TEMPO = 120
DEFAULT_ARTIST = "unknown"
MIN_DOWNTUNE = -12

MAX_FRET = 99
MAX_STRINGS = 7
MIN_PERCUSSION_MIDI = 35
MAX_PERCUSSION_MIDI = 81
DRUM_STRING_COUNT = 6

VALID_DENOMINATORS = (1, 2, 4, 8, 16, 32)
MAX_NUMERATOR = 127


class ScoreError(ValueError):
    """Base class for score model errors."""


class ContractError(ScoreError):
    """An operation was called with input violating its precondition."""


class StructuralError(ScoreError):
    """Tracks that must line up (measure counts, slots) do not."""


class TuningError(ScoreError):
    """A song's tuning cannot be expressed as a single downtune."""

    MIXED = "mixed downtune"
    UNSUPPORTED = "unsupported tuning"

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        self.detail = detail
        super().__init__(f"{reason}: {detail}" if detail else reason)


class InstrumentFamily(enum.Enum):
    DISTORTED = "distorted"
    CLEAN = "clean"
    BASS = "bass"
    DRUMS = "drums"
    LEADS = "leads"
    PADS = "pads"


class InstrumentSlot(enum.Enum):
    """The nine instrument slots of the token format, in canonical order."""

    DISTORTED0 = "distorted0"
    DISTORTED1 = "distorted1"
    DISTORTED2 = "distorted2"
    CLEAN0 = "clean0"
    CLEAN1 = "clean1"
    BASS = "bass"
    DRUMS = "drums"
    LEADS = "leads"
    PADS = "pads"

    @property
    def order(self) -> int:
        return SLOT_ORDER[self]

    @property
    def family(self) -> InstrumentFamily:
        return SLOT_FAMILY[self]


SLOT_ORDER: Dict[InstrumentSlot, int] = {
    slot: index for index, slot in enumerate(InstrumentSlot)
}

FAMILY_SLOTS: Dict[InstrumentFamily, Tuple[InstrumentSlot, ...]] = {
    InstrumentFamily.DISTORTED: (
        InstrumentSlot.DISTORTED0,
        InstrumentSlot.DISTORTED1,
        InstrumentSlot.DISTORTED2,
    ),
    InstrumentFamily.CLEAN: (InstrumentSlot.CLEAN0, InstrumentSlot.CLEAN1),
    InstrumentFamily.BASS: (InstrumentSlot.BASS,),
    InstrumentFamily.DRUMS: (InstrumentSlot.DRUMS,),
    InstrumentFamily.LEADS: (InstrumentSlot.LEADS,),
    InstrumentFamily.PADS: (InstrumentSlot.PADS,),
}

SLOT_FAMILY: Dict[InstrumentSlot, InstrumentFamily] = {
    slot: family for family, slots in FAMILY_SLOTS.items() for slot in slots
}

# General MIDI program written for tracks that only know their slot
DEFAULT_PROGRAMS: Dict[InstrumentFamily, int] = {
    InstrumentFamily.DISTORTED: 30,
    InstrumentFamily.CLEAN: 27,
    InstrumentFamily.BASS: 33,
    InstrumentFamily.DRUMS: 0,
    InstrumentFamily.LEADS: 80,
    InstrumentFamily.PADS: 48,
}

STANDARD_TUNINGS: Dict[Tuple[str, int], Tuple[int, ...]] = {
    ("guitar", 6): (64, 59, 55, 50, 45, 40),
    ("guitar", 7): (64, 59, 55, 50, 45, 40, 35),
    ("bass", 4): (43, 38, 33, 28),
    ("bass", 5): (43, 38, 33, 28, 23),
    ("bass", 6): (48, 43, 38, 33, 28, 23),
}


def program_family(midi_program: int, is_percussion: bool) -> InstrumentFamily:
    """Map a General MIDI program to the instrument family it is encoded as."""
    if is_percussion:
        return InstrumentFamily.DRUMS
    if 29 <= midi_program <= 31:
        return InstrumentFamily.DISTORTED
    if 24 <= midi_program <= 28:
        return InstrumentFamily.CLEAN
    if 32 <= midi_program <= 39:
        return InstrumentFamily.BASS
    if (
        16 <= midi_program <= 23
        or 40 <= midi_program <= 54
        or 88 <= midi_program <= 95
    ):
        return InstrumentFamily.PADS
    return InstrumentFamily.LEADS


def _layout_kind(family: InstrumentFamily) -> str:
    return "bass" if family is InstrumentFamily.BASS else "guitar"


def standard_tuning(
    family: InstrumentFamily, string_count: int
) -> Optional[Tuple[int, ...]]:
    return STANDARD_TUNINGS.get((_layout_kind(family), string_count))


def default_string_count(family: InstrumentFamily) -> int:
    if family is InstrumentFamily.BASS:
        return 4
    return 6


def supported_string_counts(family: InstrumentFamily) -> Tuple[int, ...]:
    if family is InstrumentFamily.DRUMS:
        return (DRUM_STRING_COUNT,)
    if family is InstrumentFamily.BASS:
        return (4, 5, 6)
    return (6, 7)


def make_tuning(
    family: InstrumentFamily, string_count: int, downtune: int = 0, drop: bool = False
) -> Tuple[int, ...]:
    """Standard tuning for a family shifted by downtune, optionally drop-tuned."""
    standard = standard_tuning(family, string_count)
    if standard is None:
        raise ContractError(f"no standard tuning for {family.value} x{string_count}")
    tuning = [pitch + downtune for pitch in standard]
    if drop:
        tuning[-1] -= 2
    return tuple(tuning)


# --- Effects -----------------------------------------------------------------


class NoteEffectKind(enum.Enum):
    PALM_MUTE = "palm_mute"
    BEND = "bend"
    VIBRATO = "vibrato"
    SLIDE = "slide"
    HAMMER = "hammer"
    TIE = "tie"
    LET_RING = "let_ring"
    GHOST_NOTE = "ghost_note"
    ACCENTUATED_NOTE = "accentuated_note"
    HEAVY_ACCENTUATED_NOTE = "heavy_accentuated_note"
    HARMONIC = "harmonic"
    STACCATO = "staccato"
    TRILL = "trill"
    GRACE = "grace"
    TREMOLO_PICKING = "tremolo_picking"


class BeatEffectKind(enum.Enum):
    TEMPO_CHANGE = "tempo_change"
    DOWNSTROKE = "downstroke"
    UPSTROKE = "upstroke"
    FADE_IN = "fade_in"
    VIBRATO = "vibrato"
    TAP = "tap"
    SLAP = "slap"
    POP = "pop"
    TREMOLO_BAR = "tremolo_bar"
    RASGUEADO = "rasgueado"


NOTE_EFFECT_ORDER = {kind: index for index, kind in enumerate(NoteEffectKind)}
BEAT_EFFECT_ORDER = {kind: index for index, kind in enumerate(BeatEffectKind)}

FLAG_NOTE_EFFECTS = frozenset(
    {
        NoteEffectKind.PALM_MUTE,
        NoteEffectKind.VIBRATO,
        NoteEffectKind.HAMMER,
        NoteEffectKind.TIE,
        NoteEffectKind.LET_RING,
        NoteEffectKind.GHOST_NOTE,
        NoteEffectKind.ACCENTUATED_NOTE,
        NoteEffectKind.HEAVY_ACCENTUATED_NOTE,
        NoteEffectKind.STACCATO,
    }
)
FLAG_BEAT_EFFECTS = frozenset(
    {
        BeatEffectKind.FADE_IN,
        BeatEffectKind.VIBRATO,
        BeatEffectKind.TAP,
        BeatEffectKind.SLAP,
        BeatEffectKind.POP,
        BeatEffectKind.RASGUEADO,
    }
)

SLIDE_NAMES = {
    1: "shift",
    2: "legato",
    3: "out_down",
    4: "out_up",
    5: "in_below",
    6: "in_above",
}
HARMONIC_NATURAL = 1
HARMONIC_ARTIFICIAL = 2
HARMONIC_TAPPED = 3
HARMONIC_NAMES = {
    HARMONIC_NATURAL: "natural",
    HARMONIC_ARTIFICIAL: "artificial",
    HARMONIC_TAPPED: "tapped",
    4: "pinch",
    5: "semi",
}

STROKE_TICKS = (30, 60, 120, 240, 480, 960)
TRILL_TICKS = (240, 120, 60)
GRACE_TICKS = (240, 120, 60)
TREMOLO_PICKING_TICKS = (480, 240, 120)

MAX_BEND_TYPE = 11
MAX_BEND_POSITION = 60
MAX_BEND_VALUE = 1200


def bend_params_valid(params: Tuple[int, ...]) -> bool:
    """Bend-shaped params: type followed by (position, value, vibrato) triples."""
    if len(params) < 4 or (len(params) - 1) % 3:
        return False
    if not 0 <= params[0] <= MAX_BEND_TYPE:
        return False
    for i in range(1, len(params), 3):
        position, value, vibrato = params[i : i + 3]
        if not 0 <= position <= MAX_BEND_POSITION:
            return False
        if abs(value) > MAX_BEND_VALUE or vibrato not in (0, 1):
            return False
    return True


def _fret_valid(value: int) -> bool:
    return 0 <= value <= MAX_FRET


def _note_params_valid(kind: NoteEffectKind, params: Tuple[int, ...]) -> bool:
    if kind in FLAG_NOTE_EFFECTS:
        return params == ()
    if kind is NoteEffectKind.BEND:
        return bend_params_valid(params)
    if kind is NoteEffectKind.SLIDE:
        return len(params) == 1 and params[0] in SLIDE_NAMES
    if kind is NoteEffectKind.HARMONIC:
        if not params or params[0] not in HARMONIC_NAMES:
            return False
        if params[0] == HARMONIC_TAPPED:
            return len(params) == 2 and _fret_valid(params[1])
        if params[0] == HARMONIC_ARTIFICIAL:
            return (
                len(params) == 4
                and 0 <= params[1] <= 11
                and -1 <= params[2] <= 1
                and 0 <= params[3] <= 3
            )
        return len(params) == 1
    if kind is NoteEffectKind.TRILL:
        return len(params) == 2 and _fret_valid(params[0]) and params[1] in TRILL_TICKS
    if kind is NoteEffectKind.GRACE:
        return (
            len(params) == 5
            and _fret_valid(params[0])
            and 0 <= params[1] <= 3
            and params[2] in GRACE_TICKS
            and params[3] in (0, 1)
            and params[4] in (0, 1)
        )
    if kind is NoteEffectKind.TREMOLO_PICKING:
        return len(params) == 1 and params[0] in TREMOLO_PICKING_TICKS
    return False


def _beat_params_valid(kind: BeatEffectKind, params: Tuple[int, ...]) -> bool:
    if kind in FLAG_BEAT_EFFECTS:
        return params == ()
    if kind is BeatEffectKind.TEMPO_CHANGE:
        return len(params) == 1 and params[0] > 0
    if kind in (BeatEffectKind.DOWNSTROKE, BeatEffectKind.UPSTROKE):
        return len(params) == 1 and params[0] in STROKE_TICKS
    if kind is BeatEffectKind.TREMOLO_BAR:
        return bend_params_valid(params)
    return False


@attr.s(frozen=True, slots=True)
class NoteEffect:
    kind = attr.ib(type=NoteEffectKind)
    params = attr.ib(default=(), converter=tuple)

    @property
    def is_valid(self) -> bool:
        return _note_params_valid(self.kind, self.params)

    def sort_key(self) -> Tuple[int, Tuple[int, ...]]:
        return (NOTE_EFFECT_ORDER[self.kind], self.params)


@attr.s(frozen=True, slots=True)
class BeatEffect:
    kind = attr.ib(type=BeatEffectKind)
    params = attr.ib(default=(), converter=tuple)

    @property
    def is_valid(self) -> bool:
        return _beat_params_valid(self.kind, self.params)

    def sort_key(self) -> Tuple[int, Tuple[int, ...]]:
        return (BEAT_EFFECT_ORDER[self.kind], self.params)


# --- Score structure ---------------------------------------------------------


@attr.s(frozen=True, slots=True)
class Note:
    """A pitched (string, fret) note or a percussion hit, with its effects."""

    string = attr.ib(default=None)
    fret = attr.ib(default=None)
    percussion_midi = attr.ib(default=None)
    effects = attr.ib(factory=frozenset, converter=frozenset)

    @classmethod
    def pitched(cls, string: int, fret: int, effects: Iterable[NoteEffect] = ()):
        return cls(string=string, fret=fret, effects=frozenset(effects))

    @classmethod
    def percussion(cls, midi: int, effects: Iterable[NoteEffect] = ()):
        return cls(percussion_midi=midi, effects=frozenset(effects))

    @property
    def is_percussion(self) -> bool:
        return self.percussion_midi is not None

    @property
    def position(self) -> int:
        """String index for pitched notes, percussion number for drum hits."""
        return self.percussion_midi if self.is_percussion else self.string

    @property
    def is_ghost(self) -> bool:
        return NoteEffect(NoteEffectKind.GHOST_NOTE) in self.effects

    @property
    def is_tied(self) -> bool:
        return NoteEffect(NoteEffectKind.TIE) in self.effects

    @property
    def lets_ring(self) -> bool:
        return NoteEffect(NoteEffectKind.LET_RING) in self.effects

    def sorted_effects(self) -> List[NoteEffect]:
        return sorted(self.effects, key=NoteEffect.sort_key)

    def with_effect(self, effect: NoteEffect) -> "Note":
        return attr.evolve(self, effects=self.effects | {effect})


def _sorted_notes(notes: Iterable[Note]) -> Tuple[Note, ...]:
    return tuple(sorted(notes, key=lambda note: note.position))


@attr.s(frozen=True, slots=True)
class Beat:
    onset = attr.ib(type=int)
    duration = attr.ib(type=int)
    notes = attr.ib(default=(), converter=_sorted_notes)
    effects = attr.ib(factory=frozenset, converter=frozenset)

    @property
    def is_rest(self) -> bool:
        return not self.notes

    @property
    def end(self) -> int:
        return self.onset + self.duration

    @property
    def is_ghost_only(self) -> bool:
        return bool(self.notes) and all(note.is_ghost for note in self.notes)

    def sorted_effects(self) -> List[BeatEffect]:
        return sorted(self.effects, key=BeatEffect.sort_key)


@attr.s(frozen=True, slots=True)
class Measure:
    beats = attr.ib(default=(), converter=tuple)


@attr.s(frozen=True, slots=True)
class TimeSignature:
    numerator = attr.ib(type=int, default=4)
    denominator = attr.ib(type=int, default=4)

    @property
    def ticks(self) -> int:
        return self.numerator * TICKS_PER_WHOLE // self.denominator

    @property
    def is_valid(self) -> bool:
        return (
            1 <= self.numerator <= MAX_NUMERATOR
            and self.denominator in VALID_DENOMINATORS
        )

    def __str__(self) -> str:
        return f"{self.numerator}/{self.denominator}"


@attr.s(frozen=True, slots=True)
class MeasureHeader:
    index = attr.ib(type=int)
    time_signature = attr.ib(factory=TimeSignature)
    repeat_of_previous = attr.ib(default=False)
    tempo_change = attr.ib(default=None)

    @property
    def span(self) -> int:
        return self.time_signature.ticks


@attr.s(frozen=True, slots=True)
class Track:
    slot = attr.ib()
    string_count = attr.ib(type=int)
    tuning = attr.ib(converter=tuple)
    is_percussion = attr.ib(type=bool)
    measures = attr.ib(default=(), converter=tuple)
    name = attr.ib(default="")
    midi_program = attr.ib(default=0)

    @property
    def family(self) -> InstrumentFamily:
        if self.slot is not None:
            return self.slot.family
        return program_family(self.midi_program, self.is_percussion)


@attr.s(frozen=True, slots=True)
class Song:
    artist = attr.ib(default="")
    title = attr.ib(default="")
    album = attr.ib(default="")
    initial_tempo = attr.ib(default=DEFAULT_TEMPO)
    downtune = attr.ib(default=0)
    tracks = attr.ib(default=(), converter=tuple)
    measure_headers = attr.ib(default=(), converter=tuple)

    @property
    def ticks_per_quarter(self) -> int:
        return TICKS_PER_QUARTER

    def measure_starts(self) -> List[int]:
        """Absolute tick of every measure start."""
        starts, tick = [], 0
        for header in self.measure_headers:
            starts.append(tick)
            tick += header.span
        return starts

    def track_for(self, slot: InstrumentSlot) -> Optional[Track]:
        for track in self.tracks:
            if track.slot is slot:
                return track
        return None


def rest_measure(span: int) -> Measure:
    return Measure((Beat(0, span),))


def pitch_of(track: Track, note: Note) -> int:
    if note.is_percussion:
        return note.percussion_midi
    return track.tuning[note.string - 1] + note.fret


def make_track(
    slot: InstrumentSlot,
    measures: Sequence[Measure] = (),
    string_count: Optional[int] = None,
    downtune: int = 0,
    drop: bool = False,
) -> Track:
    """Build a track with the standard layout of its slot's family."""
    family = slot.family
    if family is InstrumentFamily.DRUMS:
        return Track(
            slot=slot,
            string_count=DRUM_STRING_COUNT,
            tuning=(),
            is_percussion=True,
            measures=measures,
            name=slot.value,
            midi_program=DEFAULT_PROGRAMS[family],
        )
    count = string_count or default_string_count(family)
    return Track(
        slot=slot,
        string_count=count,
        tuning=make_tuning(family, count, downtune, drop),
        is_percussion=False,
        measures=measures,
        name=slot.value,
        midi_program=DEFAULT_PROGRAMS[family],
    )


# --- Normalization passes -----------------------------------------------------


def assign_instrument_slots(
    raw_tracks: Sequence[Tuple[int, bool, Any]],
    preferred: Optional[Sequence[Optional[InstrumentSlot]]] = None,
) -> Dict[int, InstrumentSlot]:
    """
    Assign every raw track an instrument slot.

    A preferred slot is kept when it belongs to the track's family and no
    earlier track claimed it. Remaining tracks take the first free slot of
    their family; tracks beyond a family's capacity share its last slot and
    are merged later by merge_overflow_tracks.
    """
    if not raw_tracks:
        raise ContractError("cannot assign slots to an empty track list")

    preferred = list(preferred or [])
    preferred += [None] * (len(raw_tracks) - len(preferred))
    families = [
        program_family(midi_program, is_percussion)
        for midi_program, is_percussion, _track in raw_tracks
    ]

    mapping: Dict[int, InstrumentSlot] = {}
    claimed = set()
    for index, family in enumerate(families):
        slot = preferred[index]
        if slot is not None and slot.family is family and slot not in claimed:
            mapping[index] = slot
            claimed.add(slot)

    for index, family in enumerate(families):
        if index in mapping:
            continue
        slots = FAMILY_SLOTS[family]
        free = [slot for slot in slots if slot not in claimed]
        if free:
            mapping[index] = free[0]
            claimed.add(free[0])
            continue
        logger.debug(
            f"Track {index} overflows the {family.value} family, "
            f"sharing slot {slots[-1].value}"
        )
        mapping[index] = slots[-1]
    return mapping


def _merge_measures(measures: Sequence[Measure]) -> Measure:
    """Onset-aligned union of beats; the earlier measure wins collisions."""
    groups: Dict[int, List[Beat]] = defaultdict(list)
    for measure in measures:
        for beat in measure.beats:
            groups[beat.onset].append(beat)

    sounding = [
        (beat.onset, beat.end)
        for measure in measures
        for beat in measure.beats
        if not beat.is_rest
    ]

    kept = []
    for onset in sorted(groups):
        notes: Dict[int, Note] = {}
        for beat in groups[onset]:
            for note in beat.notes:
                notes.setdefault(note.position, note)
        # a rest inside another track's sounding beat would cut that beat short
        if not notes and any(start < onset < end for start, end in sounding):
            continue
        kept.append((onset, groups[onset], notes))

    beats = []
    for index, (onset, group, notes) in enumerate(kept):
        longest = max(beat.duration for beat in group)
        if index + 1 < len(kept):
            longest = min(longest, kept[index + 1][0] - onset)
        effects = frozenset().union(*(beat.effects for beat in group))
        beats.append(Beat(onset, longest, tuple(notes.values()), effects))
    return Measure(tuple(beats))


def _check_measure_counts(tracks: Sequence[Track]) -> int:
    counts = {len(track.measures) for track in tracks}
    if len(counts) > 1:
        raise StructuralError(f"tracks have mismatched measure counts {sorted(counts)}")
    return counts.pop()


def merge_drum_tracks(tracks: Sequence[Track]) -> Track:
    """Combine percussion tracks into the single drums track."""
    if not tracks:
        raise ContractError("no drum tracks to merge")
    if any(not track.is_percussion for track in tracks):
        raise ContractError("merge_drum_tracks only accepts percussion tracks")
    measure_count = _check_measure_counts(tracks)
    if len(tracks) == 1:
        return attr.evolve(tracks[0], slot=InstrumentSlot.DRUMS)

    measures = tuple(
        _merge_measures([track.measures[i] for track in tracks])
        for i in range(measure_count)
    )
    return attr.evolve(tracks[0], slot=InstrumentSlot.DRUMS, measures=measures)


def _refret(note: Note, source: Track, target: Track) -> Optional[Note]:
    """Move a note onto target's tuning, keeping its pitch and string."""
    if note.string > target.string_count or note.string > len(source.tuning):
        return None
    fret = note.fret + source.tuning[note.string - 1] - target.tuning[note.string - 1]
    if not _fret_valid(fret):
        return None
    return attr.evolve(note, fret=fret)


def _refret_track(source: Track, target: Track) -> Track:
    if source.tuning == target.tuning and source.string_count == target.string_count:
        return source
    dropped = 0
    measures = []
    for measure in source.measures:
        beats = []
        for beat in measure.beats:
            notes = []
            for note in beat.notes:
                moved = _refret(note, source, target)
                if moved is None:
                    dropped += 1
                else:
                    notes.append(moved)
            beats.append(attr.evolve(beat, notes=tuple(notes)))
        measures.append(Measure(tuple(beats)))
    if dropped:
        logger.warning(
            f"Dropped {dropped} notes of '{source.name}' that do not fit the "
            f"tuning of '{target.name}'"
        )
    return attr.evolve(source, measures=tuple(measures))


def merge_overflow_tracks(tracks: Sequence[Track]) -> Track:
    """
    Combine pitched tracks that share a slot.

    Notes of later tracks are re-fretted to the first track's tuning; on a
    per-string collision the earlier track's note wins.
    """
    if not tracks:
        raise ContractError("no tracks to merge")
    if any(track.is_percussion for track in tracks):
        raise ContractError("merge_overflow_tracks only accepts pitched tracks")
    measure_count = _check_measure_counts(tracks)
    if len(tracks) == 1:
        return tracks[0]

    head = tracks[0]
    aligned = [head] + [_refret_track(track, head) for track in tracks[1:]]
    measures = tuple(
        _merge_measures([track.measures[i] for track in aligned])
        for i in range(measure_count)
    )
    return attr.evolve(head, measures=measures)


def _track_offset(track: Track) -> Tuple[int, bool]:
    """Return (downtune, drop) for a pitched track or raise TuningError."""
    standard = standard_tuning(track.family, track.string_count)
    if standard is None or len(track.tuning) != track.string_count:
        raise TuningError(
            TuningError.UNSUPPORTED,
            f"'{track.name}' has {track.string_count} strings",
        )
    deltas = [pitch - base for pitch, base in zip(track.tuning, standard)]
    offset = deltas[0]
    if MIN_DOWNTUNE <= offset <= 0:
        if all(delta == offset for delta in deltas):
            return offset, False
        if all(delta == offset for delta in deltas[:-1]) and deltas[-1] == offset - 2:
            return offset, True
    raise TuningError(
        TuningError.UNSUPPORTED, f"'{track.name}' string offsets {deltas}"
    )


def validate_tuning(song: Song) -> int:
    """
    Return the uniform downtune shared by all pitched tracks.

    Drop tunings (lowest string a further whole step down) are accepted on
    any pitched track.
    """
    pitched = [track for track in song.tracks if not track.is_percussion]
    if not pitched:
        raise ContractError("validate_tuning needs at least one pitched track")

    offsets = {_track_offset(track)[0] for track in pitched}
    if len(offsets) > 1:
        raise TuningError(TuningError.MIXED, f"offsets {sorted(offsets)}")
    return offsets.pop()


def is_drop_tuned(track: Track, downtune: int) -> bool:
    if track.is_percussion:
        return False
    try:
        offset, drop = _track_offset(track)
    except TuningError:
        return False
    return drop and offset == downtune


def infer_time_signature(measure_wait_total: int) -> Tuple[TimeSignature, bool]:
    """
    Pick a time signature for a measure span in ticks.

    Returns the signature and whether the span had to be rounded to the
    nearest multiple of 240 ticks.
    """
    if measure_wait_total <= 0:
        raise ContractError("measure wait total must be positive")

    span = measure_wait_total
    rounded = False
    if span % 240:
        span = max(240, (span + 120) // 240 * 240)
        rounded = True
        logger.debug(f"Measure span {measure_wait_total} rounded to {span}")

    if span % TICKS_PER_QUARTER == 0:
        return TimeSignature(span // TICKS_PER_QUARTER, 4), rounded
    if span % 480 == 0:
        return TimeSignature(span // 480, 8), rounded
    return TimeSignature(span // 240, 16), rounded


def fill_measure(measure: Measure, span: int) -> Measure:
    """Make a measure's beats contiguous over [0, span), resting in the gaps."""
    beats: List[Beat] = []
    cursor = 0
    for beat in sorted(measure.beats, key=lambda b: b.onset):
        if beat.onset >= span:
            continue
        if beat.onset < cursor:
            previous = beats[-1]
            if previous.onset >= beat.onset:
                continue
            beats[-1] = attr.evolve(previous, duration=beat.onset - previous.onset)
            cursor = beat.onset
        if beat.onset > cursor:
            beats.append(Beat(cursor, beat.onset - cursor))
        duration = min(beat.duration, span - beat.onset)
        beats.append(attr.evolve(beat, duration=duration))
        cursor = beat.onset + duration
    if cursor < span:
        beats.append(Beat(cursor, span - cursor))
    return Measure(tuple(beats))


def _hoist_tempo_changes(song: Song) -> Song:
    """Move tempo-change beat effects onto their measure header."""
    headers = list(song.measure_headers)
    tracks = []
    for track in song.tracks:
        measures = []
        for index, measure in enumerate(track.measures):
            beats = []
            for beat in measure.beats:
                tempo = [
                    e for e in beat.effects if e.kind is BeatEffectKind.TEMPO_CHANGE
                ]
                if tempo:
                    if headers[index].tempo_change is None:
                        headers[index] = attr.evolve(
                            headers[index], tempo_change=tempo[0].params[0]
                        )
                    beat = attr.evolve(beat, effects=beat.effects - set(tempo))
                beats.append(beat)
            measures.append(Measure(tuple(beats)))
        tracks.append(attr.evolve(track, measures=tuple(measures)))
    return attr.evolve(song, tracks=tuple(tracks), measure_headers=tuple(headers))


def is_measure_repeat(song: Song, index: int) -> bool:
    """
    True when measure `index` spans as many ticks as its predecessor, has no
    tempo change and holds identical beats on every track.
    """
    if index <= 0:
        return False
    headers = song.measure_headers
    return (
        headers[index].tempo_change is None
        and headers[index].span == headers[index - 1].span
        and all(
            track.measures[index] == track.measures[index - 1]
            for track in song.tracks
        )
    )


def mark_measure_repeats(song: Song) -> Song:
    """Set repeat_of_previous on measures identical to their predecessor."""
    headers = tuple(
        attr.evolve(header, repeat_of_previous=is_measure_repeat(song, index))
        for index, header in enumerate(song.measure_headers)
    )
    return attr.evolve(song, measure_headers=headers)


def normalize_song(song: Song) -> Song:
    """
    Make a raw score encodable.

    Assigns slots (keeping valid existing ones), merges drum and overflow
    tracks, canonicalises drum layouts, validates the tuning and fills
    measure gaps with rests.
    Raises TuningError when the tuning is rejected.
    """
    tracks: List[Track] = []
    if song.tracks:
        if _check_measure_counts(song.tracks) != len(song.measure_headers):
            raise StructuralError("track measure count differs from header count")
        raw = [(t.midi_program, t.is_percussion, t) for t in song.tracks]
        slots = assign_instrument_slots(raw, [t.slot for t in song.tracks])
        by_slot: Dict[InstrumentSlot, List[Track]] = defaultdict(list)
        for index, track in enumerate(song.tracks):
            by_slot[slots[index]].append(attr.evolve(track, slot=slots[index]))

        for slot in InstrumentSlot:
            group = by_slot.get(slot)
            if not group:
                continue
            if slot is InstrumentSlot.DRUMS:
                merged = merge_drum_tracks(group)
                merged = attr.evolve(merged, string_count=DRUM_STRING_COUNT, tuning=())
            else:
                if len(group) > 1:
                    logger.warning(
                        f"Merging {len(group)} tracks into slot {slot.value}"
                    )
                merged = merge_overflow_tracks(group)
            tracks.append(merged)

    song = attr.evolve(song, tracks=tuple(tracks))
    downtune = 0
    if any(not track.is_percussion for track in tracks):
        downtune = validate_tuning(song)

    if song.initial_tempo <= 0:
        song = attr.evolve(song, initial_tempo=DEFAULT_TEMPO)
    song = _hoist_tempo_changes(attr.evolve(song, downtune=downtune))

    spans = [header.span for header in song.measure_headers]
    filled = tuple(
        attr.evolve(
            track,
            measures=tuple(
                fill_measure(measure, span)
                for measure, span in zip(track.measures, spans)
            ),
        )
        for track in song.tracks
    )
    return mark_measure_repeats(attr.evolve(song, tracks=filled))


# --- Contract checks ------------------------------------------------------------


def _note_problem(track: Track, note: Note) -> Optional[str]:
    if track.is_percussion:
        if note.percussion_midi is None or note.string is not None:
            return "percussion track holds a pitched note"
        if not MIN_PERCUSSION_MIDI <= note.percussion_midi <= MAX_PERCUSSION_MIDI:
            return f"percussion number {note.percussion_midi} out of range"
    else:
        if note.percussion_midi is not None or note.string is None:
            return "pitched track holds a percussion note"
        if not 1 <= note.string <= track.string_count:
            return f"string {note.string} outside 1..{track.string_count}"
        if note.fret is None or not _fret_valid(note.fret):
            return f"fret {note.fret} out of range"
    for effect in note.effects:
        if not effect.is_valid:
            return f"invalid note effect {effect}"
    return None


def check_song(song: Song) -> None:
    """Raise ContractError unless the Song satisfies the model invariants."""
    if song.initial_tempo <= 0:
        raise ContractError("initial tempo must be positive")
    if not MIN_DOWNTUNE <= song.downtune <= 0:
        raise ContractError(f"downtune {song.downtune} out of range")

    spans = []
    for index, header in enumerate(song.measure_headers):
        if header.index != index:
            raise ContractError(f"measure header {index} has index {header.index}")
        if not header.time_signature.is_valid:
            raise ContractError(f"measure {index}: bad time signature")
        if header.tempo_change is not None and header.tempo_change <= 0:
            raise ContractError(f"measure {index}: tempo change must be positive")
        spans.append(header.span)

    for track in song.tracks:
        if len(track.measures) != len(spans):
            raise ContractError(f"track '{track.name}' measure count mismatch")
        if not 1 <= track.string_count <= MAX_STRINGS:
            raise ContractError(f"track '{track.name}' has bad string count")
        if not track.is_percussion and len(track.tuning) != track.string_count:
            raise ContractError(f"track '{track.name}' tuning length mismatch")
        for index, (measure, span) in enumerate(zip(track.measures, spans)):
            previous_end = 0
            for beat in measure.beats:
                where = f"track '{track.name}' measure {index} tick {beat.onset}"
                if beat.onset < previous_end or beat.duration <= 0:
                    raise ContractError(f"{where}: overlapping or empty beat")
                if beat.end > span:
                    raise ContractError(f"{where}: beat overruns the measure")
                previous_end = beat.end
                positions = [note.position for note in beat.notes]
                if len(set(positions)) != len(positions):
                    raise ContractError(f"{where}: two notes share a string")
                for note in beat.notes:
                    problem = _note_problem(track, note)
                    if problem:
                        raise ContractError(f"{where}: {problem}")
                for effect in beat.effects:
                    if not effect.is_valid:
                        raise ContractError(f"{where}: invalid beat effect {effect}")


def check_normalized(song: Song) -> None:
    """Raise ContractError unless the Song is ready for encoding."""
    check_song(song)
    seen = set()
    for track in song.tracks:
        if track.slot is None or track.slot in seen:
            raise ContractError(f"track '{track.name}' has a missing or shared slot")
        seen.add(track.slot)
        if track.is_percussion != (track.slot is InstrumentSlot.DRUMS):
            raise ContractError(f"track '{track.name}' percussion flag mismatch")
        if track.string_count not in supported_string_counts(track.family):
            raise ContractError(f"track '{track.name}' has an unsupported layout")
        if not track.is_percussion:
            try:
                offset, _drop = _track_offset(track)
            except TuningError as e:
                raise ContractError(str(e)) from e
            if offset != song.downtune:
                raise ContractError(f"track '{track.name}' does not match downtune")

    order = [track.slot.order for track in song.tracks]
    if order != sorted(order):
        raise ContractError("tracks are not in slot order")

    for track in song.tracks:
        for index, (measure, header) in enumerate(
            zip(track.measures, song.measure_headers)
        ):
            cursor = 0
            for beat in measure.beats:
                if beat.onset != cursor:
                    raise ContractError(
                        f"track '{track.name}' measure {index} has a gap at {cursor}"
                    )
                if any(e.kind is BeatEffectKind.TEMPO_CHANGE for e in beat.effects):
                    raise ContractError("tempo changes belong on measure headers")
                cursor = beat.end
            if cursor != header.span:
                raise ContractError(
                    f"track '{track.name}' measure {index} does not fill its span"
                )
