"""
GuitarPro 5 Reader

Reads v5.00 and v5.10 documents into the Song model through PyGuitarPro.
Features the token format cannot carry are skipped and counted per feature;
structural damage raises a typed error carrying the byte offset. Tied pieces
a writer split an unrepresentable beat into are joined back into one beat.
"""

import logging
from collections import Counter
from typing import Dict, List, Optional, Tuple

import attr
import guitarpro as gp

from ..song_model import (
    DEFAULT_TEMPO,
    DRUM_STRING_COUNT,
    MAX_FRET,
    MAX_PERCUSSION_MIDI,
    MAX_STRINGS,
    MIN_PERCUSSION_MIDI,
    STROKE_TICKS,
    TICKS_PER_WHOLE,
    Beat,
    BeatEffect,
    BeatEffectKind,
    ContractError,
    InstrumentSlot,
    Measure,
    MeasureHeader,
    Note,
    NoteEffect,
    NoteEffectKind,
    Song,
    TimeSignature,
    Track,
    TuningError,
    assign_instrument_slots,
    mark_measure_repeats,
    validate_tuning,
)
from .buffer import Gp5Buffer
from .durations import duration_ticks, is_split_chain
from .errors import Gp5Error, MalformedFileError, UnsupportedVersionError

logger = logging.getLogger(__name__)

VERSION_500 = "FICHIER GUITAR PRO v5.00"
VERSION_510 = "FICHIER GUITAR PRO v5.10"
SUPPORTED_VERSIONS = (VERSION_500, VERSION_510)
VERSION_FIELD = 30

PERCUSSION_CHANNEL = 9
# file units per PyGuitarPro bend unit
BEND_POSITION_UNIT = 5
BEND_VALUE_UNIT = 25

SLAP_EFFECTS = {
    gp.SlapEffect.tapping: BeatEffectKind.TAP,
    gp.SlapEffect.slapping: BeatEffectKind.SLAP,
    gp.SlapEffect.popping: BeatEffectKind.POP,
}
SLIDE_CODES = {
    gp.SlideType.shiftSlideTo: 1,
    gp.SlideType.legatoSlideTo: 2,
    gp.SlideType.outDownwards: 3,
    gp.SlideType.outUpwards: 4,
    gp.SlideType.intoFromBelow: 5,
    gp.SlideType.intoFromAbove: 6,
}
FLAG_NOTE_ATTRIBUTES = (
    ("hammer", NoteEffectKind.HAMMER),
    ("letRing", NoteEffectKind.LET_RING),
    ("staccato", NoteEffectKind.STACCATO),
    ("palmMute", NoteEffectKind.PALM_MUTE),
    ("vibrato", NoteEffectKind.VIBRATO),
    ("ghostNote", NoteEffectKind.GHOST_NOTE),
    ("accentuatedNote", NoteEffectKind.ACCENTUATED_NOTE),
    ("heavyAccentuatedNote", NoteEffectKind.HEAVY_ACCENTUATED_NOTE),
)
MIX_TABLE_ITEMS = (
    "instrument",
    "volume",
    "balance",
    "chorus",
    "reverb",
    "phaser",
    "tremolo",
)
TIE_ONLY = frozenset({NoteEffect(NoteEffectKind.TIE)})


@attr.s(frozen=True, slots=True)
class Gp5Document:
    """A decoded GP5 file: version tag, the Song and per-feature skip counts."""

    version = attr.ib(type=str)
    song = attr.ib(type=Song)
    skipped = attr.ib(factory=dict)


@attr.s(slots=True)
class _RawTrack:
    name = attr.ib()
    string_count = attr.ib()
    tuning = attr.ib()
    program = attr.ib()
    is_percussion = attr.ib()
    capo = attr.ib()

    @property
    def named_slot(self) -> Optional[InstrumentSlot]:
        """The slot a TabTokens writer stored as the track name, if any."""
        try:
            return InstrumentSlot(self.name.strip())
        except ValueError:
            return None


@attr.s(slots=True)
class _RawBeat:
    ticks = attr.ib(default=0)
    notes = attr.ib(factory=list)
    effects = attr.ib(factory=set)
    tempo = attr.ib(default=None)

    @property
    def is_rest(self) -> bool:
        return not self.notes

    def continues(self, head: "_RawBeat") -> bool:
        """True when this beat only extends head, as a split piece does."""
        if self.effects or self.tempo is not None or self.is_rest != head.is_rest:
            return False
        if self.is_rest:
            return True
        positions = [(string, value) for string, value, _ in self.notes]
        if positions != [(string, value) for string, value, _ in head.notes]:
            return False
        return all(effects == TIE_ONLY for _, _, effects in self.notes)


def read_version(data: bytes) -> str:
    """The version tag of a GP5 byte string; raises for other versions."""
    if len(data) < VERSION_FIELD + 1:
        raise MalformedFileError("data too short for a version tag", len(data))
    size = min(data[0], VERSION_FIELD)
    version = data[1 : 1 + size].decode("cp1252", errors="replace")
    if version not in SUPPORTED_VERSIONS:
        raise UnsupportedVersionError(version)
    return version


def _value_ticks(value: Optional[int]) -> int:
    """Ticks of a plain note value, 0 when there is none."""
    return TICKS_PER_WHOLE // value if value else 0


def _bend_params(bend: gp.BendEffect) -> Tuple[int, ...]:
    params = [bend.type.value]
    for point in bend.points:
        params += [
            point.position * BEND_POSITION_UNIT,
            point.value * BEND_VALUE_UNIT,
            int(bool(point.vibrato)),
        ]
    return tuple(params)


class Gp5Reader:
    def __init__(self, version: str):
        self.version = version
        self.skipped: Counter = Counter()

    def skip_feature(self, name: str, count: int = 1) -> None:
        self.skipped[name] += count

    # -- song header ---------------------------------------------------------

    def read_lyrics(self, song: gp.Song) -> None:
        lines = song.lyrics.lines if song.lyrics is not None else []
        for line in lines:
            if line.lyrics and line.lyrics.strip():
                self.skip_feature("lyrics")

    def read_measure_headers(self, song: gp.Song) -> List[TimeSignature]:
        signatures = []
        key = gp.KeySignature.CMajor
        for index, header in enumerate(song.measureHeaders):
            if header.isRepeatOpen:
                self.skip_feature("repeat_open")
            if header.repeatClose > -1:
                self.skip_feature("repeat_close")
            if header.repeatAlternative:
                self.skip_feature("repeat_alternative")
            if header.marker is not None:
                self.skip_feature("marker")
            if header.keySignature != key:
                self.skip_feature("key_signature")
                key = header.keySignature
            if header.tripletFeel != gp.TripletFeel.none:
                self.skip_feature("triplet_feel")

            signature = header.timeSignature
            signature = TimeSignature(signature.numerator, signature.denominator.value)
            if not signature.is_valid:
                raise MalformedFileError(
                    f"measure {index} has time signature {signature}"
                )
            signatures.append(signature)
        return signatures

    # -- tracks ----------------------------------------------------------------

    def read_track(self, track: gp.Track) -> _RawTrack:
        number = track.number
        if track.channel is None:
            raise MalformedFileError(f"track {number} has no MIDI channel")
        is_percussion = (
            track.isPercussionTrack or track.channel.channel % 16 == PERCUSSION_CHANNEL
        )
        string_count = len(track.strings)
        if not is_percussion and not 1 <= string_count <= MAX_STRINGS:
            raise MalformedFileError(f"track {number} has {string_count} strings")
        program = track.channel.instrument
        if not 0 <= program <= 127:
            program = 0
        capo = track.offset
        if capo and not is_percussion:
            self.skip_feature("capo_applied")
        return _RawTrack(
            name=track.name,
            string_count=string_count,
            tuning=[string.value for string in track.strings],
            program=program,
            is_percussion=is_percussion,
            capo=capo if 0 < capo <= MAX_FRET else 0,
        )

    # -- beats -----------------------------------------------------------------

    def read_beat_effects(self, beat: gp.Beat) -> set:
        effect = beat.effect
        effects = set()
        if effect.vibrato:
            effects.add(BeatEffect(BeatEffectKind.VIBRATO))
        if effect.fadeIn:
            effects.add(BeatEffect(BeatEffectKind.FADE_IN))
        kind = SLAP_EFFECTS.get(effect.slapEffect)
        if kind is not None:
            effects.add(BeatEffect(kind))
        if effect.tremoloBar is not None:
            tremolo_bar = BeatEffect(
                BeatEffectKind.TREMOLO_BAR, _bend_params(effect.tremoloBar)
            )
            if tremolo_bar.is_valid:
                effects.add(tremolo_bar)
            else:
                self.skip_feature("tremolo_bar")
        stroke = effect.stroke
        if stroke is not None and stroke.direction != gp.BeatStrokeDirection.none:
            ticks = _value_ticks(stroke.value)
            if ticks in STROKE_TICKS:
                kind = (
                    BeatEffectKind.UPSTROKE
                    if stroke.direction == gp.BeatStrokeDirection.up
                    else BeatEffectKind.DOWNSTROKE
                )
                effects.add(BeatEffect(kind, (ticks,)))
        if effect.hasRasgueado:
            effects.add(BeatEffect(BeatEffectKind.RASGUEADO))
        if effect.pickStroke != gp.BeatStrokeDirection.none:
            self.skip_feature("pick_stroke")
        if effect.chord is not None:
            self.skip_feature("chord_diagram")
        if beat.text is not None:
            self.skip_feature("text")
        return effects

    def read_mix_table(self, beat: gp.Beat) -> Optional[int]:
        change = beat.effect.mixTableChange
        if change is None:
            return None
        if any(getattr(change, name) is not None for name in MIX_TABLE_ITEMS):
            self.skip_feature("mix_table")
        if change.tempo is not None and change.tempo.value > 0:
            return change.tempo.value
        return None

    def read_harmonic(self, harmonic) -> Tuple[int, ...]:
        if isinstance(harmonic, gp.ArtificialHarmonic):
            pitch = harmonic.pitch
            return (harmonic.type, pitch.just, pitch.accidental, harmonic.octave.value)
        if isinstance(harmonic, gp.TappedHarmonic):
            return (harmonic.type, harmonic.fret)
        return (harmonic.type,)

    def read_note_effects(self, note: gp.Note) -> set:
        effect = note.effect
        effects = set()
        candidates: List[NoteEffect] = [
            NoteEffect(kind)
            for name, kind in FLAG_NOTE_ATTRIBUTES
            if getattr(effect, name)
        ]
        if effect.bend is not None:
            bend = NoteEffect(NoteEffectKind.BEND, _bend_params(effect.bend))
            candidates.append(bend)
        if effect.grace is not None:
            grace = effect.grace
            params = (
                grace.fret,
                grace.transition.value,
                _value_ticks(grace.duration),
                int(grace.isDead),
                int(grace.isOnBeat),
            )
            candidates.append(NoteEffect(NoteEffectKind.GRACE, params))
        if effect.tremoloPicking is not None:
            ticks = _value_ticks(effect.tremoloPicking.duration.value)
            candidates.append(NoteEffect(NoteEffectKind.TREMOLO_PICKING, (ticks,)))
        for slide in effect.slides:
            code = SLIDE_CODES.get(slide, 0)
            candidates.append(NoteEffect(NoteEffectKind.SLIDE, (code,)))
        if effect.harmonic is not None:
            candidates.append(
                NoteEffect(NoteEffectKind.HARMONIC, self.read_harmonic(effect.harmonic))
            )
        if effect.trill is not None:
            trill = effect.trill
            period = _value_ticks(trill.duration.value)
            candidates.append(NoteEffect(NoteEffectKind.TRILL, (trill.fret, period)))

        for candidate in candidates:
            if candidate.is_valid:
                effects.add(candidate)
            else:
                self.skip_feature("invalid_note_effect")
        if note.type == gp.NoteType.tie:
            effects.add(NoteEffect(NoteEffectKind.TIE))
        elif note.type == gp.NoteType.dead:
            self.skip_feature("dead_note")
        return effects

    def read_note(self, note: gp.Note) -> Tuple[int, int, frozenset]:
        """Return (string, fret, effects) for one note."""
        if note.velocity != gp.Velocities.default:
            self.skip_feature("note_dynamics")
        if abs(note.durationPercent - 1.0) >= 1e-3:
            self.skip_feature("duration_percent")
        effect = note.effect
        if (
            effect.leftHandFinger != gp.Fingering.open
            or effect.rightHandFinger != gp.Fingering.open
        ):
            self.skip_feature("fingering")
        return note.string, note.value, frozenset(self.read_note_effects(note))

    def read_beat(self, beat: gp.Beat) -> Optional[_RawBeat]:
        if beat.status == gp.BeatStatus.empty:
            return None
        raw = _RawBeat(ticks=duration_ticks(beat.duration))
        raw.effects = self.read_beat_effects(beat)
        raw.tempo = self.read_mix_table(beat)
        if beat.status != gp.BeatStatus.rest:
            notes = sorted(beat.notes, key=lambda note: note.string)
            raw.notes = [self.read_note(note) for note in notes]
        return raw

    def read_voice(self, voice: gp.Voice) -> List[_RawBeat]:
        beats = (self.read_beat(beat) for beat in voice.beats)
        return [beat for beat in beats if beat is not None]

    def merge_continuations(self, beats: List[_RawBeat]) -> List[_RawBeat]:
        """Join runs of tied pieces that add up to one split beat."""
        merged: List[_RawBeat] = []
        index = 0
        while index < len(beats):
            head = beats[index]
            end = index + 1
            while end < len(beats) and beats[end].continues(head):
                end += 1
            run = beats[index:end]
            stop = len(run)
            while stop > 1 and not is_split_chain([beat.ticks for beat in run[:stop]]):
                stop -= 1
            if stop > 1:
                head = attr.evolve(head, ticks=sum(beat.ticks for beat in run[:stop]))
            merged.append(head)
            index += stop
        return merged

    # -- assembly --------------------------------------------------------------

    def build_measure(
        self,
        raw_beats: List[_RawBeat],
        span: int,
        track: _RawTrack,
    ) -> Tuple[Measure, Optional[int]]:
        beats: List[Beat] = []
        tempo: Optional[int] = None
        onset = 0
        for raw in raw_beats:
            if raw.tempo is not None and tempo is None:
                tempo = raw.tempo
                if onset:
                    self.skip_feature("mid_measure_tempo")
            if onset >= span or raw.ticks <= 0:
                self.skip_feature("measure_overflow")
                continue
            duration = raw.ticks
            if onset + duration > span:
                duration = span - onset
                self.skip_feature("measure_overflow")
            notes = self.build_notes(raw, track)
            beats.append(Beat(onset, duration, tuple(notes), frozenset(raw.effects)))
            onset += duration
        if onset < span:
            if beats:
                self.skip_feature("underfull_measure")
            beats.append(Beat(onset, span - onset))
        return Measure(tuple(beats)), tempo

    def build_notes(self, raw: _RawBeat, track: _RawTrack) -> List[Note]:
        notes: Dict[int, Note] = {}
        for string, fret, effects in raw.notes:
            if track.is_percussion:
                if not MIN_PERCUSSION_MIDI <= fret <= MAX_PERCUSSION_MIDI:
                    self.skip_feature("percussion_out_of_range")
                    continue
                notes.setdefault(fret, Note.percussion(fret, effects))
                continue
            if not 0 <= fret <= MAX_FRET:
                self.skip_feature("fret_out_of_range")
                fret = 0
            fret += track.capo
            if fret > MAX_FRET:
                self.skip_feature("fret_out_of_range")
                continue
            notes[string] = Note.pitched(string, fret, effects)
        return list(notes.values())

    def build_track(self, raw: _RawTrack, measures: List[Measure]) -> Track:
        if raw.is_percussion:
            return Track(
                slot=None,
                string_count=DRUM_STRING_COUNT,
                tuning=(),
                is_percussion=True,
                measures=measures,
                name=raw.name,
                midi_program=raw.program,
            )
        return Track(
            slot=None,
            string_count=raw.string_count,
            tuning=raw.tuning,
            is_percussion=False,
            measures=measures,
            name=raw.name,
            midi_program=raw.program,
        )

    def read_document(self, gp_song: gp.Song) -> Gp5Document:
        self.read_lyrics(gp_song)
        if gp_song.key != gp.KeySignature.CMajor:
            self.skip_feature("key_signature")
        signatures = self.read_measure_headers(gp_song)
        raw_tracks = [self.read_track(track) for track in gp_song.tracks]

        measures: List[List[Measure]] = [[] for _ in raw_tracks]
        tempo_changes: List[Optional[int]] = [None] * len(signatures)
        for number, (gp_track, raw) in enumerate(zip(gp_song.tracks, raw_tracks)):
            for index, (gp_measure, signature) in enumerate(
                zip(gp_track.measures, signatures)
            ):
                if any(
                    beat.status != gp.BeatStatus.empty
                    for voice in gp_measure.voices[1:]
                    for beat in voice.beats
                ):
                    self.skip_feature("second_voice")
                voice = self.merge_continuations(self.read_voice(gp_measure.voices[0]))
                measure, tempo_change = self.build_measure(voice, signature.ticks, raw)
                measures[number].append(measure)
                if tempo_change is not None and tempo_changes[index] is None:
                    tempo_changes[index] = tempo_change

        tempo = gp_song.tempo
        if tempo <= 0:
            self.skip_feature("missing_tempo")
            tempo = DEFAULT_TEMPO

        headers = [
            MeasureHeader(index, signature, False, tempo_changes[index])
            for index, signature in enumerate(signatures)
        ]
        tracks = [
            self.build_track(raw, measures[n]) for n, raw in enumerate(raw_tracks)
        ]
        if tracks:
            slots = assign_instrument_slots(
                [(t.midi_program, t.is_percussion, t) for t in tracks],
                [raw.named_slot for raw in raw_tracks],
            )
            tracks = [attr.evolve(t, slot=slots[n]) for n, t in enumerate(tracks)]

        song = Song(
            artist=gp_song.artist,
            title=gp_song.title,
            album=gp_song.album,
            initial_tempo=tempo,
            tracks=tuple(tracks),
            measure_headers=tuple(headers),
        )
        song = attr.evolve(song, downtune=_detect_downtune(song))
        if self.skipped:
            logger.debug(f"Skipped GP5 features: {dict(self.skipped)}")
        return Gp5Document(self.version, mark_measure_repeats(song), dict(self.skipped))


def _detect_downtune(song: Song) -> int:
    try:
        return validate_tuning(song)
    except (TuningError, ContractError):
        return 0


def read_gp5_document(data: bytes) -> Gp5Document:
    """Read a GP5 byte string, returning the Song with its skip counts."""
    reader = Gp5Reader(read_version(data))
    buffer = Gp5Buffer(data)
    try:
        gp_song = gp.parse(buffer)
    except Exception as e:
        raise MalformedFileError(f"unreadable GP5 data ({e})", buffer.position) from e
    if buffer.position < len(data):
        reader.skip_feature("trailing_bytes")
    try:
        return reader.read_document(gp_song)
    except Gp5Error:
        raise
    except (AttributeError, TypeError, ValueError, ZeroDivisionError) as e:
        raise MalformedFileError(f"inconsistent GP5 data ({e})") from e


def read_gp5(data: bytes) -> Song:
    return read_gp5_document(data).song
