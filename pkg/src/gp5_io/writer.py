"""
GuitarPro 5 Writer

Builds a PyGuitarPro song from a Song and writes it as a deterministic v5.00
document. Beat durations that have no single GP note value are split into
tied pieces; spans that cannot be represented at all are dropped with a
warning. Each track is named after its instrument slot so the reader can
restore the slot.
"""

import logging
import struct
from typing import List, Optional, Tuple

import attr
import guitarpro as gp

from ..song_model import (
    HARMONIC_ARTIFICIAL,
    HARMONIC_NATURAL,
    HARMONIC_TAPPED,
    MAX_STRINGS,
    TICKS_PER_WHOLE,
    Beat,
    BeatEffectKind,
    ContractError,
    InstrumentSlot,
    Measure,
    MeasureHeader,
    NoteEffect,
    NoteEffectKind,
    Song,
    TimeSignature,
    Track,
    check_song,
    fill_measure,
    make_track,
    rest_measure,
)
from .buffer import Gp5Buffer
from .durations import split_ticks, to_gp_duration
from .reader import (
    BEND_POSITION_UNIT,
    BEND_VALUE_UNIT,
    FLAG_NOTE_ATTRIBUTES,
    PERCUSSION_CHANNEL,
    SLAP_EFFECTS,
    SLIDE_CODES,
)

logger = logging.getLogger(__name__)

GP5_VERSION = (5, 0, 0)
PITCHED_CHANNELS = tuple(c for c in range(16) if c != PERCUSSION_CHANNEL)
DRUM_WRITE_STRINGS = MAX_STRINGS

SLAP_TYPES = {kind: slap for slap, kind in SLAP_EFFECTS.items()}
SLIDE_TYPES = {code: slide for slide, code in SLIDE_CODES.items()}
HARMONIC_TYPES = {
    HARMONIC_NATURAL: gp.NaturalHarmonic,
    4: gp.PinchHarmonic,
    5: gp.SemiHarmonic,
}
TIE = NoteEffect(NoteEffectKind.TIE)


@attr.s(frozen=True, slots=True)
class _Piece:
    """One written beat: a whole model beat or a tied continuation of one."""

    beat = attr.ib(type=Beat)
    ticks = attr.ib(type=int)
    continuation = attr.ib(default=False)


def _first(effects, kinds) -> Optional[object]:
    """First effect (in canonical order) of the given kinds; warn on extras."""
    matching = sorted(
        (e for e in effects if e.kind in kinds), key=lambda e: e.sort_key()
    )
    if len(matching) > 1:
        logger.warning(
            f"GP5 stores one {matching[0].kind.value} per event, "
            f"dropping {len(matching) - 1}"
        )
    return matching[0] if matching else None


def _bend(params: Tuple[int, ...]) -> gp.BendEffect:
    points = [params[i : i + 3] for i in range(1, len(params), 3)]
    return gp.BendEffect(
        type=gp.BendType(params[0]),
        value=max(value for _, value, _ in points),
        points=[
            gp.BendPoint(
                position=position / BEND_POSITION_UNIT,
                value=value / BEND_VALUE_UNIT,
                vibrato=bool(vibrato),
            )
            for position, value, vibrato in points
        ],
    )


def _harmonic(params: Tuple[int, ...]):
    if params[0] == HARMONIC_ARTIFICIAL:
        _, semitone, accidental, octave = params
        return gp.ArtificialHarmonic(
            pitch=gp.PitchClass(semitone, accidental), octave=gp.Octave(octave)
        )
    if params[0] == HARMONIC_TAPPED:
        return gp.TappedHarmonic(fret=params[1])
    return HARMONIC_TYPES[params[0]]()


class Gp5Writer:
    def __init__(self, song: Song):
        self.song = song
        self.channels = self._assign_channels()

    def _assign_channels(self) -> List[int]:
        channels = []
        pitched = 0
        for track in self.song.tracks:
            if track.is_percussion:
                channels.append(PERCUSSION_CHANNEL)
                continue
            if pitched == len(PITCHED_CHANNELS):
                logger.warning(
                    f"More than {len(PITCHED_CHANNELS)} pitched tracks, "
                    "later tracks share MIDI channels"
                )
            channels.append(PITCHED_CHANNELS[pitched % len(PITCHED_CHANNELS)])
            pitched += 1
        return channels

    # -- song header ---------------------------------------------------------

    def build_header(self, header: MeasureHeader) -> gp.MeasureHeader:
        signature = header.time_signature
        return gp.MeasureHeader(
            number=header.index + 1,
            timeSignature=gp.TimeSignature(
                signature.numerator, gp.Duration(signature.denominator)
            ),
        )

    # -- tracks ----------------------------------------------------------------

    def build_track(
        self, gp_song: gp.Song, number: int, track: Track, channel: int
    ) -> gp.Track:
        if track.is_percussion:
            pitches = [0] * DRUM_WRITE_STRINGS
        else:
            pitches = list(track.tuning)
        return gp.Track(
            gp_song,
            number=number,
            name=track.slot.value if track.slot is not None else track.name,
            strings=[
                gp.GuitarString(string, pitch)
                for string, pitch in enumerate(pitches, start=1)
            ],
            channel=gp.MidiChannel(
                channel=channel, effectChannel=channel, instrument=track.midi_program
            ),
            isPercussionTrack=track.is_percussion,
            fretCount=24,
        )

    # -- beats -----------------------------------------------------------------

    def apply_beat_effects(self, gp_beat: gp.Beat, effects) -> None:
        effect = gp_beat.effect
        kinds = {e.kind for e in effects}
        slap = _first(effects, SLAP_TYPES)
        stroke = _first(effects, (BeatEffectKind.DOWNSTROKE, BeatEffectKind.UPSTROKE))
        tremolo_bar = _first(effects, (BeatEffectKind.TREMOLO_BAR,))

        effect.vibrato = BeatEffectKind.VIBRATO in kinds
        effect.fadeIn = BeatEffectKind.FADE_IN in kinds
        effect.hasRasgueado = BeatEffectKind.RASGUEADO in kinds
        if slap:
            effect.slapEffect = SLAP_TYPES[slap.kind]
        if tremolo_bar:
            effect.tremoloBar = _bend(tremolo_bar.params)
        if stroke:
            direction = (
                gp.BeatStrokeDirection.up
                if stroke.kind is BeatEffectKind.UPSTROKE
                else gp.BeatStrokeDirection.down
            )
            effect.stroke = gp.BeatStroke(
                direction=direction, value=TICKS_PER_WHOLE // stroke.params[0]
            )

    def apply_note_effects(self, gp_note: gp.Note, effects) -> None:
        effect = gp_note.effect
        kinds = {e.kind for e in effects}
        for name, kind in FLAG_NOTE_ATTRIBUTES:
            setattr(effect, name, kind in kinds)
        bend = _first(effects, (NoteEffectKind.BEND,))
        grace = _first(effects, (NoteEffectKind.GRACE,))
        tremolo = _first(effects, (NoteEffectKind.TREMOLO_PICKING,))
        harmonic = _first(effects, (NoteEffectKind.HARMONIC,))
        trill = _first(effects, (NoteEffectKind.TRILL,))

        if bend:
            effect.bend = _bend(bend.params)
        if grace:
            fret, transition, ticks, dead, on_beat = grace.params
            effect.grace = gp.GraceEffect(
                fret=fret,
                transition=gp.GraceEffectTransition(transition),
                duration=TICKS_PER_WHOLE // ticks,
                isDead=bool(dead),
                isOnBeat=bool(on_beat),
            )
        if tremolo:
            effect.tremoloPicking = gp.TremoloPickingEffect(
                duration=gp.Duration(TICKS_PER_WHOLE // tremolo.params[0])
            )
        effect.slides = [
            SLIDE_TYPES[e.params[0]]
            for e in sorted(effects, key=NoteEffect.sort_key)
            if e.kind is NoteEffectKind.SLIDE
        ]
        if harmonic:
            effect.harmonic = _harmonic(harmonic.params)
        if trill:
            fret, period = trill.params
            effect.trill = gp.TrillEffect(
                fret=fret, duration=gp.Duration(TICKS_PER_WHOLE // period)
            )

    def build_notes(self, gp_beat: gp.Beat, piece: _Piece, is_percussion: bool):
        beat = piece.beat
        if is_percussion:
            hits = list(beat.notes)
            if len(hits) > DRUM_WRITE_STRINGS and not piece.continuation:
                logger.warning(
                    f"Dropping {len(hits) - DRUM_WRITE_STRINGS} simultaneous drum hits"
                )
            placed = [
                (string, note, note.percussion_midi)
                for string, note in enumerate(hits[:DRUM_WRITE_STRINGS], start=1)
            ]
        else:
            placed = [(note.string, note, note.fret) for note in beat.notes]

        for string, note, value in placed:
            if piece.continuation:
                note_type, effects = gp.NoteType.tie, ()
            elif note.is_tied and not is_percussion:
                note_type, effects = gp.NoteType.tie, note.effects - {TIE}
            else:
                if note.is_tied:
                    logger.debug(f"GP5 cannot tie drum hit {value}, writing a new hit")
                note_type, effects = gp.NoteType.normal, note.effects - {TIE}
            gp_note = gp.Note(gp_beat, value=value, string=string, type=note_type)
            self.apply_note_effects(gp_note, effects)
            gp_beat.notes.append(gp_note)

    def build_beat(
        self,
        voice: gp.Voice,
        piece: _Piece,
        is_percussion: bool,
        tempo: Optional[int],
    ) -> gp.Beat:
        beat = piece.beat
        gp_beat = gp.Beat(
            voice,
            duration=to_gp_duration(piece.ticks),
            status=gp.BeatStatus.rest if beat.is_rest else gp.BeatStatus.normal,
        )
        if not piece.continuation:
            self.apply_beat_effects(gp_beat, beat.effects)
        if tempo is not None:
            gp_beat.effect.mixTableChange = gp.MixTableChange(
                tempo=gp.MixTableItem(value=tempo)
            )
        self.build_notes(gp_beat, piece, is_percussion)
        return gp_beat

    def pieces(self, measure: Measure, span: int, track: Track) -> List[_Piece]:
        """Split beats into pieces with one GP duration each."""
        result: List[_Piece] = []
        carry = 0
        for beat in fill_measure(measure, span).beats:
            chunks, carry = split_ticks(beat.duration + carry)
            for number, ticks in enumerate(chunks):
                result.append(_Piece(beat, ticks, continuation=number > 0))
        if carry:
            logger.warning(
                f"Track '{track.name}': dropped {carry} ticks with no GP duration"
            )
        return result

    def build_measures(self, gp_song: gp.Song) -> None:
        for index, header in enumerate(self.song.measure_headers):
            gp_header = gp_song.measureHeaders[index]
            for number, (track, gp_track) in enumerate(
                zip(self.song.tracks, gp_song.tracks)
            ):
                gp_measure = gp.Measure(gp_track, gp_header)
                voice = gp_measure.voices[0]
                pieces = self.pieces(track.measures[index], header.span, track)
                for position, piece in enumerate(pieces):
                    tempo = None
                    if number == 0 and position == 0:
                        tempo = header.tempo_change
                    voice.beats.append(
                        self.build_beat(voice, piece, track.is_percussion, tempo)
                    )
                gp_track.measures.append(gp_measure)

    def build(self) -> gp.Song:
        song = self.song
        gp_song = gp.Song(tracks=[], measureHeaders=[])
        gp_song.title = song.title
        gp_song.artist = song.artist
        gp_song.album = song.album
        gp_song.tempo = song.initial_tempo
        gp_song.measureHeaders.extend(
            self.build_header(header) for header in song.measure_headers
        )
        for number, (track, channel) in enumerate(
            zip(song.tracks, self.channels), start=1
        ):
            gp_song.tracks.append(self.build_track(gp_song, number, track, channel))
        self.build_measures(gp_song)
        return gp_song

    def write(self) -> bytes:
        buffer = Gp5Buffer()
        gp.write(self.build(), buffer, version=GP5_VERSION)
        return buffer.contents


def write_gp5(song: Song) -> bytes:
    """Serialize a Song as GP5 v5.00; raises ContractError for invalid Songs."""
    check_song(song)
    if not song.tracks:
        raise ContractError("GP5 needs at least one track, see ensure_playable")
    try:
        return Gp5Writer(song).write()
    except (struct.error, KeyError, ValueError, TypeError) as e:
        raise ContractError(f"song cannot be written as GP5: {e}") from e


def ensure_playable(song: Song) -> Song:
    """Give an empty Song one 4/4 rest measure and one empty track."""
    headers = song.measure_headers or (MeasureHeader(0, TimeSignature(4, 4)),)
    spans = [header.span for header in headers]
    if song.tracks:
        tracks = tuple(
            track
            if track.measures
            else attr.evolve(track, measures=tuple(rest_measure(s) for s in spans))
            for track in song.tracks
        )
    else:
        measures = tuple(rest_measure(span) for span in spans)
        tracks = (make_track(InstrumentSlot.CLEAN0, measures, downtune=song.downtune),)
    return attr.evolve(song, tracks=tracks, measure_headers=headers)
