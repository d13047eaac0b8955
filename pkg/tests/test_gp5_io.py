"""
Tests for GuitarPro 5 Reading and Writing
"""

import struct

import attr
import guitarpro as gp
import pytest

from src.gp5_io import (
    Gp5Error,
    MalformedFileError,
    UnsupportedVersionError,
    ensure_playable,
    read_gp5,
    read_gp5_document,
    write_gp5,
)
from src.gp5_io.buffer import Gp5Buffer
from src.gp5_io.durations import (
    REPRESENTABLE,
    duration_ticks,
    is_split_chain,
    split_ticks,
    to_gp_duration,
)
from src.gp5_io.reader import VERSION_500
from src.song_model import (
    Beat,
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
    make_track,
    rest_measure,
)
from tests.factories import build_song, headers, random_song

PALM_MUTE = NoteEffect(NoteEffectKind.PALM_MUTE)
STANDARD_GUITAR = (64, 59, 55, 50, 45, 40)


def golden_gp5(track_name: str = "Lead Guitar") -> bytes:
    """A one-measure file built with PyGuitarPro's own models."""
    song = gp.Song(tracks=[], measureHeaders=[])
    song.title = "Golden"
    song.artist = "Fixture"
    song.tempo = 100
    header = gp.MeasureHeader(
        number=1, timeSignature=gp.TimeSignature(4, gp.Duration(4))
    )
    song.measureHeaders.append(header)
    track = gp.Track(
        song,
        number=1,
        name=track_name,
        strings=[
            gp.GuitarString(number, pitch)
            for number, pitch in enumerate(STANDARD_GUITAR, start=1)
        ],
        channel=gp.MidiChannel(channel=0, effectChannel=0, instrument=29),
    )
    song.tracks.append(track)
    measure = gp.Measure(track, header)
    voice = measure.voices[0]

    muted = gp.Beat(voice, duration=gp.Duration(4), status=gp.BeatStatus.normal)
    note = gp.Note(muted, value=5, string=6, type=gp.NoteType.normal)
    note.effect.palmMute = True
    muted.notes.append(note)

    bent = gp.Beat(voice, duration=gp.Duration(4), status=gp.BeatStatus.normal)
    note = gp.Note(bent, value=7, string=3, type=gp.NoteType.normal)
    note.effect.bend = gp.BendEffect(
        type=gp.BendType.bend,
        value=4,
        points=[
            gp.BendPoint(position=0, value=0),
            gp.BendPoint(position=6, value=4),
            gp.BendPoint(position=12, value=4),
        ],
    )
    bent.notes.append(note)

    rest = gp.Beat(voice, duration=gp.Duration(2), status=gp.BeatStatus.rest)
    voice.beats.extend([muted, bent, rest])
    track.measures.append(measure)

    buffer = Gp5Buffer()
    gp.write(song, buffer, version=(5, 0, 0))
    return buffer.contents


def golden_song() -> Song:
    bend = NoteEffect(NoteEffectKind.BEND, (1, 0, 0, 0, 30, 100, 0, 60, 100, 0))
    measure = Measure(
        (
            Beat(0, 960, (Note.pitched(6, 5, {PALM_MUTE}),)),
            Beat(960, 960, (Note.pitched(3, 7, {bend}),)),
            Beat(1920, 1920),
        )
    )
    track = Track(
        slot=InstrumentSlot.DISTORTED0,
        string_count=6,
        tuning=STANDARD_GUITAR,
        is_percussion=False,
        measures=(measure,),
        name="Lead Guitar",
        midi_program=29,
    )
    return Song(
        artist="Fixture",
        title="Golden",
        initial_tempo=100,
        tracks=(track,),
        measure_headers=(MeasureHeader(0, TimeSignature(4, 4)),),
    )


class TestDurations:
    """Test tick to GP duration conversion."""

    def test_plain_values(self):
        """Test plain and dotted note values."""
        assert to_gp_duration(960).value == 4
        assert to_gp_duration(3840).value == 1
        assert to_gp_duration(720).value == 8
        assert to_gp_duration(720).isDotted
        assert to_gp_duration(60).value == 64

    def test_triplets(self):
        """Test triplet eighths are representable."""
        duration = to_gp_duration(320)
        assert duration.value == 8
        assert (duration.tuplet.enters, duration.tuplet.times) == (3, 2)
        assert duration_ticks(duration) == 320

    def test_every_value_converts_back(self):
        """Test each representable span maps to a duration of that length."""
        for ticks in REPRESENTABLE:
            assert duration_ticks(to_gp_duration(ticks)) == ticks

    def test_split_representable(self):
        """Test representable spans are a single piece."""
        assert split_ticks(960) == ([960], 0)

    def test_split_composite(self):
        """Test other spans split into the fewest pieces, longest first."""
        pieces, residue = split_ticks(1200)
        assert pieces == [960, 240]
        assert residue == 0
        assert all(piece in REPRESENTABLE for piece in pieces)

    def test_split_residue(self):
        """Test spans below the smallest value are left over."""
        assert split_ticks(7) == ([], 7)
        assert split_ticks(0) == ([], 0)

    def test_split_chain(self):
        """Test only the writer's own split order counts as a chain."""
        assert is_split_chain([960, 240])
        assert not is_split_chain([240, 960])
        assert not is_split_chain([960])
        assert not is_split_chain([480, 480])


class TestGp5RoundTrip:
    """Test that written files read back as the same Song."""

    def test_riff(self, riff):
        """Test the riff reads back unchanged."""
        assert read_gp5(write_gp5(riff)) == riff

    def test_band(self, band):
        """Test drums, a five-string bass and a tempo change read back."""
        song = read_gp5(write_gp5(band))
        assert song == band
        assert song.measure_headers[1].tempo_change == 90
        assert song.album == "Live"

    @pytest.mark.parametrize("seed", range(30))
    def test_random_songs(self, seed):
        """Test seeded random songs read back unchanged."""
        song = random_song(seed)
        assert read_gp5(write_gp5(song)) == song

    def test_document_metadata(self, riff):
        """Test the document reports its version and no skipped features."""
        document = read_gp5_document(write_gp5(riff))
        assert document.version == VERSION_500
        assert document.skipped == {}

    def test_deterministic(self, band):
        """Test writing the same Song twice gives identical bytes."""
        assert write_gp5(band) == write_gp5(band)

    def test_version_prefix(self, riff):
        """Test the file opens with the byte-prefixed version tag."""
        data = write_gp5(riff)
        tag = VERSION_500.encode("ascii")
        assert data[0] == len(tag)
        assert data[1 : 1 + len(tag)] == tag
        assert data[1 + len(tag) : 31] == bytes(30 - len(tag))

    def test_title_block(self, riff):
        """Test title and artist follow the version block."""
        data = write_gp5(riff)
        size, length = struct.unpack("<iB", data[31:36])
        assert (size, length) == (len("Test Song") + 1, len("Test Song"))
        assert data[36:45] == b"Test Song"


class TestGp5Slots:
    """Test instrument slots survive a GP5 write and read."""

    def test_second_clean_slot(self):
        """Test a lone clean1 track is not moved to clean0."""
        track = make_track(InstrumentSlot.CLEAN1, [rest_measure(3840)])
        song = build_song([track], headers(1))
        read_back = read_gp5(write_gp5(song))
        assert read_back.tracks[0].slot is InstrumentSlot.CLEAN1
        assert read_back == song

    def test_third_distorted_slot(self):
        """Test distorted0 and distorted2 keep their slots."""
        measure = Measure((Beat(0, 3840, (Note.pitched(6, 0),)),))
        tracks = [
            make_track(InstrumentSlot.DISTORTED0, [measure]),
            make_track(InstrumentSlot.DISTORTED2, [measure]),
        ]
        song = build_song(tracks, headers(1))
        slots = [track.slot for track in read_gp5(write_gp5(song)).tracks]
        assert slots == [InstrumentSlot.DISTORTED0, InstrumentSlot.DISTORTED2]

    def test_tracks_are_named_after_slots(self):
        """Test the writer stores the slot as the track name."""
        track = attr.evolve(
            make_track(InstrumentSlot.BASS, [rest_measure(3840)]), name="My Bass"
        )
        song = build_song([track], headers(1))
        read_back = read_gp5(write_gp5(song))
        assert read_back.tracks[0].name == "bass"
        assert read_back.tracks[0].slot is InstrumentSlot.BASS


class TestGoldenFile:
    """Test reading a file produced by PyGuitarPro's own models."""

    def test_reads_expected_song(self):
        """Test notes, effects, bend units and the rest come through."""
        assert read_gp5(golden_gp5()) == golden_song()

    def test_nothing_skipped(self):
        """Test the golden file uses only supported features."""
        document = read_gp5_document(golden_gp5())
        assert document.version == VERSION_500
        assert document.skipped == {}

    def test_slot_named_track(self):
        """Test a track named after a slot of its family takes that slot."""
        song = read_gp5(golden_gp5("distorted2"))
        assert song.tracks[0].slot is InstrumentSlot.DISTORTED2

    def test_foreign_slot_name_ignored(self):
        """Test a slot name from another family does not override the program."""
        song = read_gp5(golden_gp5("bass"))
        assert song.tracks[0].slot is InstrumentSlot.DISTORTED0
        assert song.tracks[0].name == "bass"


class TestGp5Writer:
    """Test writer edge cases."""

    def test_split_beats_read_back_whole(self):
        """Test beats without a single note value are rejoined on read."""
        measure = Measure((Beat(0, 1200, (Note.pitched(1, 5),)), Beat(1200, 2640)))
        song = build_song([make_track(InstrumentSlot.CLEAN0, [measure])], headers(1))
        beats = read_gp5(write_gp5(song)).tracks[0].measures[0].beats
        assert beats == (Beat(0, 1200, (Note.pitched(1, 5),)), Beat(1200, 2640))

    def test_split_drum_beat(self):
        """Test a split drum hit is rejoined into one beat."""
        measure = Measure((Beat(0, 1200, (Note.percussion(36),)), Beat(1200, 2640)))
        song = build_song([make_track(InstrumentSlot.DRUMS, [measure])], headers(1))
        assert read_gp5(write_gp5(song)) == song

    def test_real_ties_stay_separate(self):
        """Test a tied note of its own length is not merged into its head."""
        tie = NoteEffect(NoteEffectKind.TIE)
        measure = Measure(
            (
                Beat(0, 1920, (Note.pitched(2, 3),)),
                Beat(1920, 1920, (Note.pitched(2, 3, {tie, PALM_MUTE}),)),
            )
        )
        song = build_song([make_track(InstrumentSlot.CLEAN0, [measure])], headers(1))
        assert read_gp5(write_gp5(song)) == song

    def test_rejects_invalid_song(self):
        """Test Songs breaking the model invariants are refused."""
        track = make_track(InstrumentSlot.CLEAN0, [Measure((Beat(0, 5000),))])
        with pytest.raises(ContractError):
            write_gp5(Song(tracks=(track,), measure_headers=headers(1)))

    def test_rejects_trackless_song(self):
        """Test a Song without tracks needs ensure_playable first."""
        with pytest.raises(ContractError):
            write_gp5(Song(measure_headers=headers(1)))

    def test_ensure_playable_empty_song(self):
        """Test an empty Song gets one rest measure on one track."""
        song = ensure_playable(Song())
        assert len(song.measure_headers) == 1
        assert song.tracks[0].slot is InstrumentSlot.CLEAN0
        assert song.tracks[0].measures[0].beats == (Beat(0, 3840),)
        read_back = read_gp5(write_gp5(song))
        assert len(read_back.tracks) == 1

    def test_ensure_playable_fills_empty_tracks(self):
        """Test tracks without measures get rest measures."""
        song = Song(tracks=(make_track(InstrumentSlot.BASS),))
        playable = ensure_playable(song)
        assert len(playable.tracks) == 1
        assert playable.tracks[0].measures == (Measure((Beat(0, 3840),)),)

    def test_ensure_playable_keeps_full_songs(self, riff):
        """Test complete Songs pass through unchanged."""
        assert ensure_playable(riff) == riff


class TestGp5ReaderErrors:
    """Test typed reader errors."""

    def test_unsupported_version(self):
        """Test an older version tag is refused with the tag attached."""
        tag = b"FICHIER GUITAR PRO v3.00"
        data = bytes([len(tag)]) + tag.ljust(30, b"\x00") + bytes(200)
        with pytest.raises(UnsupportedVersionError) as excinfo:
            read_gp5(data)
        assert excinfo.value.version == "FICHIER GUITAR PRO v3.00"

    def test_empty_data(self):
        """Test empty input is malformed."""
        with pytest.raises(MalformedFileError):
            read_gp5(b"")

    def test_short_version_block(self):
        """Test data shorter than the version block reports its length."""
        with pytest.raises(MalformedFileError) as excinfo:
            read_gp5(b"\x18FICHIER GUITAR")
        assert excinfo.value.offset == 15

    @pytest.mark.parametrize("cut", [40, 500, -5])
    def test_truncated(self, riff, cut):
        """Test truncated files raise with a byte offset."""
        data = write_gp5(riff)[:cut]
        with pytest.raises(MalformedFileError) as excinfo:
            read_gp5(data)
        assert excinfo.value.offset is not None
        assert excinfo.value.offset <= len(data)

    def test_errors_share_a_base(self):
        """Test both reader errors are Gp5Errors."""
        assert issubclass(UnsupportedVersionError, Gp5Error)
        assert issubclass(MalformedFileError, Gp5Error)
