"""
Song to token encoding.

Events of all tracks are merged into one stream ordered by onset, then slot
order, then string. Waits carry the gaps between onsets and to the end of
each measure, so a measure's waits always sum to its tick span.
"""

import logging
import os
from collections import defaultdict
from typing import Dict, List, Optional

from dotenv import load_dotenv

from ..song_model import (
    BeatEffect,
    BeatEffectKind,
    Song,
    Track,
    check_normalized,
    default_string_count,
    is_drop_tuned,
    is_measure_repeat,
)
from .tokens import (
    Artist,
    Bfx,
    Downtune,
    DrumHit,
    End,
    MeasureRepeat,
    NewMeasure,
    Nfx,
    NoteOn,
    Rest,
    Start,
    Tempo,
    Token,
    TokenSeq,
    TrackTuning,
    Wait,
    normalize_artist_name,
)

load_dotenv()

logger = logging.getLogger(__name__)

EMIT_MEASURE_REPEAT = (
    os.getenv("TABTOKENS_EMIT_MEASURE_REPEAT", "true").lower() == "true"
)


def track_tuning_token(track: Track, downtune: int) -> Optional[TrackTuning]:
    """TrackTuning for pitched tracks off their family's default layout."""
    if track.is_percussion:
        return None
    drop = is_drop_tuned(track, downtune)
    if track.string_count == default_string_count(track.family) and not drop:
        return None
    return TrackTuning(track.slot, track.string_count, drop)


def _beat_tokens(track: Track, beat, tempo_change: Optional[int]) -> List[Token]:
    tokens: List[Token] = []
    if beat.is_rest:
        tokens.append(Rest(track.slot))
    for note in beat.notes:
        if note.is_percussion:
            tokens.append(DrumHit(note.percussion_midi))
        else:
            tokens.append(NoteOn(track.slot, note.string, note.fret))
        tokens.extend(Nfx(effect) for effect in note.sorted_effects())
    if tempo_change is not None:
        tokens.append(Bfx(BeatEffect(BeatEffectKind.TEMPO_CHANGE, (tempo_change,))))
    tokens.extend(Bfx(effect) for effect in beat.sorted_effects())
    return tokens


def _measure_tokens(song: Song, index: int) -> List[Token]:
    header = song.measure_headers[index]
    by_onset: Dict[int, List] = defaultdict(list)
    for track in song.tracks:
        for beat in track.measures[index].beats:
            by_onset[beat.onset].append((track, beat))

    tokens: List[Token] = [NewMeasure()]
    pending_tempo = header.tempo_change
    if pending_tempo is not None and not by_onset:
        tokens.append(Bfx(BeatEffect(BeatEffectKind.TEMPO_CHANGE, (pending_tempo,))))
        pending_tempo = None

    cursor = 0
    for onset in sorted(by_onset):
        if onset > cursor:
            tokens.append(Wait(onset - cursor))
            cursor = onset
        for track, beat in by_onset[onset]:
            tokens.extend(_beat_tokens(track, beat, pending_tempo))
            pending_tempo = None
    if header.span > cursor:
        tokens.append(Wait(header.span - cursor))
    return tokens


def encode(song: Song, emit_measure_repeat: Optional[bool] = None) -> TokenSeq:
    """
    Encode a normalized Song.

    Raises ContractError when the Song has not been through normalize_song
    (or decode).
    """
    check_normalized(song)
    if emit_measure_repeat is None:
        emit_measure_repeat = EMIT_MEASURE_REPEAT

    tokens: List[Token] = [
        Artist(normalize_artist_name(song.artist)),
        Downtune(song.downtune),
        Tempo(song.initial_tempo),
        Start(),
    ]
    for track in song.tracks:
        tuning = track_tuning_token(track, song.downtune)
        if tuning is not None:
            tokens.append(tuning)

    for index, header in enumerate(song.measure_headers):
        if emit_measure_repeat and is_measure_repeat(song, index):
            tokens += [MeasureRepeat(), Wait(header.span)]
        else:
            tokens += _measure_tokens(song, index)
    tokens.append(End())
    logger.debug(
        f"Encoded {len(song.measure_headers)} measures of {len(song.tracks)} tracks "
        f"into {len(tokens)} tokens"
    )
    return TokenSeq(tokens)

