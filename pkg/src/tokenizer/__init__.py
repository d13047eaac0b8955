"""Event-token encoding of Songs: lexing, encoding and decoding."""

from .decoder import decode
from .encoder import encode
from .timing import (
    compare_songs,
    song_seconds,
    sounding_notes,
    tempo_map,
    ticks_to_seconds,
    token_seconds,
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
    Unknown,
    Wait,
    as_tokens,
    is_canonical,
    normalize_artist_name,
    parse_token,
    read_tokens,
    render_token,
    token_text,
    write_tokens,
)

__all__ = [
    "Artist",
    "Bfx",
    "Downtune",
    "DrumHit",
    "End",
    "MeasureRepeat",
    "NewMeasure",
    "Nfx",
    "NoteOn",
    "Rest",
    "Start",
    "Tempo",
    "Token",
    "TokenSeq",
    "TrackTuning",
    "Unknown",
    "Wait",
    "as_tokens",
    "compare_songs",
    "decode",
    "encode",
    "is_canonical",
    "normalize_artist_name",
    "parse_token",
    "read_tokens",
    "render_token",
    "song_seconds",
    "sounding_notes",
    "tempo_map",
    "ticks_to_seconds",
    "token_seconds",
    "token_text",
    "write_tokens",
]
