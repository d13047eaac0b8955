"""
Token Types and Lexer

One token per whitespace-free word; fields are colon-separated. Integers
are lexed strictly (no leading zeros, no '+') so that rendering a parsed
token gives back the same text.
"""

import logging
import re
import unicodedata
from pathlib import Path
from typing import Callable, Iterable, Iterator, List, Optional, Tuple, Union

import attr

from ..song_model import (
    DEFAULT_ARTIST,
    HARMONIC_ARTIFICIAL,
    HARMONIC_NAMES,
    HARMONIC_TAPPED,
    MAX_FRET,
    MAX_PERCUSSION_MIDI,
    MAX_STRINGS,
    MIN_DOWNTUNE,
    MIN_PERCUSSION_MIDI,
    SLIDE_NAMES,
    BeatEffect,
    BeatEffectKind,
    ContractError,
    InstrumentSlot,
    NoteEffect,
    NoteEffectKind,
    supported_string_counts,
)

logger = logging.getLogger(__name__)

_INT = re.compile(r"-?(0|[1-9][0-9]*)")


# --- Token variants ---------------------------------------------------------


@attr.s(frozen=True, slots=True)
class Artist:
    name = attr.ib(type=str)


@attr.s(frozen=True, slots=True)
class Downtune:
    semitones = attr.ib(type=int)


@attr.s(frozen=True, slots=True)
class Tempo:
    bpm = attr.ib(type=int)


@attr.s(frozen=True, slots=True)
class Start:
    pass


@attr.s(frozen=True, slots=True)
class End:
    pass


@attr.s(frozen=True, slots=True)
class NewMeasure:
    pass


@attr.s(frozen=True, slots=True)
class MeasureRepeat:
    pass


def _positive(instance, attribute, value) -> None:
    if value <= 0:
        raise ContractError(f"{attribute.name} must be positive, got {value}")


@attr.s(frozen=True, slots=True)
class Wait:
    ticks = attr.ib(type=int, validator=_positive)


@attr.s(frozen=True, slots=True)
class TrackTuning:
    """Non-default string layout of a pitched slot (extra strings, drop)."""

    slot = attr.ib(type=InstrumentSlot)
    string_count = attr.ib(type=int)
    drop = attr.ib(default=False)


@attr.s(frozen=True, slots=True)
class NoteOn:
    slot = attr.ib(type=InstrumentSlot)
    string = attr.ib(type=int)
    fret = attr.ib(type=int)


@attr.s(frozen=True, slots=True)
class DrumHit:
    percussion_midi = attr.ib(type=int)


@attr.s(frozen=True, slots=True)
class Rest:
    slot = attr.ib(type=InstrumentSlot)


@attr.s(frozen=True, slots=True)
class Nfx:
    effect = attr.ib(type=NoteEffect)

    @property
    def kind(self) -> NoteEffectKind:
        return self.effect.kind

    @property
    def params(self) -> Tuple[int, ...]:
        return self.effect.params


@attr.s(frozen=True, slots=True)
class Bfx:
    effect = attr.ib(type=BeatEffect)

    @property
    def kind(self) -> BeatEffectKind:
        return self.effect.kind

    @property
    def params(self) -> Tuple[int, ...]:
        return self.effect.params


@attr.s(frozen=True, slots=True)
class Unknown:
    raw = attr.ib(type=str)


Token = Union[
    Artist,
    Downtune,
    Tempo,
    Start,
    End,
    NewMeasure,
    MeasureRepeat,
    Wait,
    TrackTuning,
    NoteOn,
    DrumHit,
    Rest,
    Nfx,
    Bfx,
    Unknown,
]

HEADER_TYPES = (Artist, Downtune, Tempo, Start)
SINGLETON_TYPES = (Artist, Downtune, Tempo, Start, End)
SINGLETON_NAMES = {
    Artist: "artist",
    Downtune: "downtune",
    Tempo: "tempo",
    Start: "start",
    End: "end",
}
PITCHED_SLOTS = tuple(s for s in InstrumentSlot if s is not InstrumentSlot.DRUMS)
_SLOTS_BY_NAME = {slot.value: slot for slot in InstrumentSlot}
_NOTE_KINDS = {kind.value: kind for kind in NoteEffectKind}
_BEAT_KINDS = {kind.value: kind for kind in BeatEffectKind}
_SLIDE_CODES = {name: code for code, name in SLIDE_NAMES.items()}
_HARMONIC_CODES = {name: code for code, name in HARMONIC_NAMES.items()}


def singleton_name(token: Token) -> Optional[str]:
    return SINGLETON_NAMES.get(type(token))


def normalize_artist_name(name: str) -> str:
    """Lowercase ASCII artist spelling with whitespace runs as underscores."""
    ascii_name = (
        unicodedata.normalize("NFKD", name or "").encode("ascii", "ignore").decode()
    )
    words = ascii_name.lower().split()
    return "_".join(words) or DEFAULT_ARTIST


# --- Parsing ------------------------------------------------------------------


def _int(text: str) -> Optional[int]:
    if text is None or not _INT.fullmatch(text) or text == "-0":
        return None
    return int(text)


def _prefixed(field: str, prefix: str) -> Optional[int]:
    if not field.startswith(prefix):
        return None
    return _int(field[len(prefix) :])


def _fields(parts: List[str], prefixes: Tuple[str, ...]) -> Optional[Tuple[int, ...]]:
    if len(parts) != len(prefixes):
        return None
    values = tuple(_prefixed(part, prefix) for part, prefix in zip(parts, prefixes))
    return None if None in values else values


def _bend_params(parts: List[str]) -> Optional[Tuple[int, ...]]:
    if len(parts) < 4 or (len(parts) - 1) % 3:
        return None
    head = _prefixed(parts[0], "type")
    if head is None:
        return None
    params = [head]
    for i in range(1, len(parts), 3):
        point = _fields(parts[i : i + 3], ("pos", "val", "vib"))
        if point is None:
            return None
        params.extend(point)
    return tuple(params)


def _harmonic_params(parts: List[str]) -> Optional[Tuple[int, ...]]:
    if not parts or parts[0] not in _HARMONIC_CODES:
        return None
    code = _HARMONIC_CODES[parts[0]]
    if code == HARMONIC_TAPPED:
        extra = _fields(parts[1:], ("f",))
    elif code == HARMONIC_ARTIFICIAL:
        extra = _fields(parts[1:], ("s", "a", "o"))
    else:
        extra = () if len(parts) == 1 else None
    return None if extra is None else (code,) + extra


def _note_effect_params(
    kind: NoteEffectKind, parts: List[str]
) -> Optional[Tuple[int, ...]]:
    if kind is NoteEffectKind.BEND:
        return _bend_params(parts)
    if kind is NoteEffectKind.SLIDE:
        if len(parts) == 1 and parts[0] in _SLIDE_CODES:
            return (_SLIDE_CODES[parts[0]],)
        return None
    if kind is NoteEffectKind.HARMONIC:
        return _harmonic_params(parts)
    if kind is NoteEffectKind.TRILL:
        return _fields(parts, ("f", "d"))
    if kind is NoteEffectKind.GRACE:
        return _fields(parts, ("f", "t", "d", "dead", "beat"))
    if kind is NoteEffectKind.TREMOLO_PICKING:
        return _fields(parts, ("d",))
    return () if not parts else None


def _beat_effect_params(
    kind: BeatEffectKind, parts: List[str]
) -> Optional[Tuple[int, ...]]:
    if kind is BeatEffectKind.TEMPO_CHANGE:
        value = _int(parts[0]) if len(parts) == 1 else None
        return None if value is None else (value,)
    if kind in (BeatEffectKind.DOWNSTROKE, BeatEffectKind.UPSTROKE):
        return _fields(parts, ("d",))
    if kind is BeatEffectKind.TREMOLO_BAR:
        return _bend_params(parts)
    return () if not parts else None


def _parse_effect(parts: List[str]) -> Optional[Token]:
    table, make, params_of = (
        (_NOTE_KINDS, NoteEffect, _note_effect_params)
        if parts[0] == "nfx"
        else (_BEAT_KINDS, BeatEffect, _beat_effect_params)
    )
    if len(parts) < 2 or parts[1] not in table:
        return None
    kind = table[parts[1]]
    params = params_of(kind, parts[2:])
    if params is None:
        return None
    effect = make(kind, params)
    if not effect.is_valid:
        return None
    return Nfx(effect) if parts[0] == "nfx" else Bfx(effect)


def _parse_slot_token(slot: InstrumentSlot, parts: List[str]) -> Optional[Token]:
    if parts[0] == "note":
        if parts[1:] == ["rest"]:
            return Rest(slot)
        if slot is InstrumentSlot.DRUMS:
            midi = _int(parts[1]) if len(parts) == 2 else None
            if midi is not None and MIN_PERCUSSION_MIDI <= midi <= MAX_PERCUSSION_MIDI:
                return DrumHit(midi)
            return None
        position = _fields(parts[1:], ("s", "f"))
        if position is None:
            return None
        string, fret = position
        if 1 <= string <= MAX_STRINGS and 0 <= fret <= MAX_FRET:
            return NoteOn(slot, string, fret)
        return None
    if parts[0] == "tuning" and slot is not InstrumentSlot.DRUMS:
        if len(parts) not in (2, 3) or (len(parts) == 3 and parts[2] != "drop"):
            return None
        count = _prefixed(parts[1], "s")
        if count in supported_string_counts(slot.family):
            return TrackTuning(slot, count, len(parts) == 3)
    return None


def _parse_known(text: str) -> Optional[Token]:
    if text == "start":
        return Start()
    if text == "end":
        return End()
    if text == "new_measure":
        return NewMeasure()
    if text == "measure:repeat":
        return MeasureRepeat()

    head, _, rest = text.partition(":")
    if head == "artist":
        return Artist(rest) if rest else None
    if head == "downtune":
        value = _int(rest)
        if value is None or not MIN_DOWNTUNE <= value <= 0:
            return None
        return Downtune(value)
    if head in ("tempo", "wait"):
        value = _int(rest)
        if value is None or value <= 0:
            return None
        return Tempo(value) if head == "tempo" else Wait(value)

    parts = text.split(":")
    if head in ("nfx", "bfx"):
        return _parse_effect(parts)
    if head in _SLOTS_BY_NAME and len(parts) >= 2:
        return _parse_slot_token(_SLOTS_BY_NAME[head], parts[1:])
    return None


def parse_token(text: str) -> Token:
    """Lex one word. Anything unrecognized comes back as Unknown, never an error."""
    if not text or any(ch.isspace() for ch in text):
        return Unknown(text)
    token = _parse_known(text)
    return token if token is not None else Unknown(text)


# --- Rendering ----------------------------------------------------------------


def _render_bend(params: Tuple[int, ...]) -> str:
    fields = [f"type{params[0]}"]
    for i in range(1, len(params), 3):
        position, value, vibrato = params[i : i + 3]
        fields += [f"pos{position}", f"val{value}", f"vib{vibrato}"]
    return ":".join(fields)


def _render_note_effect(effect: NoteEffect) -> str:
    kind, params = effect.kind, effect.params
    name = f"nfx:{kind.value}"
    if kind is NoteEffectKind.BEND:
        return f"{name}:{_render_bend(params)}"
    if kind is NoteEffectKind.SLIDE:
        return f"{name}:{SLIDE_NAMES[params[0]]}"
    if kind is NoteEffectKind.HARMONIC:
        text = f"{name}:{HARMONIC_NAMES[params[0]]}"
        if params[0] == HARMONIC_TAPPED:
            text += f":f{params[1]}"
        elif params[0] == HARMONIC_ARTIFICIAL:
            text += f":s{params[1]}:a{params[2]}:o{params[3]}"
        return text
    if kind is NoteEffectKind.TRILL:
        return f"{name}:f{params[0]}:d{params[1]}"
    if kind is NoteEffectKind.GRACE:
        fret, transition, ticks, dead, on_beat = params
        return f"{name}:f{fret}:t{transition}:d{ticks}:dead{dead}:beat{on_beat}"
    if kind is NoteEffectKind.TREMOLO_PICKING:
        return f"{name}:d{params[0]}"
    return name


def _render_beat_effect(effect: BeatEffect) -> str:
    kind, params = effect.kind, effect.params
    name = f"bfx:{kind.value}"
    if kind is BeatEffectKind.TEMPO_CHANGE:
        return f"{name}:{params[0]}"
    if kind in (BeatEffectKind.DOWNSTROKE, BeatEffectKind.UPSTROKE):
        return f"{name}:d{params[0]}"
    if kind is BeatEffectKind.TREMOLO_BAR:
        return f"{name}:{_render_bend(params)}"
    return name


_RENDERERS: dict = {
    Artist: lambda t: f"artist:{t.name}",
    Downtune: lambda t: f"downtune:{t.semitones}",
    Tempo: lambda t: f"tempo:{t.bpm}",
    Start: lambda t: "start",
    End: lambda t: "end",
    NewMeasure: lambda t: "new_measure",
    MeasureRepeat: lambda t: "measure:repeat",
    Wait: lambda t: f"wait:{t.ticks}",
    TrackTuning: lambda t: (
        f"{t.slot.value}:tuning:s{t.string_count}" + (":drop" if t.drop else "")
    ),
    NoteOn: lambda t: f"{t.slot.value}:note:s{t.string}:f{t.fret}",
    DrumHit: lambda t: f"drums:note:{t.percussion_midi}",
    Rest: lambda t: f"{t.slot.value}:note:rest",
    Nfx: lambda t: _render_note_effect(t.effect),
    Bfx: lambda t: _render_beat_effect(t.effect),
}


def render_token(token: Token) -> str:
    """Spell a token; parse_token(render_token(t)) == t."""
    renderer: Optional[Callable] = _RENDERERS.get(type(token))
    if renderer is None:
        raise ContractError(f"cannot render {token!r}")
    return renderer(token)


def token_text(token: Token) -> str:
    """Spelling of any token, the raw text for Unknown ones."""
    if isinstance(token, Unknown):
        return token.raw
    return render_token(token)


# --- Sequences ------------------------------------------------------------------


@attr.s(frozen=True, slots=True)
class TokenSeq:
    """An ordered token list."""

    tokens = attr.ib(factory=tuple, converter=tuple)

    def __iter__(self) -> Iterator[Token]:
        return iter(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __getitem__(self, index):
        return self.tokens[index]

    @property
    def canonical(self) -> bool:
        return is_canonical(self.tokens)

    def words(self) -> List[str]:
        return [token_text(token) for token in self.tokens]

    @classmethod
    def from_words(cls, words: Iterable[str]) -> "TokenSeq":
        return cls(parse_token(word) for word in words)


def as_tokens(items: Iterable[Union[Token, str]]) -> List[Token]:
    """Accept tokens or their spellings."""
    return [parse_token(item) if isinstance(item, str) else item for item in items]


def is_canonical(tokens: Iterable[Token]) -> bool:
    """
    Header-first, exactly one trailing End, no adjacent Waits, no Unknown
    tokens and no repeated singleton.
    """
    tokens = list(tokens)
    if len(tokens) < 5:
        return False
    if [type(t) for t in tokens[:4]] != list(HEADER_TYPES) or tokens[-1] != End():
        return False
    seen = set()
    for index, token in enumerate(tokens):
        if isinstance(token, Unknown):
            return False
        name = singleton_name(token)
        if name is not None:
            if name in seen:
                return False
            seen.add(name)
        if index and isinstance(token, Wait) and isinstance(tokens[index - 1], Wait):
            return False
    return True


def read_tokens(path: Union[str, Path]) -> TokenSeq:
    """Read a token file: UTF-8, one token per line, blank lines ignored."""
    text = Path(path).read_text(encoding="utf-8")
    words = (line.strip() for line in text.splitlines())
    return TokenSeq.from_words(word for word in words if word)


def write_tokens(path: Union[str, Path], tokens: Iterable[Token]) -> None:
    lines = [token_text(token) for token in tokens]
    body = "\n".join(lines) + "\n" if lines else ""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(body)
