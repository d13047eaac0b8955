"""
Token to Song decoding.

The decoder accepts any token list. Unknown tokens, effects with nothing to
attach to and notes that collide with an earlier note on the same string are
skipped; header fields fall back to their defaults; decoding stops at the
first End or at the end of the list.
"""

import logging
from collections import Counter
from typing import Dict, Iterable, List, Optional, Tuple, Union

import attr

from ..song_model import (
    DEFAULT_ARTIST,
    DEFAULT_TEMPO,
    MAX_MEASURE_TICKS,
    Beat,
    BeatEffectKind,
    InstrumentSlot,
    Measure,
    MeasureHeader,
    Note,
    Song,
    TimeSignature,
    infer_time_signature,
    make_track,
    mark_measure_repeats,
    rest_measure,
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
    Tempo,
    Token,
    TrackTuning,
    Unknown,
    Wait,
    as_tokens,
)

logger = logging.getLogger(__name__)

EventKey = Tuple[InstrumentSlot, int]


@attr.s(slots=True)
class _Event:
    """Notes and beat effects one slot starts at one tick."""

    notes = attr.ib(factory=dict)
    effects = attr.ib(factory=set)

    def copy(self) -> "_Event":
        return _Event(dict(self.notes), set(self.effects))


@attr.s(slots=True)
class _MeasureDraft:
    events = attr.ib(factory=dict)
    total = attr.ib(default=0)
    tempo_change = attr.ib(default=None)


class _Decoder:
    def __init__(self):
        self.artist: Optional[str] = None
        self.downtune: Optional[int] = None
        self.tempo: Optional[int] = None
        self.tunings: Dict[InstrumentSlot, TrackTuning] = {}
        self.drafts: List[_MeasureDraft] = []
        self.current: Optional[_MeasureDraft] = None
        self.cursor = 0
        self.last_note: Optional[Tuple[EventKey, int]] = None
        self.last_event: Optional[EventKey] = None
        self.dropped: Counter = Counter()

    def open_measure(self, events: Optional[dict] = None) -> None:
        self.current = _MeasureDraft(events=events or {})
        self.drafts.append(self.current)
        self.cursor = 0
        self.last_note = None
        self.last_event = None

    def ensure_measure(self) -> _MeasureDraft:
        if self.current is None:
            self.open_measure()
        return self.current

    def event_at(self, slot: InstrumentSlot) -> _Event:
        key = (slot, self.cursor)
        events = self.ensure_measure().events
        if key not in events:
            events[key] = _Event()
        self.last_event = key
        return events[key]

    def add_note(self, slot: InstrumentSlot, note: Note) -> None:
        event = self.event_at(slot)
        if note.position in event.notes:
            self.dropped["duplicate note"] += 1
            self.last_note = None
            return
        event.notes[note.position] = note
        self.last_note = (self.last_event, note.position)

    def repeat_measure(self) -> None:
        previous = self.drafts[-1].events if self.drafts else {}
        self.open_measure({key: event.copy() for key, event in previous.items()})

    def feed(self, token: Token) -> bool:
        """Consume one token; False once decoding is over."""
        if isinstance(token, End):
            return False
        if isinstance(token, Unknown):
            self.dropped["unknown token"] += 1
        elif isinstance(token, Artist):
            self.artist = self.artist if self.artist is not None else token.name
        elif isinstance(token, Downtune):
            self.downtune = (
                self.downtune if self.downtune is not None else token.semitones
            )
        elif isinstance(token, Tempo):
            self.tempo = self.tempo if self.tempo is not None else token.bpm
        elif isinstance(token, TrackTuning):
            self.tunings.setdefault(token.slot, token)
        elif isinstance(token, NewMeasure):
            self.open_measure()
        elif isinstance(token, MeasureRepeat):
            self.repeat_measure()
        elif isinstance(token, Wait):
            self.ensure_measure().total += token.ticks
            self.cursor += token.ticks
        elif isinstance(token, NoteOn):
            if token.slot is InstrumentSlot.DRUMS:
                self.dropped["pitched drum note"] += 1
            else:
                self.add_note(token.slot, Note.pitched(token.string, token.fret))
        elif isinstance(token, DrumHit):
            self.add_note(InstrumentSlot.DRUMS, Note.percussion(token.percussion_midi))
        elif isinstance(token, Rest):
            self.event_at(token.slot)
            self.last_note = None
        elif isinstance(token, Nfx):
            self.apply_note_effect(token)
        elif isinstance(token, Bfx):
            self.apply_beat_effect(token)
        return True

    def apply_note_effect(self, token: Nfx) -> None:
        if self.last_note is None:
            self.dropped["orphan note effect"] += 1
            return
        key, position = self.last_note
        notes = self.current.events[key].notes
        notes[position] = notes[position].with_effect(token.effect)

    def apply_beat_effect(self, token: Bfx) -> None:
        if token.kind is BeatEffectKind.TEMPO_CHANGE:
            if self.current is None:
                self.dropped["orphan beat effect"] += 1
            elif self.current.tempo_change is None:
                self.current.tempo_change = token.params[0]
            return
        if self.last_event is None:
            self.dropped["orphan beat effect"] += 1
            return
        self.current.events[self.last_event].effects.add(token.effect)

    # --- Song assembly --------------------------------------------------------

    def headers(self) -> List[MeasureHeader]:
        headers: List[MeasureHeader] = []
        previous = TimeSignature(4, 4)
        for index, draft in enumerate(self.drafts):
            total = draft.total
            if total > MAX_MEASURE_TICKS:
                self.dropped["clamped measure"] += 1
                total = MAX_MEASURE_TICKS
            if total == 0:
                signature = previous
            else:
                signature, rounded = infer_time_signature(total)
                if rounded:
                    self.dropped["rounded measure"] += 1
            headers.append(MeasureHeader(index, signature, False, draft.tempo_change))
            previous = signature
        return headers

    def slots(self) -> List[InstrumentSlot]:
        used = set(self.tunings)
        for draft in self.drafts:
            used.update(slot for slot, _tick in draft.events)
        return sorted(used, key=lambda slot: slot.order)

    def build_measure(
        self, draft: _MeasureDraft, slot: InstrumentSlot, span: int, strings: int
    ) -> Measure:
        ticks = sorted(
            tick for (event_slot, tick) in draft.events if event_slot is slot
        )
        late = [tick for tick in ticks if tick >= span]
        if late:
            self.dropped["event past measure end"] += len(late)
            ticks = ticks[: len(ticks) - len(late)]
        if not ticks:
            return rest_measure(span)

        beats: List[Beat] = []
        if ticks[0] > 0:
            beats.append(Beat(0, ticks[0]))
        for position, tick in enumerate(ticks):
            end = ticks[position + 1] if position + 1 < len(ticks) else span
            event = draft.events[(slot, tick)]
            notes = [
                note
                for note in event.notes.values()
                if note.is_percussion or note.string <= strings
            ]
            if len(notes) < len(event.notes):
                self.dropped["string outside layout"] += len(event.notes) - len(notes)
            beats.append(Beat(tick, end - tick, notes, event.effects))
        return Measure(tuple(beats))

    def song(self) -> Song:
        downtune = self.downtune if self.downtune is not None else 0
        headers = self.headers()
        tracks = []
        for slot in self.slots():
            tuning = self.tunings.get(slot)
            template = make_track(
                slot,
                string_count=tuning.string_count if tuning else None,
                downtune=downtune,
                drop=tuning.drop if tuning else False,
            )
            measures = [
                self.build_measure(draft, slot, header.span, template.string_count)
                for draft, header in zip(self.drafts, headers)
            ]
            tracks.append(attr.evolve(template, measures=tuple(measures)))

        if self.dropped:
            summary = ", ".join(f"{k}={v}" for k, v in sorted(self.dropped.items()))
            logger.debug(f"Decoder skipped: {summary}")
        song = Song(
            artist=self.artist if self.artist is not None else DEFAULT_ARTIST,
            initial_tempo=self.tempo if self.tempo is not None else DEFAULT_TEMPO,
            downtune=downtune,
            tracks=tuple(tracks),
            measure_headers=tuple(headers),
        )
        return mark_measure_repeats(song)


def decode(tokens: Iterable[Union[Token, str]]) -> Song:
    """
    Build a Song from any token list.

    A note lasts until the next event of its slot or the end of its measure.
    Waits advance the clock and their per-measure sum fixes the measure's
    time signature; a measure without waits keeps the previous one's.
    """
    decoder = _Decoder()
    for token in as_tokens(tokens):
        if not decoder.feed(token):
            break
    return decoder.song()
