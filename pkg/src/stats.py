"""
Corpus Statistics and Vocabulary

Histograms over a corpus of token files (or GP5 files, which are encoded
first), corpus totals, and the vocabulary of unique token spellings.
"""

import json
import logging
from collections import Counter
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import attr
import pandas as pd

from .gp5_io import Gp5Error, read_gp5
from .song_model import ScoreError, Song, normalize_song
from .tokenizer import (
    TokenSeq,
    Unknown,
    decode,
    encode,
    read_tokens,
    token_seconds,
    token_text,
)

logger = logging.getLogger(__name__)

TEMPO_BIN_WIDTH = 10
DEFAULT_TOP_N = 50

GP5_SUFFIXES = (".gp5",)

_BASE_DURATIONS = (
    (3840, "whole"),
    (1920, "half"),
    (960, "quarter"),
    (480, "eighth"),
    (240, "sixteenth"),
    (120, "thirty-second"),
    (60, "sixty-fourth"),
)
DURATION_LABELS: Dict[int, str] = {}
for _ticks, _name in _BASE_DURATIONS:
    DURATION_LABELS[_ticks] = _name
    DURATION_LABELS[_ticks * 3 // 2] = f"dotted {_name}"
    DURATION_LABELS[_ticks * 2 // 3] = f"triplet {_name}"

HISTOGRAMS = (
    "tracks_per_song",
    "initial_tempo",
    "note_duration",
    "time_signature",
    "note_effect",
    "tempo_changes_per_song",
    "token_frequency",
    "instrument_slot",
)

PathLike = Union[str, Path]


def duration_label(ticks: int) -> str:
    """Staff-notation name of a tick duration (960 is a quarter)."""
    return DURATION_LABELS.get(ticks, f"{ticks} ticks")


def tempo_bin(bpm: int) -> int:
    return bpm // TEMPO_BIN_WIDTH * TEMPO_BIN_WIDTH


@attr.s(slots=True)
class StatsReport:
    songs = attr.ib(default=0)
    tokens = attr.ib(default=0)
    unknown_tokens = attr.ib(default=0)
    notes = attr.ib(default=0)
    seconds = attr.ib(default=Fraction(0))
    tracks_per_song = attr.ib(factory=Counter)
    initial_tempo = attr.ib(factory=Counter)
    note_duration = attr.ib(factory=Counter)
    time_signature = attr.ib(factory=Counter)
    note_effect = attr.ib(factory=Counter)
    tempo_changes_per_song = attr.ib(factory=Counter)
    token_frequency = attr.ib(factory=Counter)
    instrument_slot = attr.ib(factory=Counter)
    skipped = attr.ib(factory=list)

    def merge(self, other: "StatsReport") -> "StatsReport":
        """Sum of two reports over disjoint corpora."""
        merged = StatsReport(
            songs=self.songs + other.songs,
            tokens=self.tokens + other.tokens,
            unknown_tokens=self.unknown_tokens + other.unknown_tokens,
            notes=self.notes + other.notes,
            seconds=self.seconds + other.seconds,
            skipped=self.skipped + other.skipped,
        )
        for name in HISTOGRAMS:
            setattr(merged, name, getattr(self, name) + getattr(other, name))
        return merged

    def histogram(self, name: str, top_n: Optional[int] = None) -> List[Tuple]:
        """(value, count) rows, sorted by value, or by count for token_frequency."""
        counts: Counter = getattr(self, name)
        if name == "token_frequency":
            rows = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
            return rows[:top_n] if top_n else rows
        return sorted(counts.items(), key=lambda item: _sort_value(item[0]))

    def to_dict(self, top_n: Optional[int] = DEFAULT_TOP_N) -> Dict:
        histograms = {
            name: {str(value): count for value, count in self.histogram(name, top_n)}
            for name in HISTOGRAMS
        }
        histograms["note_duration_labels"] = {
            str(ticks): duration_label(ticks) for ticks in sorted(self.note_duration)
        }
        return {
            "totals": {
                "songs": self.songs,
                "tokens": self.tokens,
                "unknown_tokens": self.unknown_tokens,
                "notes": self.notes,
                "seconds": float(self.seconds),
            },
            "histograms": histograms,
            "skipped": [{"file": f, "reason": r} for f, r in self.skipped],
        }

    def write_json(self, path: PathLike, top_n: Optional[int] = DEFAULT_TOP_N):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(top_n), f, indent=2, sort_keys=True)
            f.write("\n")

    def write_csv(
        self, out_dir: PathLike, top_n: Optional[int] = DEFAULT_TOP_N
    ) -> List[Path]:
        """One CSV per histogram; note durations carry their staff label."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for name in HISTOGRAMS:
            rows = self.histogram(name, top_n)
            frame = pd.DataFrame(rows, columns=["value", "count"])
            if name == "note_duration":
                frame.insert(1, "label", [duration_label(v) for v in frame["value"]])
            path = out_dir / f"{name}.csv"
            frame.to_csv(path, index=False)
            written.append(path)
        logger.debug(f"Wrote {len(written)} histogram CSV files to {out_dir}")
        return written


def _sort_value(value):
    if isinstance(value, str) and "/" in value:
        numerator, denominator = value.split("/")
        return (0, int(denominator), int(numerator), "")
    if isinstance(value, int):
        return (0, value, 0, "")
    return (1, 0, 0, str(value))


def load_corpus_file(path: PathLike) -> Tuple[TokenSeq, Optional[Song]]:
    """
    Tokens of one corpus file. GP5 files are normalized and encoded and their
    Song is returned alongside; token files come back without a Song.
    """
    path = Path(path)
    if path.suffix.lower() in GP5_SUFFIXES:
        song = normalize_song(read_gp5(path.read_bytes()))
        return encode(song), song
    return read_tokens(path), None


def song_stats(tokens: TokenSeq, song: Optional[Song] = None) -> StatsReport:
    """
    Statistics of one song. Musical histograms come from `song` when given,
    otherwise from the decoded tokens.
    """
    if song is None:
        song = decode(tokens)
    report = StatsReport(songs=1, tokens=len(tokens))

    for token in tokens:
        if isinstance(token, Unknown):
            report.unknown_tokens += 1
        else:
            report.token_frequency[token_text(token)] += 1
    report.seconds = token_seconds(tokens)

    report.tracks_per_song[len(song.tracks)] += 1
    report.initial_tempo[tempo_bin(song.initial_tempo)] += 1
    changes = sum(1 for h in song.measure_headers if h.tempo_change is not None)
    report.tempo_changes_per_song[changes] += 1
    for header in song.measure_headers:
        report.time_signature[str(header.time_signature)] += 1
    for track in song.tracks:
        report.instrument_slot[track.slot.value] += 1
        for measure in track.measures:
            for beat in measure.beats:
                for note in beat.notes:
                    report.notes += 1
                    report.note_duration[beat.duration] += 1
                    for effect in note.effects:
                        report.note_effect[effect.kind.value] += 1
    return report


def file_order(path: Path) -> Tuple[str, str]:
    """Sort key for corpus files: file name first, full path to break ties."""
    return (path.name, str(path))


def corpus_stats(paths: Iterable[PathLike]) -> StatsReport:
    """Aggregate statistics over a corpus; unreadable files are skipped."""
    report = StatsReport()
    for path in sorted((Path(p) for p in paths), key=file_order):
        try:
            tokens, song = load_corpus_file(path)
        except (OSError, UnicodeDecodeError, Gp5Error, ScoreError) as e:
            logger.warning(f"Skipping {path}: {e}")
            report.skipped.append((str(path), str(e)))
            continue
        report = report.merge(song_stats(tokens, song))
    logger.info(f"Corpus statistics over {report.songs} songs, {report.tokens} tokens")
    return report


@attr.s(frozen=True, slots=True)
class Vocab:
    """Unique token spellings in first-occurrence order."""

    words = attr.ib(factory=tuple, converter=tuple)

    @property
    def size(self) -> int:
        return len(self.words)

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.words

    def write(self, path: PathLike) -> None:
        body = "".join(f"{word}\n" for word in self.words)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(body)


def vocab_of(streams: Iterable[TokenSeq]) -> Vocab:
    """First-occurrence vocabulary of token streams taken in the given order."""
    seen: Dict[str, None] = {}
    for tokens in streams:
        for token in tokens:
            if not isinstance(token, Unknown):
                seen.setdefault(token_text(token), None)
    return Vocab(seen)


def build_vocab(paths: Iterable[PathLike]) -> Vocab:
    """
    Vocabulary of a corpus, files taken in sorted-name order. Unknown tokens
    and unreadable files are left out.
    """
    streams = []
    for path in sorted((Path(p) for p in paths), key=file_order):
        try:
            streams.append(load_corpus_file(path)[0])
        except (OSError, UnicodeDecodeError, Gp5Error, ScoreError) as e:
            logger.warning(f"Skipping {path}: {e}")
    vocab = vocab_of(streams)
    logger.info(f"Vocabulary of {vocab.size} tokens")
    return vocab
