"""
Grammar Checks for Token Streams

Counts the two grammar error classes of generated streams (a repeated
singleton token, or the same token twice in a row) and repairs streams so
that they count zero errors and decode cleanly.
"""

import logging
from collections import Counter
from typing import Dict, Iterable, List, Optional, Tuple, Union

import attr

from .song_model import DEFAULT_ARTIST, DEFAULT_TEMPO
from .tokenizer.tokens import (
    HEADER_TYPES,
    SINGLETON_NAMES,
    Artist,
    Downtune,
    End,
    Start,
    Tempo,
    Token,
    TokenSeq,
    Wait,
    as_tokens,
    singleton_name,
    token_text,
)

logger = logging.getLogger(__name__)

DUPLICATE_SINGLETON = "duplicate_singleton"
ADJACENT_REPEAT = "adjacent_repeat"

HEADER_DEFAULTS = {
    Artist: Artist(DEFAULT_ARTIST),
    Downtune: Downtune(0),
    Tempo: Tempo(DEFAULT_TEMPO),
    Start: Start(),
}
HEADER_RANK = {kind: rank for rank, kind in enumerate(HEADER_TYPES)}


def _empty_singleton_counts() -> Dict[str, int]:
    return {name: 0 for name in SINGLETON_NAMES.values()}


@attr.s(frozen=True, slots=True)
class ErrorReport:
    """Grammar error counts of one stream, or of a batch after merge_reports."""

    duplicate_singletons = attr.ib(factory=_empty_singleton_counts)
    adjacent_repeats = attr.ib(default=0)
    positions = attr.ib(factory=tuple, converter=tuple)
    streams = attr.ib(default=1)

    @property
    def total_errors(self) -> int:
        return sum(self.duplicate_singletons.values()) + self.adjacent_repeats

    @property
    def is_clean(self) -> bool:
        return self.total_errors == 0


def count_errors(tokens: Iterable[Union[Token, str]]) -> ErrorReport:
    """
    Count grammar errors.

    Every occurrence of a singleton kind after its first is one error, and a
    run of n identical adjacent tokens is n - 1 errors. A position already
    counted as a duplicate singleton is not counted again as a repeat.
    """
    tokens = as_tokens(tokens)
    duplicates = _empty_singleton_counts()
    seen = set()
    adjacent = 0
    positions: List[Tuple[int, str]] = []
    for index, token in enumerate(tokens):
        name = singleton_name(token)
        if name is not None:
            if name in seen:
                duplicates[name] += 1
                positions.append((index, DUPLICATE_SINGLETON))
                continue
            seen.add(name)
        if index and token == tokens[index - 1]:
            adjacent += 1
            positions.append((index, ADJACENT_REPEAT))
    return ErrorReport(duplicates, adjacent, positions)


def _insert_missing_headers(tokens: List[Token]) -> List[Token]:
    present = {type(token) for token in tokens}
    missing = [kind for kind in HEADER_TYPES if kind not in present]
    if not missing:
        return tokens

    run = 0
    while run < len(tokens) and type(tokens[run]) in HEADER_RANK:
        run += 1
    header, body = tokens[:run], tokens[run:]
    for kind in missing:
        rank = HEADER_RANK[kind]
        at = next(
            (i for i, token in enumerate(header) if HEADER_RANK[type(token)] > rank),
            len(header),
        )
        header.insert(at, HEADER_DEFAULTS[kind])
    logger.debug(f"Inserted default header tokens: {[k.__name__ for k in missing]}")
    return header + body


def sanitize(tokens: Iterable[Union[Token, str]]) -> TokenSeq:
    """
    Repair a stream so count_errors reports zero and it ends with one End.

    Repeated singletons and interior End tokens are dropped, adjacent Waits
    merge into one Wait of their summed length, other adjacent repeats keep
    their first token, and missing header tokens are added with defaults.
    Surviving tokens keep their order.
    """
    kept: List[Token] = []
    seen = set()
    for token in as_tokens(tokens):
        if isinstance(token, End):
            continue
        name = singleton_name(token)
        if name is not None:
            if name in seen:
                continue
            seen.add(name)
        if kept and isinstance(token, Wait) and isinstance(kept[-1], Wait):
            kept[-1] = Wait(kept[-1].ticks + token.ticks)
            continue
        if kept and token == kept[-1]:
            continue
        kept.append(token)
    kept = _insert_missing_headers(kept)
    kept.append(End())
    return TokenSeq(kept)


def merge_reports(reports: Iterable[ErrorReport]) -> ErrorReport:
    """Sum the counts of many reports. Positions are per stream and dropped."""
    duplicates: Counter = Counter(_empty_singleton_counts())
    adjacent = 0
    streams = 0
    for report in reports:
        duplicates.update(report.duplicate_singletons)
        adjacent += report.adjacent_repeats
        streams += report.streams
    return ErrorReport(dict(duplicates), adjacent, (), streams)


def report_to_dict(report: ErrorReport) -> Dict:
    return {
        "streams": report.streams,
        "total_errors": report.total_errors,
        "duplicate_singletons": dict(report.duplicate_singletons),
        "adjacent_repeats": report.adjacent_repeats,
        "positions": [
            {"index": index, "error": error} for index, error in report.positions
        ],
    }


def format_report(
    report: ErrorReport, tokens: Optional[Iterable[Union[Token, str]]] = None
) -> str:
    """Line-oriented summary; with the stream given, offending tokens are shown."""
    words = None
    if tokens is not None:
        words = [token_text(token) for token in as_tokens(tokens)]
    lines = [
        f"streams={report.streams}",
        f"total_errors={report.total_errors}",
        f"adjacent_repeats={report.adjacent_repeats}",
    ]
    lines += [
        f"duplicate_{name}={count}"
        for name, count in report.duplicate_singletons.items()
    ]
    for index, error in report.positions:
        suffix = f" token={words[index]}" if words is not None else ""
        lines.append(f"error index={index} class={error}{suffix}")
    return "\n".join(lines) + "\n"
