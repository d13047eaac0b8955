"""
TabTokens Command Line

Subcommands convert GP5 files to token files and back, check round trips,
validate token streams, and build corpus statistics, vocabularies and genre
metadata. Every file is processed in isolation so one bad file never stops
a batch.
"""

import argparse
import glob
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import attr
from dotenv import load_dotenv
from tqdm import tqdm

from . import __version__
from .gp5_io import Gp5Error, ensure_playable, read_gp5, read_gp5_document, write_gp5
from .metadata_client import GENRE_CACHE_FILE, GenreCache, get_provider, lookup_many
from .song_model import ScoreError, TuningError, normalize_song
from .stats import (
    DEFAULT_TOP_N,
    GP5_SUFFIXES,
    StatsReport,
    file_order,
    load_corpus_file,
    song_stats,
    vocab_of,
)
from .tokenizer import Artist, compare_songs, decode, encode, read_tokens, write_tokens
from .tokenizer.encoder import EMIT_MEASURE_REPEAT
from .validator import count_errors, format_report, merge_reports, report_to_dict

load_dotenv()

logger = logging.getLogger(__name__)

DEFAULT_WORKERS = int(os.getenv("TABTOKENS_WORKERS", "4"))
LOG_LEVEL = os.getenv("TABTOKENS_LOG_LEVEL", "INFO").upper()

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

STATUS_OK = "ok"
STATUS_FAILED = "failed"
STATUS_REJECTED = "rejected"

TOKEN_SUFFIX = ".tokens.txt"
TOKEN_SUFFIXES = (".txt",)
INPUT_SUFFIXES = {
    "encode": GP5_SUFFIXES,
    "roundtrip": GP5_SUFFIXES,
    "decode": TOKEN_SUFFIXES,
    "validate": TOKEN_SUFFIXES,
    "vocab": TOKEN_SUFFIXES + GP5_SUFFIXES,
    "stats": TOKEN_SUFFIXES + GP5_SUFFIXES,
    "genres": TOKEN_SUFFIXES + GP5_SUFFIXES,
}

READ_ERRORS = (OSError, UnicodeDecodeError, Gp5Error, ScoreError)


@attr.s(frozen=True, slots=True)
class RunConfig:
    command = attr.ib(type=str)
    inputs = attr.ib(converter=tuple)
    out_dir = attr.ib(default=None)
    force = attr.ib(default=False)
    quiet = attr.ib(default=False)
    workers = attr.ib(default=DEFAULT_WORKERS)
    strict = attr.ib(default=False)
    emit_measure_repeat = attr.ib(default=EMIT_MEASURE_REPEAT)
    top_n = attr.ib(default=DEFAULT_TOP_N)
    csv = attr.ib(default=False)
    offline = attr.ib(default=False)


@attr.s(frozen=True, slots=True)
class FileResult:
    """Outcome of one input file."""

    path = attr.ib(type=Path)
    status = attr.ib(default=STATUS_OK)
    output = attr.ib(default=None)
    reason = attr.ib(default="")
    payload = attr.ib(default=None, eq=False)

    @property
    def failed(self) -> bool:
        return self.status != STATUS_OK

    def log_line(self) -> str:
        fields = [f"status={self.status}", f"file={self.path}"]
        if self.output is not None:
            fields.append(f"out={self.output}")
        if self.reason:
            fields.append(f"reason={json.dumps(self.reason)}")
        return " ".join(fields)


# --- Inputs and outputs -------------------------------------------------------


def expand_inputs(patterns: Sequence[str], suffixes: Tuple[str, ...]) -> List[Path]:
    """
    Files named by the patterns, in the order given. Globs and directories
    expand to their sorted matching files; plain paths are kept even when
    missing so they are reported as failures.
    """
    found: Dict[Path, None] = {}
    for pattern in patterns:
        path = Path(pattern)
        if any(ch in pattern for ch in "*?["):
            matches = sorted(Path(p) for p in glob.glob(pattern, recursive=True))
            found.update((p, None) for p in matches if p.is_file())
        elif path.is_dir():
            matches = sorted(p for p in path.rglob("*") if p.is_file())
            found.update(
                (p, None) for p in matches if p.name.lower().endswith(suffixes)
            )
        else:
            found[path] = None
    return list(found)


def song_stem(path: Path) -> str:
    name = path.name
    for suffix in (TOKEN_SUFFIX,) + GP5_SUFFIXES + TOKEN_SUFFIXES:
        if name.lower().endswith(suffix):
            return name[: -len(suffix)]
    return path.stem


def output_path(config: RunConfig, source: Path, suffix: str) -> Path:
    directory = Path(config.out_dir) if config.out_dir else source.parent
    return directory / f"{song_stem(source)}{suffix}"


def aggregate_path(config: RunConfig, name: str) -> Path:
    return Path(config.out_dir or ".") / name


def _exists_result(source: Path, target: Path) -> FileResult:
    return FileResult(
        source, STATUS_FAILED, target, "output exists, use --force to overwrite"
    )


# --- Per-file workers ---------------------------------------------------------


def encode_file(path: Path, config: RunConfig) -> FileResult:
    target = output_path(config, path, TOKEN_SUFFIX)
    if not config.force and target.exists():
        return _exists_result(path, target)
    document = read_gp5_document(path.read_bytes())
    lossy = {name: count for name, count in document.skipped.items() if count}
    if config.strict and lossy:
        summary = ", ".join(f"{k}={v}" for k, v in sorted(lossy.items()))
        return FileResult(path, STATUS_REJECTED, reason=f"skipped features: {summary}")
    try:
        song = normalize_song(document.song)
    except TuningError as e:
        return FileResult(path, STATUS_REJECTED, reason=str(e))
    tokens = encode(song, config.emit_measure_repeat)
    target.parent.mkdir(parents=True, exist_ok=True)
    write_tokens(target, tokens)
    return FileResult(path, STATUS_OK, target, payload=len(tokens))


def decode_file(path: Path, config: RunConfig) -> FileResult:
    target = output_path(config, path, ".gp5")
    if not config.force and target.exists():
        return _exists_result(path, target)
    song = decode(read_tokens(path))
    reason = ""
    if not song.tracks or not song.measure_headers:
        reason = "no playable content, wrote an empty score"
        logger.warning(f"{path}: {reason}")
        song = ensure_playable(song)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(write_gp5(song))
    return FileResult(path, STATUS_OK, target, reason)


def roundtrip_file(path: Path, config: RunConfig) -> FileResult:
    try:
        song = normalize_song(read_gp5(path.read_bytes()))
    except TuningError as e:
        return FileResult(path, STATUS_REJECTED, reason=str(e))
    differences = compare_songs(song, decode(encode(song, config.emit_measure_repeat)))
    if differences:
        return FileResult(
            path, STATUS_FAILED, reason=differences[0], payload=differences
        )
    return FileResult(path, STATUS_OK)


def validate_file(path: Path, config: RunConfig) -> FileResult:
    tokens = read_tokens(path)
    report = count_errors(tokens)
    if config.strict and not report.is_clean:
        return FileResult(
            path,
            STATUS_REJECTED,
            reason=f"{report.total_errors} grammar errors",
            payload=report,
        )
    return FileResult(path, STATUS_OK, payload=report)


def stats_file(path: Path, config: RunConfig) -> FileResult:
    return FileResult(path, STATUS_OK, payload=song_stats(*load_corpus_file(path)))


def vocab_file(path: Path, config: RunConfig) -> FileResult:
    return FileResult(path, STATUS_OK, payload=load_corpus_file(path)[0])


def song_identity(path: Path) -> Tuple[str, str]:
    """(artist, title) of a corpus file; token files only know the artist."""
    if path.name.lower().endswith(GP5_SUFFIXES):
        song = read_gp5(path.read_bytes())
        return song.artist.strip(), song.title.strip()
    artist = next((t.name for t in read_tokens(path) if isinstance(t, Artist)), "")
    if artist == "unknown":
        artist = ""
    return artist.replace("_", " "), song_stem(path).replace("_", " ")


def genres_file(path: Path, config: RunConfig) -> FileResult:
    return FileResult(path, STATUS_OK, payload=song_identity(path))


def run_batch(
    config: RunConfig,
    paths: Sequence[Path],
    worker: Callable[[Path, RunConfig], FileResult],
) -> List[FileResult]:
    """Run `worker` over the files with a bounded pool, results in input order."""

    def guarded(path: Path) -> FileResult:
        try:
            return worker(path, config)
        except READ_ERRORS as e:
            return FileResult(path, STATUS_FAILED, reason=str(e) or type(e).__name__)
        except Exception as e:
            logger.exception(f"Unexpected error on {path}")
            return FileResult(path, STATUS_FAILED, reason=f"{type(e).__name__}: {e}")

    workers = max(1, min(config.workers, len(paths)))
    progress = dict(
        total=len(paths),
        desc=config.command,
        unit="file",
        disable=config.quiet or len(paths) <= 1,
    )
    results = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for result in tqdm(pool.map(guarded, paths), **progress):
            if not config.quiet:
                tqdm.write(result.log_line())
            results.append(result)
    return results


# --- Commands -----------------------------------------------------------------


def _write_aggregate(config: RunConfig, name: str, body: str) -> Optional[Path]:
    target = aggregate_path(config, name)
    if target.exists() and not config.force:
        logger.error(f"{target} exists, use --force to overwrite")
        return None
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", encoding="utf-8", newline="\n") as f:
        f.write(body)
    return target


def _exit_code(results: Sequence[FileResult], outputs_ok: bool = True) -> int:
    if not outputs_ok or any(result.failed for result in results):
        return EXIT_FAILURE
    return EXIT_OK


def cmd_encode(config: RunConfig, paths: List[Path]) -> int:
    return _exit_code(run_batch(config, paths, encode_file))


def cmd_decode(config: RunConfig, paths: List[Path]) -> int:
    return _exit_code(run_batch(config, paths, decode_file))


def cmd_roundtrip(config: RunConfig, paths: List[Path]) -> int:
    results = run_batch(config, paths, roundtrip_file)
    equivalent = sum(1 for result in results if not result.failed)
    logger.info(f"Round trip: {equivalent}/{len(results)} files equivalent")
    return _exit_code(results)


def _file_entry(result: FileResult) -> dict:
    entry = {"file": str(result.path), "status": result.status, "reason": result.reason}
    if result.payload is not None:
        entry["report"] = report_to_dict(result.payload)
    return entry


def cmd_validate(config: RunConfig, paths: List[Path]) -> int:
    results = run_batch(config, paths, validate_file)
    reports = [r.payload for r in results if r.payload is not None]
    total = merge_reports(reports)
    document = {
        "total": report_to_dict(total),
        "files": [_file_entry(r) for r in results],
    }
    lines = [format_report(total)]
    lines += [
        f"file={r.path} errors={r.payload.total_errors}"
        for r in results
        if r.payload is not None
    ]
    written = [
        _write_aggregate(
            config, "validation.json", json.dumps(document, indent=2) + "\n"
        ),
        _write_aggregate(config, "validation.txt", "\n".join(lines) + "\n"),
    ]
    return _exit_code(results, all(written))


def cmd_stats(config: RunConfig, paths: List[Path]) -> int:
    results = run_batch(config, paths, stats_file)
    report = StatsReport()
    for result in results:
        if result.failed:
            report.skipped.append((str(result.path), result.reason))
        else:
            report = report.merge(result.payload)
    body = json.dumps(report.to_dict(config.top_n), indent=2, sort_keys=True)
    written = _write_aggregate(config, "stats.json", body + "\n")
    if written and config.csv:
        report.write_csv(aggregate_path(config, ""), config.top_n)
    return _exit_code(results, written is not None)


def cmd_vocab(config: RunConfig, paths: List[Path]) -> int:
    ordered = sorted(paths, key=file_order)
    results = run_batch(config, ordered, vocab_file)
    vocab = vocab_of(r.payload for r in results if not r.failed)
    body = "".join(f"{word}\n" for word in vocab.words)
    written = _write_aggregate(config, "vocab.txt", body)
    logger.info(f"Vocabulary of {vocab.size} tokens from {len(ordered)} files")
    return _exit_code(results, written is not None)


def cmd_genres(config: RunConfig, paths: List[Path]) -> int:
    results = run_batch(config, paths, genres_file)
    found = [r for r in results if not r.failed]
    cache = GenreCache(GENRE_CACHE_FILE)
    records = lookup_many(
        [r.payload for r in found],
        cache,
        get_provider(offline=config.offline),
        config.workers,
    )
    body = "".join(
        json.dumps({"file": str(r.path), **record.to_dict()}, sort_keys=True) + "\n"
        for r, record in zip(found, records)
    )
    resolved = sum(1 for record in records if record.resolved)
    logger.info(f"Genres resolved for {resolved}/{len(records)} songs")
    written = _write_aggregate(config, "genres.jsonl", body)
    return _exit_code(results, written is not None)


COMMANDS: Dict[str, Callable[[RunConfig, List[Path]], int]] = {
    "encode": cmd_encode,
    "decode": cmd_decode,
    "roundtrip": cmd_roundtrip,
    "validate": cmd_validate,
    "stats": cmd_stats,
    "vocab": cmd_vocab,
    "genres": cmd_genres,
}

COMMAND_HELP = {
    "encode": "convert GP5 files to token files",
    "decode": "convert token files to GP5 files",
    "roundtrip": "check encode then decode preserves the music of GP5 files",
    "validate": "count grammar errors in token files",
    "stats": "corpus statistics of token or GP5 files",
    "vocab": "vocabulary of token or GP5 files",
    "genres": "look up genre metadata for token or GP5 files",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("inputs", nargs="+", help="files, directories or globs")
    common.add_argument("--out-dir", help="output directory (default: beside input)")
    common.add_argument("--force", action="store_true", help="overwrite outputs")
    common.add_argument("--quiet", action="store_true", help="no per-file lines")
    common.add_argument(
        "--workers", type=int, default=DEFAULT_WORKERS, help="parallel files"
    )
    common.add_argument(
        "--strict",
        action="store_true",
        help="reject lossy GP5 reads (encode) or streams with errors (validate)",
    )
    common.add_argument(
        "--no-measure-repeat",
        dest="emit_measure_repeat",
        action="store_false",
        default=EMIT_MEASURE_REPEAT,
        help="write repeated measures in full",
    )
    common.add_argument(
        "--top-n", type=int, default=DEFAULT_TOP_N, help="token frequency rows"
    )
    common.add_argument("--csv", action="store_true", help="also write stats CSVs")
    common.add_argument(
        "--offline", action="store_true", help="genres from the offline stub"
    )

    parser = argparse.ArgumentParser(
        prog="tabtokens", description="GuitarPro 5 and event-token conversion"
    )
    parser.add_argument("--version", action="version", version=__version__)
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        subparsers.add_parser(name, parents=[common], help=COMMAND_HELP[name])
    return parser


def parse_config(argv: Optional[Sequence[str]] = None) -> RunConfig:
    args = build_parser().parse_args(argv)
    if args.workers < 1:
        build_parser().error("--workers must be at least 1")
    return RunConfig(
        command=args.command,
        inputs=args.inputs,
        out_dir=args.out_dir,
        force=args.force,
        quiet=args.quiet,
        workers=args.workers,
        strict=args.strict,
        emit_measure_repeat=args.emit_measure_repeat,
        top_n=args.top_n,
        csv=args.csv,
        offline=args.offline,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand; returns the exit code."""
    try:
        config = parse_config(argv)
    except SystemExit as e:
        return EXIT_OK if not e.code else EXIT_USAGE

    logging.basicConfig(
        level=logging.WARNING if config.quiet else LOG_LEVEL,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    paths = expand_inputs(config.inputs, INPUT_SUFFIXES[config.command])
    if not paths:
        logger.error("No input files matched")
        return EXIT_USAGE
    logger.info(f"{config.command}: {len(paths)} files, {config.workers} workers")
    return COMMANDS[config.command](config, paths)


if __name__ == "__main__":
    sys.exit(main())
