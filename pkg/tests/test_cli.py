"""
Tests for the Command Line
"""

import json
from pathlib import Path
from unittest.mock import patch

import pandas as pd

from src.cli import (
    EXIT_FAILURE,
    EXIT_OK,
    EXIT_USAGE,
    INPUT_SUFFIXES,
    expand_inputs,
    main,
    song_stem,
)
from src.gp5_io import read_gp5
from src.metadata_client import StubCatalogProvider
from src.stats import build_vocab
from src.tokenizer import compare_songs, decode, encode, read_tokens, write_tokens


def run(*args):
    return main([str(arg) for arg in args])


def write_words(path, words):
    path.write_text("".join(f"{word}\n" for word in words), encoding="utf-8")
    return path


class TestArguments:
    """Test argument handling and input expansion."""

    def test_usage_errors(self, tmp_path):
        """Test bad invocations exit with the usage code."""
        assert run() == EXIT_USAGE
        assert run("transcode", tmp_path) == EXIT_USAGE
        assert run("encode") == EXIT_USAGE
        assert run("encode", tmp_path, "--workers", 0) == EXIT_USAGE

    def test_version(self, capsys):
        """Test --version exits cleanly."""
        assert run("--version") == EXIT_OK
        assert capsys.readouterr().out.strip()

    def test_nothing_matched(self, tmp_path):
        """Test an empty glob is a usage error."""
        assert run("encode", tmp_path / "*.gp5") == EXIT_USAGE

    def test_expand_inputs(self, tmp_path):
        """Test directories filter by suffix and duplicates collapse."""
        (tmp_path / "b.gp5").write_bytes(b"")
        (tmp_path / "a.GP5").write_bytes(b"")
        (tmp_path / "notes.txt").write_text("", encoding="utf-8")
        missing = tmp_path / "missing.gp5"
        paths = expand_inputs(
            [str(tmp_path), str(tmp_path / "b.gp5"), str(missing)],
            INPUT_SUFFIXES["encode"],
        )
        assert paths == [tmp_path / "a.GP5", tmp_path / "b.gp5", missing]

    def test_song_stem(self):
        """Test token and GP5 suffixes are stripped."""
        assert song_stem(Path("riff.tokens.txt")) == "riff"
        assert song_stem(Path("riff.gp5")) == "riff"
        assert song_stem(Path("riff.txt")) == "riff"


class TestEncodeDecode:
    """Test the conversion commands."""

    def test_encode(self, tmp_path, riff_gp5, riff, capsys):
        """Test a GP5 file becomes a token file."""
        out = tmp_path / "out"
        assert run("encode", riff_gp5, "--out-dir", out) == EXIT_OK
        assert read_tokens(out / "riff.tokens.txt") == encode(riff)
        assert "status=ok" in capsys.readouterr().out

    def test_encode_without_repeats(self, tmp_path, riff_gp5, riff):
        """Test --no-measure-repeat spells measures out."""
        out = tmp_path / "out"
        assert run("encode", riff_gp5, "--out-dir", out, "--no-measure-repeat") == 0
        tokens = read_tokens(out / "riff.tokens.txt")
        assert tokens == encode(riff, emit_measure_repeat=False)

    def test_existing_output(self, tmp_path, riff_gp5, capsys):
        """Test outputs are only replaced with --force."""
        out = tmp_path / "out"
        assert run("encode", riff_gp5, "--out-dir", out) == EXIT_OK
        assert run("encode", riff_gp5, "--out-dir", out) == EXIT_FAILURE
        assert "use --force" in capsys.readouterr().out
        assert run("encode", riff_gp5, "--out-dir", out, "--force") == EXIT_OK

    def test_one_bad_file(self, tmp_path, riff_gp5, capsys):
        """Test a broken file fails alone and the batch continues."""
        broken = tmp_path / "broken.gp5"
        broken.write_bytes(b"not a guitar pro file")
        out = tmp_path / "out"
        assert run("encode", broken, riff_gp5, "--out-dir", out) == EXIT_FAILURE
        assert (out / "riff.tokens.txt").exists()
        assert not (out / "broken.tokens.txt").exists()
        assert f"status=failed file={broken}" in capsys.readouterr().out

    def test_quiet(self, tmp_path, riff_gp5, capsys):
        """Test --quiet prints no per-file lines."""
        assert run("encode", riff_gp5, "--out-dir", tmp_path, "--quiet") == 0
        assert capsys.readouterr().out == ""

    def test_decode(self, tmp_path, band):
        """Test a token file becomes a GP5 file."""
        source = tmp_path / "band.tokens.txt"
        write_tokens(source, encode(band))
        out = tmp_path / "out"
        assert run("decode", source, "--out-dir", out) == EXIT_OK
        song = read_gp5((out / "band.gp5").read_bytes())
        assert compare_songs(song, decode(encode(band))) == []

    def test_decode_empty_stream(self, tmp_path):
        """Test a stream without music still writes a playable file."""
        source = write_words(tmp_path / "empty.txt", ["start", "end"])
        assert run("decode", source) == EXIT_OK
        song = read_gp5((tmp_path / "empty.gp5").read_bytes())
        assert len(song.tracks) == 1
        assert len(song.measure_headers) == 1

    def test_roundtrip(self, tmp_path, riff_gp5):
        """Test round trips pass for good files and fail for broken ones."""
        assert run("roundtrip", riff_gp5) == EXIT_OK
        broken = tmp_path / "broken.gp5"
        broken.write_bytes(b"")
        assert run("roundtrip", riff_gp5, broken) == EXIT_FAILURE


class TestValidate:
    """Test the validate command."""

    def test_clean_files(self, tmp_path, token_corpus):
        """Test a clean corpus writes both reports."""
        out = tmp_path / "reports"
        assert run("validate", token_corpus, "--out-dir", out) == EXIT_OK
        document = json.loads((out / "validation.json").read_text(encoding="utf-8"))
        assert document["total"]["streams"] == 20
        assert document["total"]["total_errors"] == 0
        text = (out / "validation.txt").read_text(encoding="utf-8")
        assert "total_errors=0" in text

    def test_strict(self, tmp_path):
        """Test --strict rejects streams with errors."""
        dirty = write_words(tmp_path / "dirty.txt", ["start", "start", "end"])
        out = tmp_path / "reports"
        assert run("validate", dirty, "--out-dir", out) == EXIT_OK
        document = json.loads((out / "validation.json").read_text(encoding="utf-8"))
        assert document["files"][0]["report"]["total_errors"] == 1
        assert run("validate", dirty, "--out-dir", out, "--force", "--strict") == 1
        document = json.loads((out / "validation.json").read_text(encoding="utf-8"))
        assert document["files"][0]["status"] == "rejected"

    def test_existing_report(self, tmp_path, token_corpus):
        """Test aggregate reports are not overwritten without --force."""
        out = tmp_path / "reports"
        assert run("validate", token_corpus, "--out-dir", out) == EXIT_OK
        assert run("validate", token_corpus, "--out-dir", out) == EXIT_FAILURE


class TestCorpusCommands:
    """Test stats, vocab and genres."""

    def test_stats(self, tmp_path, token_corpus):
        """Test corpus statistics with CSV output."""
        out = tmp_path / "stats"
        assert run("stats", token_corpus, "--out-dir", out, "--csv") == EXIT_OK
        data = json.loads((out / "stats.json").read_text(encoding="utf-8"))
        assert data["totals"]["songs"] == 20
        frame = pd.read_csv(out / "tracks_per_song.csv")
        assert frame["count"].sum() == 20

    def test_stats_skips_bad_file(self, tmp_path, riff_gp5):
        """Test unreadable files are listed as skipped."""
        broken = tmp_path / "broken.gp5"
        broken.write_bytes(b"\x00")
        out = tmp_path / "stats"
        assert run("stats", riff_gp5, broken, "--out-dir", out) == EXIT_FAILURE
        data = json.loads((out / "stats.json").read_text(encoding="utf-8"))
        assert data["totals"]["songs"] == 1
        assert [entry["file"] for entry in data["skipped"]] == [str(broken)]

    def test_vocab(self, tmp_path, token_corpus):
        """Test the vocabulary matches the library result."""
        out = tmp_path / "vocab"
        assert run("vocab", token_corpus, "--out-dir", out) == EXIT_OK
        lines = (out / "vocab.txt").read_text(encoding="utf-8").splitlines()
        expected = build_vocab(sorted(token_corpus.glob("*.tokens.txt")))
        assert tuple(lines) == expected.words

    def test_genres_offline(self, tmp_path, riff_gp5, genre_cache_path):
        """Test offline lookups come back unresolved."""
        out = tmp_path / "genres"
        with patch("src.cli.GENRE_CACHE_FILE", genre_cache_path):
            assert run("genres", riff_gp5, "--out-dir", out, "--offline") == 0
        lines = (out / "genres.jsonl").read_text(encoding="utf-8").splitlines()
        record = json.loads(lines[0])
        assert record["file"] == str(riff_gp5)
        assert record["artist"] == "Test Artist"
        assert record["title"] == "Test Song"
        assert record["resolved"] is False

    def test_genres_resolved(self, tmp_path, riff_gp5, genre_cache_path):
        """Test resolved lookups from GP5 and token files."""
        catalog = StubCatalogProvider(
            {("Test Artist", "Test Song"): ["Metal"], ("Test Artist", "riff"): ["Rock"]}
        )
        source = tmp_path / "riff.tokens.txt"
        write_words(source, ["artist:test_artist", "start", "end"])
        out = tmp_path / "genres"
        with patch("src.cli.GENRE_CACHE_FILE", genre_cache_path), patch(
            "src.cli.get_provider", return_value=catalog
        ):
            assert run("genres", riff_gp5, source, "--out-dir", out) == EXIT_OK
        lines = (out / "genres.jsonl").read_text(encoding="utf-8").splitlines()
        records = [json.loads(line) for line in lines]
        assert [r["genres"] for r in records] == [["metal"], ["rock"]]
        assert all(r["resolved"] for r in records)
