"""Exit codes and end-to-end behaviour of the headline-extract command."""

import numpy as np
import pytest
from headline_rank import load_embeddings, read_token_file

from headline_extractor.cli import main


class TestUsageErrors:
    def test_no_arguments(self, capsys):
        assert main([]) == 2
        assert "--model" in capsys.readouterr().err

    def test_unknown_pooling(self, bert_dir, capsys):
        code = main(["--model", bert_dir, "--pooling", "max", "--input", "x", "--out", "y"])
        assert code == 2

    def test_negative_layer(self, bert_dir):
        assert main(["--model", bert_dir, "--layer", "-1", "--input", "x", "--out", "y"]) == 2

    def test_zero_batch_size(self, bert_dir):
        assert main(["--model", bert_dir, "--batch-size", "0", "--input", "x", "--out", "y"]) == 2

    def test_missing_input_and_out(self, bert_dir, capsys):
        assert main(["--model", bert_dir]) == 2
        assert "--input and --out are required" in capsys.readouterr().err

    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0
        assert "headline-extract" in capsys.readouterr().out


class TestRuntimeErrors:
    def test_unknown_checkpoint(self, tmp_path, capsys):
        code = main(
            ["--model", str(tmp_path / "nowhere"), "--input", "x.tsv", "--out", str(tmp_path / "y.hst")]
        )
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_missing_input_file(self, bert_dir, tmp_path, capsys):
        code = main(
            ["--model", bert_dir, "--input", str(tmp_path / "gone.tsv"), "--out", str(tmp_path / "y.hst")]
        )
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_layer_out_of_range(self, bert_dir, headlines_tsv, tmp_path, capsys):
        code = main(
            ["--model", bert_dir, "--layer", "9", "--input", headlines_tsv, "--out", str(tmp_path / "y.hst")]
        )
        assert code == 1
        assert "0..2" in capsys.readouterr().err


class TestListLayers:
    def test_prints_outputs_and_dim(self, bert_dir, capsys):
        assert main(["--model", bert_dir, "--list-layers"]) == 0
        out = capsys.readouterr().out
        assert "3 hidden-state outputs" in out
        assert "0..2" in out
        assert "dim 16" in out

    def test_needs_no_input_or_out(self, t5_dir, capsys):
        assert main(["--model", t5_dir, "--list-layers"]) == 0
        assert "3 hidden-state outputs" in capsys.readouterr().out


class TestEndToEnd:
    def test_token_dump(self, bert_dir, headlines_tsv, tmp_path, capsys):
        out = tmp_path / "toks.hst"
        code = main(
            ["--model", bert_dir, "--layer", "2", "--input", headlines_tsv, "--out", str(out)]
        )
        assert code == 0
        assert "wrote 20 headlines (tokens, dim 16)" in capsys.readouterr().out
        assert len(read_token_file(str(out)).sequences) == 20

    def test_mean_pooled_dump(self, bert_dir, headlines_tsv, tmp_path, capsys):
        out = tmp_path / "mean.hse"
        code = main(
            [
                "--model",
                bert_dir,
                "--layer",
                "1",
                "--pooling",
                "mean",
                "--drop-special",
                "--input",
                headlines_tsv,
                "--out",
                str(out),
            ]
        )
        assert code == 0
        assert "sentences" in capsys.readouterr().out
        store = load_embeddings(str(out))
        assert store.n_rows == 20
        assert np.all(np.isfinite(store.matrix))

    def test_reruns_are_byte_identical(self, bert_dir, headlines_tsv, tmp_path):
        first = tmp_path / "a.hse"
        second = tmp_path / "b.hse"
        argv = ["--model", bert_dir, "--pooling", "cls", "--input", headlines_tsv]
        assert main(argv + ["--out", str(first)]) == 0
        assert main(argv + ["--out", str(second)]) == 0
        assert first.read_bytes() == second.read_bytes()
