import json
import subprocess
import sys

import pytest

from svdcoreset.cli import main, parse_config
from svdcoreset.mmio import read_matrix_market, write_ndjson_rows


@pytest.fixture(scope="module")
def matrix_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "A.mtx"
    assert main(["gen", "--n", "300", "--d", "20", "--rank", "3", "--noise", "0.02", "--seed", "1", "-o", str(path)]) == 0
    return path


def load(path):
    return json.loads(path.read_text())


class TestCommands:
    def test_gen_is_deterministic(self, tmp_path, matrix_file):
        other = tmp_path / "B.mtx"
        main(["gen", "--n", "300", "--d", "20", "--rank", "3", "--noise", "0.02", "--seed", "1", "-o", str(other)])
        assert other.read_bytes() == matrix_file.read_bytes()
        assert read_matrix_market(other).shape == (300, 20)

    def test_svd_coreset_deterministic(self, tmp_path, matrix_file):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (a, b):
            assert main(["svd-coreset", "--k", "3", "--epsilon", "0.3", "--seed", "0", "-i", str(matrix_file), "-o", str(out)]) == 0
        assert a.read_bytes() == b.read_bytes()
        d = load(a)
        assert {"k", "epsilon_target", "epsilon_residual", "indices", "row_weights", "trace"} <= set(d)

    def test_rows_out(self, tmp_path, matrix_file):
        rows = tmp_path / "rows.mtx"
        main(["svd-coreset", "--k", "3", "-i", str(matrix_file), "-o", str(tmp_path / "c.json"), "--rows-out", str(rows)])
        assert read_matrix_market(rows).n_rows == len(load(tmp_path / "c.json")["indices"])

    def test_evaluate(self, tmp_path, matrix_file, capsys):
        cs, rep, csv = tmp_path / "cs.json", tmp_path / "rep.json", tmp_path / "q.csv"
        main(["svd-coreset", "--k", "3", "--epsilon", "0.3", "-i", str(matrix_file), "-o", str(cs)])
        code = main(["evaluate", "-i", str(matrix_file), "--coreset", str(cs), "--queries", "20", "-o", str(rep), "--csv", str(csv)])
        assert code == 0
        r = load(rep)
        assert r["max_rel_error"] <= r["bound_5eps"]
        assert "wall_time_ms" not in r
        assert len(csv.read_text().splitlines()) == 1 + 22
        assert "within bound" in capsys.readouterr().out

    def test_stream_with_large_chunk_equals_batch(self, tmp_path, matrix_file):
        b, s = tmp_path / "b.json", tmp_path / "s.json"
        main(["svd-coreset", "--k", "3", "--epsilon", "0.3", "-i", str(matrix_file), "-o", str(b)])
        main(["stream", "--k", "3", "--epsilon", "0.3", "--chunk-size", "300", "-i", str(matrix_file), "-o", str(s)])
        db, ds = load(b), load(s)
        for key in ("indices", "row_weights", "epsilon_residual", "trace"):
            assert db[key] == ds[key]

    def test_stream_ndjson(self, tmp_path, matrix_file):
        nd = tmp_path / "A.ndjson"
        write_ndjson_rows(nd, read_matrix_market(matrix_file))
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert main(["stream", "--k", "3", "--chunk-size", "64", "-i", str(matrix_file), "-o", str(a)]) == 0
        assert main(["stream", "--k", "3", "--chunk-size", "64", "--d", "20", "-i", str(nd), "-o", str(b)]) == 0
        assert load(a)["indices"] == load(b)["indices"]
        assert main(["stream", "--k", "3", "-i", str(nd), "-o", str(b)]) == 1

    def test_one_mean_and_ifa(self, tmp_path, matrix_file):
        om, ifa = tmp_path / "om.json", tmp_path / "ifa.json"
        assert main(["one-mean", "--epsilon", "0.3", "-i", str(matrix_file), "-o", str(om)]) == 0
        assert set(load(om)) >= {"indices", "weights", "n_source"}
        assert main(["ifa", "--epsilon", "0.2", "-i", str(matrix_file), "-o", str(ifa)]) == 0
        d = load(ifa)
        assert d["n"] == 300
        assert abs(sum(v for _, v in d["weights"]) - 1) < 1e-9

    def test_parallel_workers(self, tmp_path, matrix_file):
        out = tmp_path / "p.json"
        assert main(["svd-coreset", "--k", "3", "--workers", "3", "-i", str(matrix_file), "-o", str(out)]) == 0


class TestExitCodes:
    def test_usage(self, capsys):
        assert main(["svd-coreset", "--bogus"]) == 1
        assert main(["svd-coreset", "--epsilon", "0"]) == 1
        assert main(["svd-coreset"]) == 1
        assert main([]) == 1

    def test_data_error(self, tmp_path, matrix_file):
        assert main(["svd-coreset", "--k", "50", "-i", str(matrix_file), "-o", str(tmp_path / "x.json")]) == 2
        bad = tmp_path / "bad.mtx"
        bad.write_text("not a matrix\n")
        assert main(["svd-coreset", "-i", str(bad), "-o", str(tmp_path / "y.json")]) == 2
        assert main(["svd-coreset", "-i", str(tmp_path / "missing.mtx")]) == 2

    def test_no_partial_output_on_failure(self, tmp_path, matrix_file):
        out = tmp_path / "never.json"
        main(["svd-coreset", "--k", "50", "-i", str(matrix_file), "-o", str(out)])
        assert not out.exists()


class TestConfig:
    def test_file_overridden_by_flags(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# defaults\nk = 4\nepsilon = 0.4\nchunk-size = 32\n")
        rc = parse_config(["stream", "--config", str(cfg), "--k", "2"])
        assert (rc.k, rc.epsilon, rc.chunk_size) == (2, 0.4, 32)

    def test_same_config_same_bytes(self, tmp_path, matrix_file):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(f"input = {matrix_file}\nk = 3\nepsilon = 0.3\nseed = 5\n")
        outs = [tmp_path / "1.json", tmp_path / "2.json"]
        for o in outs:
            assert main(["svd-coreset", "--config", str(cfg), "-o", str(o)]) == 0
        assert outs[0].read_bytes() == outs[1].read_bytes()

    def test_unknown_key(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("flavour = mint\n")
        assert main(["svd-coreset", "--config", str(cfg)]) == 1


def test_help_shows_defaults():
    out = subprocess.run([sys.executable, "-m", "svdcoreset", "svd-coreset", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "default: 0.25" in out.stdout
