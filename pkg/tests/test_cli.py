import csv
import io
import json

import pytest

from mimosim.cli import BER_COLUMNS, fmt, main


@pytest.fixture
def siso_config(tmp_path):
    path = tmp_path / "siso.json"
    path.write_text(json.dumps({"n_t": 1, "n_r": 1, "n_rt": 4, "snr_db": [2.0, 4.0], "frames": 6, "seed": 3}))
    return path


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_fmt():
    assert fmt(3) == "3"
    assert fmt(0.1 + 0.2) == "0.3"
    assert fmt(1 / 3) == "0.333333333333"
    assert fmt(float("inf")) == "inf"
    assert fmt(True) == "true"


class TestBer:
    def test_writes_csv(self, siso_config, tmp_path, capsys):
        out = tmp_path / "ber.csv"
        assert main(["ber", "--config", str(siso_config), "--out", str(out)]) == 0
        rows = read_csv(out.read_text())
        assert list(rows[0]) == BER_COLUMNS
        assert len(rows) == 2
        assert all(r["eta_p"] == "0.125" for r in rows)
        assert all(r["sinr_ub_db"] == "inf" for r in rows)
        assert all(int(r["bits"]) == 6 * 1001 for r in rows)
        assert "wrote" in capsys.readouterr().out

    def test_stdout_when_no_out(self, siso_config, capsys):
        assert main(["ber", "--config", str(siso_config)]) == 0
        assert capsys.readouterr().out.startswith(",".join(BER_COLUMNS))

    def test_sweep_shape_and_trend(self, tmp_path, capsys):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"n_t": 1, "n_r": 1, "n_rt": 4, "snr_db": list(range(9)), "frames": 8}))
        assert main(["ber", "--config", str(path)]) == 0
        rows = read_csv(capsys.readouterr().out)
        assert len(rows) == 9
        bers = [float(r["ber"]) for r in rows]
        assert bers[0] > bers[4] >= bers[8]

    def test_byte_identical_reruns(self, siso_config, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["ber", "--config", str(siso_config), "--out", str(a)])
        main(["ber", "--config", str(siso_config), "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_command_line_overrides_config(self, siso_config, capsys):
        main(["ber", "--config", str(siso_config), "--frames", "2"])
        rows = read_csv(capsys.readouterr().out)
        assert all(r["frames"] == "2" for r in rows)

    def test_seed_precedence(self, siso_config, tmp_path, capsys, monkeypatch):
        conf = json.loads(siso_config.read_text())
        del conf["seed"]
        conf["snr_db"] = [0.0]
        path = tmp_path / "noseed.json"
        path.write_text(json.dumps(conf))

        def errors(*extra):
            main(["ber", "--config", str(path), *extra])
            return read_csv(capsys.readouterr().out)[0]["errors"]

        monkeypatch.setenv("MIMOSIM_SEED", "11")
        env_seeded = errors()
        assert errors("--seed", "11") == env_seeded
        monkeypatch.delenv("MIMOSIM_SEED")
        assert errors("--seed", "0") == errors()

    def test_missing_config(self, tmp_path, capsys):
        missing = tmp_path / "nope.json"
        assert main(["ber", "--config", str(missing)]) == 1
        assert str(missing) in capsys.readouterr().err

    def test_unknown_key_rejected(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"n_t": 1, "n_r": 1, "snr_db": [1.0], "frams": 3}))
        assert main(["ber", "--config", str(path)]) == 1
        assert "frams" in capsys.readouterr().err

    def test_wrong_type_rejected(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"n_t": "one", "n_r": 1, "snr_db": [1.0]}))
        assert main(["ber", "--config", str(path)]) == 1
        assert "n_t" in capsys.readouterr().err

    def test_inconsistent_split_rejected(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"n_t": 16, "n_r": 15, "n_tot": 32, "snr_db": [1.0]}))
        assert main(["ber", "--config", str(path)]) == 1
        assert "n_tot" in capsys.readouterr().err

    def test_split_from_total(self, tmp_path, capsys):
        path = tmp_path / "split.json"
        path.write_text(json.dumps({"n_tot": 32, "n_t": 25, "n_rt": 2, "snr_db": [3.5], "frames": 1}))
        assert main(["ber", "--config", str(path)]) == 0
        row = read_csv(capsys.readouterr().out)[0]
        assert row["eta_p"] == "1.75"
        assert float(row["sinr_ub_db"]) == pytest.approx(12.39, abs=0.01)

    def test_missing_snr_points(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"n_t": 1, "n_r": 1}))
        assert main(["ber", "--config", str(path)]) == 1
        assert "snr_db" in capsys.readouterr().err


class TestPlan:
    def run(self, capsys, *args):
        code = main(["plan", *args])
        text = capsys.readouterr().out
        body = [l for l in text.splitlines() if not l.startswith("#")]
        footer = dict(l[2:].split("=", 1) for l in text.splitlines() if l.startswith("#"))
        return code, read_csv("\n".join(body)), footer

    def test_stationary_point_footer(self, capsys):
        code, rows, footer = self.run(capsys, "--ntot", "1024", "--nrt", "1", "--eta-min", "1")
        assert code == 0
        assert float(footer["stationary_n_t"]) == 959
        assert len(rows) == 1022

    def test_unavoidable_minimum(self, capsys):
        _, rows, footer = self.run(capsys, "--ntot", "32", "--nrt", "2", "--eta-min", "0.1")
        assert footer["feasible"] == "false"
        row = next(r for r in rows if r["n_t"] == "25")
        assert float(row["sinr_ub_db"]) == pytest.approx(12.39, abs=0.01)
        assert row["eta_p"] == "1.75"

    def test_empty_range(self, capsys):
        code, _, footer = self.run(capsys, "--ntot", "32", "--nrt", "1", "--eta-min", "20")
        assert code == 0
        assert footer["range"] == "EMPTY"

    def test_out_file_and_config(self, tmp_path, capsys):
        conf = tmp_path / "plan.json"
        conf.write_text(json.dumps({"n_tot": 32, "n_rt": 1, "eta_min": 0.5}))
        out = tmp_path / "plan.csv"
        assert main(["plan", "--config", str(conf), "--nrt", "2", "--out", str(out)]) == 0
        text = out.read_text()
        assert text.startswith("n_t,sinr_ub_db,eta_p,f\n")
        assert "# stationary_n_t=8.37258300203" in text

    def test_missing_argument(self, capsys):
        assert main(["plan", "--ntot", "32", "--nrt", "1"]) == 1
        assert "eta_min" in capsys.readouterr().err


class TestValidate:
    def test_passes(self, capsys):
        args = ["validate", "--nt", "4", "--nr", "3", "--nrt", "2", "--sigma-h2", "0.5",
                "--sigma-w2", "1", "--draws", "100000"]
        assert main(args) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 7
        assert "FAIL" not in out

    def test_negative_control(self, capsys):
        args = ["validate", "--nt", "4", "--nr", "3", "--draws", "20000", "--analytic-sigma-h2", "0.6"]
        assert main(args) == 3
        assert "FAIL" in capsys.readouterr().out

    def test_too_few_draws(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["validate", "--nt", "4", "--nr", "3", "--draws", "1000"])
        assert exc.value.code == 2
        assert "draws" in capsys.readouterr().err
