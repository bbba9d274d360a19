import csv
import io
import json

import pytest

from macvlc.cli import main


def run(*argv):
    buf = io.StringIO()
    code = main(list(argv), out=buf)
    return code, buf.getvalue()


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def scheme_file(tmp_path):
    path = tmp_path / "scheme.json"
    path.write_text(json.dumps({"type": "random", "m1": 8, "m2": 8, "seed": 2}))
    return str(path)


class TestCapacity:
    def test_adder(self):
        code, text = run("capacity", "adder")
        assert code == 0
        assert "C1 = 1.000000 bits/use" in text
        assert "C2 = 1.000000 bits/use" in text
        assert "I(X1,X2;Y) = 1.500000 bits/use" in text

    def test_useless_channel(self, tmp_path):
        path = tmp_path / "flat.json"
        path.write_text(json.dumps({"x1_size": 2, "x2_size": 2, "y_size": 2, "transition": [0.5] * 8}))
        code, text = run("capacity", str(path))
        assert code == 0
        assert "C1 = 0.000000 bits/use" in text and "C2 = 0.000000 bits/use" in text

    def test_malformed_json(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert run("capacity", str(path))[0] != 0
        assert "error" in capsys.readouterr().err

    def test_invalid_rows(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"x1_size": 2, "x2_size": 2, "y_size": 2, "transition": [0.7] * 8}))
        assert run("capacity", str(path))[0] == 2

    def test_explicit_inputs(self):
        code, text = run("capacity", "adder", "--p1", "1,0", "--p2", "0.5,0.5")
        assert code == 0
        assert "I(X1;Y|X2) = 0.000000 bits/use" in text


class TestRegion:
    def test_rmac_vertices(self):
        code, text = run("region", "adder")
        pts = {(r["R1_bits"], r["R2_bits"]) for r in rows(text)}
        assert code == 0
        assert ("1.000000", "0.500000") in pts and ("0.500000", "1.000000") in pts

    def test_outer_full_ratio_matches_rmac(self):
        assert run("region", "adder", "--kind", "outer", "--r1", "1", "--r2", "1")[1] == run("region", "adder")[1]

    def test_outer_zero_ratio_is_rectangle(self):
        a = run("region", "adder", "--kind", "outer", "--r1", "0", "--r2", "0")[1]
        assert a == run("region", "adder", "--kind", "rect")[1]

    def test_feedback_contains_rmac(self):
        code, text = run("region", "adder", "--kind", "feedback", "--feedback-grid", "11")
        assert code == 0
        r = rows(text)
        assert max(float(x["R1_bits"]) + float(x["R2_bits"]) for x in r) >= 1.5 - 1e-6


class TestCurve:
    def test_endpoints(self):
        code, text = run("curve", "adder", "--p-grid", "3")
        r = rows(text)
        assert code == 0 and len(r) == 3
        assert r[0]["p"] == "0.000000" and r[-1]["p"] == "1.000000"
        assert float(r[-1]["R1_bits"]) == pytest.approx(1.0)
        assert float(r[0]["R2_bits"]) == pytest.approx(1.0)
        for x in r:
            assert float(x["R1_ts_bits"]) <= float(x["R1_bits"]) + 1e-9

    def test_unsupported_channel(self, capsys):
        code, _ = run("curve", "multiplier", "--p-grid", "3")
        assert code == 2
        assert "not (C1, C2)" in capsys.readouterr().err


class TestSimulate:
    def test_byte_identical(self, scheme_file):
        a = run("simulate", "noisy_adder:0.1", scheme_file, "--trials", "50")
        b = run("simulate", "noisy_adder:0.1", scheme_file, "--trials", "50")
        assert a[0] == 0 and a == b
        doc = json.loads(a[1])
        assert doc["config"]["trials"] == 50

    def test_worker_invariance(self, scheme_file):
        a = run("simulate", "noisy_adder:0.1", scheme_file, "--trials", "40", "--workers", "1")[1]
        b = run("simulate", "noisy_adder:0.1", scheme_file, "--trials", "40", "--workers", "2")[1]
        assert a == b

    def test_zero_trials_rejected(self, scheme_file):
        with pytest.raises(SystemExit) as exc:
            run("simulate", "adder", scheme_file, "--trials", "0")
        assert exc.value.code != 0

    def test_env_seed(self, scheme_file, monkeypatch):
        base = run("simulate", "noisy_adder:0.1", scheme_file, "--trials", "30", "--seed", "5")[1]
        monkeypatch.setenv("MACVLC_SEED", "5")
        assert run("simulate", "noisy_adder:0.1", scheme_file, "--trials", "30", "--seed", "99")[1] == base

    def test_records_csv(self, scheme_file, tmp_path):
        out = tmp_path / "rec.csv"
        code, _ = run("simulate", "noisy_adder:0.1", scheme_file, "--trials", "5", "--records-csv", str(out))
        assert code == 0
        assert out.read_text().splitlines()[0] == "trial,n1,n2,error,capped"

    def test_missing_scheme(self, tmp_path):
        assert run("simulate", "adder", str(tmp_path / "nope.json"), "--trials", "1")[0] == 2


class TestSweep:
    def test_infinite_ratio(self):
        code, text = run("sweep", "noisy_adder:0.1", "--m-ratio-grid", "1,inf", "--trials", "30")
        r = rows(text)
        assert code == 0 and len(r) == 2
        assert r[1]["M2"] == "1" and float(r[1]["rate2_bits"]) == 0.0
        assert r[0]["M1"] == r[0]["M2"] == "16"

    def test_bad_ratio(self):
        assert run("sweep", "adder", "--m-ratio-grid", "-1", "--trials", "1")[0] == 2


class TestCheck:
    @pytest.mark.parametrize("suite", ["drift", "roots"])
    def test_analytic_suites(self, suite):
        code, text = run("check", "noisy_adder:0.1", "--suite", suite)
        assert code == 0
        assert text.strip() and all(line.startswith("PASS") for line in text.strip().splitlines())

    @pytest.mark.parametrize("suite", ["wald", "concentration", "slack"])
    def test_simulated_suites(self, suite):
        code, text = run("check", "noisy_adder:0.1", "--suite", suite, "--trials", "1000")
        assert code == 0, text

    def test_unknown_suite(self):
        with pytest.raises(SystemExit):
            run("check", "adder", "--suite", "bogus")

    def test_unknown_channel(self):
        assert run("check", "nonsense", "--suite", "drift")[0] == 2
