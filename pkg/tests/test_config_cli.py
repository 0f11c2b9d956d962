import json
import subprocess
import sys

import numpy as np
import pytest

from ergodrift.cli import main, resolve_seed
from ergodrift.coeffs import make_fbm_coeffs, read_coeffs_csv
from ergodrift.config import (
    COUPLING_KEYS,
    build_coupling_config,
    config_hash,
    coupling_params,
    parse_config_text,
    resolve,
    theoretical_rate,
)
from ergodrift.errors import ConfigError, DomainError
from ergodrift.toeplitz import invert_coeffs


def test_parse_config_text():
    vals = parse_config_text("# comment\nfamily = fbm\nhurst=0.3  # inline\n\nt_star = 4\n")
    assert vals == {"family": "fbm", "hurst": "0.3", "t-star": "4"}
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config_text("bogus = 1")
    with pytest.raises(ConfigError):
        parse_config_text("family fbm")


def test_resolve_precedence_and_types():
    cfg = resolve({"alpha": "0.6", "K": "3"}, {"alpha": "0.7", "K": None})
    assert cfg["alpha"] == 0.7 and cfg["K"] == 3.0 and cfg["c2"] == 4
    assert cfg["beta"] is None
    with pytest.raises(ConfigError):
        resolve({"c2": "four"}, {})


def test_hash_stable():
    a = resolve({}, {})
    assert config_hash(a) == config_hash(dict(reversed(list(a.items()))))
    assert config_hash(a) != config_hash(resolve({"seed": "1"}, {}))


def test_coupling_params_by_family():
    fbm = resolve({"family": "fbm", "hurst": "0.3", "alpha": "0.8"}, {})
    p = coupling_params(fbm)
    assert p["mode"] == "poly" and p["rho"] == pytest.approx(1.2) and p["beta"] == pytest.approx(0.8)
    assert theoretical_rate(fbm) == pytest.approx(0.125, abs=1e-6)
    ex = resolve({}, {})
    p = coupling_params(ex)
    assert p["mode"] == "exp" and p["lam"] == 1.0 and p["zeta"] is None
    assert theoretical_rate(ex) is None
    with pytest.raises(DomainError, match="theta"):
        build_coupling_config(resolve({"family": "fbm", "alpha": "0.8"}, {}))


def test_resolve_seed(monkeypatch):
    monkeypatch.delenv("ERGODRIFT_SEED", raising=False)
    assert resolve_seed(None) == 0
    monkeypatch.setenv("ERGODRIFT_SEED", "17")
    assert resolve_seed(None) == 17
    assert resolve_seed(3) == 3
    monkeypatch.setenv("ERGODRIFT_SEED", "x")
    with pytest.raises(DomainError):
        resolve_seed(None)


def test_coeffs_and_invert(tmp_path):
    a_path = tmp_path / "a.csv"
    b_path = tmp_path / "b.csv"
    assert main(["coeffs", "--family", "fbm", "--params", "hurst=0.3", "--k-max", "128", "--out", str(a_path)]) == 0
    first = a_path.read_text().splitlines()[0]
    assert first.startswith("# ergodrift coeffs config_sha256=")
    np.testing.assert_array_equal(read_coeffs_csv(a_path), make_fbm_coeffs(0.3, 1.0, 128).values)
    assert main(["invert", "--coeffs", str(a_path), "--out", str(b_path), "--oracle-check", "12"]) == 0
    np.testing.assert_allclose(read_coeffs_csv(b_path), invert_coeffs(make_fbm_coeffs(0.3, 1.0, 128)).values,
                               rtol=1e-15)


def test_slope_command(tmp_path, capsys):
    p = tmp_path / "a.csv"
    main(["coeffs", "--family", "poly", "--params", "rho=1.5", "--k-max", "2000", "--out", str(p)])
    assert main(["slope", "--in", str(p), "--kmin", "10", "--kmax", "1000", "--json"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["slope"] == pytest.approx(-1.5, abs=1e-10)


def test_rate_command(capsys, tmp_path):
    assert main(["rate", "--beta", "1", "--rho", "1", "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["v"] == pytest.approx(0.125, abs=1e-6)
    assert main(["rate", "--fbm", "0.1", "--json"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["v"] == pytest.approx(0.08) and res["v_numeric"] == pytest.approx(0.08, abs=1e-6)
    out = tmp_path / "t.csv"
    assert main(["rate", "--grid-beta", "0.6,1", "--grid-rho", "0.6,1", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[1] == "beta,rho,v,argmax_alpha,reason" and len(lines) == 6
    assert "nan" in lines[2]


def test_exit_codes(tmp_path, capsys):
    assert main(["rate", "--beta", "0.5", "--rho", "0.5"]) == 2
    assert main(["coeffs", "--family", "poly", "--params", "rho=0.4", "--out", str(tmp_path / "x.csv")]) == 2
    assert main(["invert", "--coeffs", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "y.csv")]) == 2
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("nonsense = 1\n")
    assert main(["couple", "--config", str(cfg), "--out", str(tmp_path / "o.csv")]) == 2
    err = capsys.readouterr().err
    assert "unknown key" in err
    assert main(["couple", "--family", "fbm", "--alpha", "0.8", "--theta", "1", "--out", str(tmp_path / "o.csv")]) == 2
    assert "violated: theta" in capsys.readouterr().err


def test_invariant_exit_code(tmp_path):
    # with coefficients this large the two float evaluations drift apart past the oracle tolerance
    p = tmp_path / "a.csv"
    p.write_text("k,a_k\n" + "\n".join(f"{k},{v!r}" for k, v in enumerate([1.0] + [30.0] * 20)) + "\n")
    assert main(["invert", "--coeffs", str(p), "--out", str(tmp_path / "b.csv"), "--oracle-check", "20"]) == 3


def test_couple_reproducible(tmp_path):
    args = ["couple", "--horizon", "300", "--replicas", "100", "--seed", "5", "--workers", "1"]
    o1, o2 = tmp_path / "t1.csv", tmp_path / "t2.csv"
    assert main(args + ["--out", str(o1), "--summary", str(tmp_path / "s.json"),
                        "--trace-out", str(tmp_path / "tr"), "--trace-limit", "2"]) == 0
    assert main(args + ["--out", str(o2)]) == 0
    assert o1.read_text() == o2.read_text()
    lines = o1.read_text().splitlines()
    assert lines[0].startswith("# ergodrift couple config_sha256=") and lines[1] == "n,p_hat,ci_lo,ci_hi"
    summary = json.loads((tmp_path / "s.json").read_text())
    assert summary["replicas"] == 100 and summary["p_hat_monotone"]
    trace = (tmp_path / "tr" / "trace_00001.csv").read_text().splitlines()
    assert trace[1] == "time,phase,event,detail" and len(trace) > 2


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("horizon = 200\nreplicas = 100\nseed = 1\nworkers = 1\n")
    out = tmp_path / "t.csv"
    assert main(["tail", "--config", str(cfg), "--horizon", "100", "--out", str(out)]) == 0
    summary = json.loads((tmp_path / "t.csv.json").read_text())
    assert summary["horizon"] == 100


def test_figure1(tmp_path):
    assert main(["figure1", "--hurst", "0.3", "--k-max", "4096", "--kmin", "100", "--kmax", "4000",
                 "--out-dir", str(tmp_path)]) == 0
    side = json.loads((tmp_path / "figure1_H0.3.json").read_text())
    assert side["slope"] == pytest.approx(-0.8, abs=0.05) and side["regime"] == "proved"
    assert (tmp_path / "figure1_H0.3.csv").read_text().splitlines()[1] == "log_k,log_abs_b"


def test_simulate_noise(tmp_path):
    a = tmp_path / "a.csv"
    main(["coeffs", "--family", "exp", "--params", "ca=1,lambda=1", "--k-max", "16", "--out", str(a)])
    out = tmp_path / "n.csv"
    assert main(["simulate-noise", "--coeffs", str(a), "--steps", "5", "--dim", "2", "--replicas", "2",
                 "--seed", "3", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[1] == "replica,n,component,delta" and len(lines) == 2 + 2 * 5 * 2


def test_help_lists_every_key():
    res = subprocess.run([sys.executable, "-m", "ergodrift.cli", "couple", "--help"],
                         capture_output=True, text=True, check=True)
    for key in COUPLING_KEYS:
        assert f"--{key.name}" in res.stdout
