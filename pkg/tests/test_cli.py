import json
import math

import numpy as np
import pytest

from dpsample import cli


def run(argv):
    return cli.main(argv)


@pytest.fixture()
def kary_file(tmp_path):
    path = tmp_path / "kary.txt"
    path.write_text("# k=2\n1 1 2 2\n")
    return str(path)


@pytest.fixture()
def binary_file(tmp_path):
    rows = ["0" * 4 for _ in range(60)]
    path = tmp_path / "bits.txt"
    path.write_text("# d=4\n" + "\n".join(rows) + "\n")
    return str(path)


# --- data files -----------------------------------------------------------


def test_read_kary_file_header_and_inference(tmp_path):
    p = tmp_path / "a.txt"
    p.write_text("1 2 3\n2 2\n")
    x = cli.read_kary_file(str(p))
    assert x.k == 3 and x.n == 5
    p2 = tmp_path / "b.txt"
    p2.write_text("# k=7\n1 2\n")
    assert cli.read_kary_file(str(p2)).k == 7
    p3 = tmp_path / "c.txt"
    p3.write_text("1 x 2\n")
    with pytest.raises(cli.DataError):
        cli.read_kary_file(str(p3))


def test_read_binary_file_validation(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("010\n111\n")
    x = cli.read_binary_file(str(p))
    assert (x.n, x.d) == (2, 3)
    bad = tmp_path / "bad.txt"
    bad.write_text("01\n011\n")
    with pytest.raises(cli.DataError):
        cli.read_binary_file(str(bad))
    bad2 = tmp_path / "bad2.txt"
    bad2.write_text("012\n")
    with pytest.raises(cli.DataError):
        cli.read_binary_file(str(bad2))


# --- sample ------------------------------------------------------------------


def test_sample_kary_domain_and_determinism(kary_file, capsys):
    assert run(["sample", "--class", "kary", "--data", kary_file,
                "--epsilon", "10", "--seed", "5"]) == 0
    out1 = capsys.readouterr()
    assert out1.out.strip() in {"1", "2"}
    meta = json.loads(out1.err.strip())
    assert meta["sampler"] == "kary-laplace" and meta["k"] == 2
    assert run(["sample", "--class", "kary", "--data", kary_file,
                "--epsilon", "10", "--seed", "5"]) == 0
    out2 = capsys.readouterr()
    assert out1.out == out2.out


def test_sample_missing_epsilon_exits_3(kary_file, capsys):
    assert run(["sample", "--class", "kary", "--data", kary_file]) == 3
    assert "--epsilon" in capsys.readouterr().err


def test_sample_missing_file_exits_2(capsys):
    assert run(["sample", "--class", "kary", "--data", "/nonexistent/x.txt",
                "--epsilon", "1"]) == 2


def test_sample_bounded_product_all_zero_bits(binary_file, capsys):
    # all-zero columns: marginal bias 0.25 per coordinate
    ones = 0
    reps = 400
    for seed in range(reps):
        assert run(["sample", "--class", "bounded-product", "--data", binary_file,
                    "--seed", str(seed)]) == 0
        out = capsys.readouterr().out.strip()
        assert len(out) == 4 and set(out) <= {"0", "1"}
        ones += sum(int(c) for c in out)
    frac = ones / (reps * 4)
    assert abs(frac - 0.25) < 4 * math.sqrt(0.25 * 0.75 / (reps * 4))


def test_sample_product_small_d(tmp_path, capsys):
    from dpsample.samplers import ProdSamplerConfig, records_needed

    d = 4
    cfg = ProdSamplerConfig(rho=1.0, beta=0.2 / (12 * d), constant_scale=0.05)
    need = records_needed(d, cfg)
    rng = np.random.default_rng(0)
    rows = (rng.uniform(size=(need, d)) < 0.5).astype(int)
    path = tmp_path / "p.txt"
    path.write_text("\n".join("".join(map(str, r)) for r in rows) + "\n")
    assert run(["sample", "--class", "product", "--data", str(path),
                "--rho", "1.0", "--alpha", "0.2", "--constant-scale", "0.05",
                "--seed", "1"]) == 0
    out = capsys.readouterr().out.strip()
    assert len(out) == 4 and set(out) <= {"0", "1"}


def test_dps_seed_env_default(kary_file, capsys, monkeypatch):
    monkeypatch.setenv("DPS_SEED", "99")
    assert run(["sample", "--class", "kary", "--data", kary_file,
                "--epsilon", "5"]) == 0
    first = capsys.readouterr()
    assert json.loads(first.err)["seed"] == 99
    monkeypatch.delenv("DPS_SEED")
    assert run(["sample", "--class", "kary", "--data", kary_file,
                "--epsilon", "5", "--seed", "99"]) == 0
    second = capsys.readouterr()
    assert first.out == second.out


# --- sweep / eval ----------------------------------------------------------------


def _sweep_config(tmp_path, **overrides):
    cfg = {
        "class": "kary",
        "dimensions": [4],
        "privacy": [["approx", 1.0]],
        "alphas": [0.2],
        "n_rule": {"explicit": [40]},
        "trials": 2000,
        "seed": 3,
    }
    cfg.update(overrides)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def test_sweep_writes_deterministic_csv(tmp_path):
    cfg = _sweep_config(tmp_path)
    out1 = tmp_path / "r1.csv"
    out2 = tmp_path / "r2.csv"
    assert run(["sweep", "--config", cfg, "--out", str(out1)]) == 0
    assert run(["sweep", "--config", cfg, "--out", str(out2), "--threads", "3"]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    rows = cli.rows_from_csv(out1.read_text())
    assert len(rows) == 1 and rows[0].class_tag == "kary"


def test_csv_round_trip(tmp_path):
    cfg = _sweep_config(tmp_path)
    out = tmp_path / "r.csv"
    assert run(["sweep", "--config", cfg, "--out", str(out)]) == 0
    text = out.read_text()
    rows = cli.rows_from_csv(text)
    assert cli.rows_to_csv(rows) == text


def test_eval_requires_single_cell(tmp_path):
    cfg = _sweep_config(tmp_path, alphas=[0.1, 0.2])
    assert run(["eval", "--config", cfg, "--out", str(tmp_path / "x.csv")]) == 3


def test_unknown_config_key_exits_3(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"class": "kary", "bogus": 1}))
    assert run(["sweep", "--config", path.as_posix(), "--out", "-"]) == 3
    assert "$.bogus" in capsys.readouterr().err


def test_sweep_strict_flags_failures(tmp_path):
    # the clipped sampler at n=2 misses a 0.001 target by a wide margin,
    # so --strict must exit 1; a sane grid exits 0
    cfg = _sweep_config(
        tmp_path,
        **{
            "class": "bounded-product",
            "dimensions": [16],
            "privacy": [["zcdp", 1.0]],
            "alphas": [0.001],
            "n_rule": {"explicit": [2]},
            "trials": 20000,
        },
    )
    assert run(["sweep", "--config", cfg, "--out", str(tmp_path / "s.csv"),
                "--strict"]) == 1
    cfg2 = _sweep_config(tmp_path, alphas=[0.2])
    assert run(["sweep", "--config", cfg2, "--out", str(tmp_path / "ok.csv"),
                "--strict"]) == 0


# --- audit -----------------------------------------------------------------------


def test_audit_clip_csv(tmp_path):
    out = tmp_path / "clip.csv"
    assert run(["audit", "--clip", "--n-max", "50", "--out", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "n,max_ratio,bound"
    assert len(lines) == 51
    for ln in lines[1:]:
        n, ratio, bound = ln.split(",")
        assert float(ratio) <= float(bound) + 1e-12


def test_audit_mc_config(tmp_path):
    cfg = tmp_path / "audit.json"
    cfg.write_text(json.dumps({
        "kind": "mc", "k": 2, "n": 6, "epsilon": 1.0,
        "trials": 20000, "seed": 4, "neighbors": "all-flips",
    }))
    out = tmp_path / "audit.csv"
    assert run(["audit", "--config", str(cfg), "--out", str(out), "--strict"]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0].startswith("pair,symbol")
    assert len(lines) == 1 + 6 * 2
    assert all(ln.endswith(",0") for ln in lines[1:])  # nothing flagged


# --- reduce ----------------------------------------------------------------------


def test_reduce_command(tmp_path):
    cfg = tmp_path / "red.json"
    cfg.write_text(json.dumps({
        "k": 5, "alpha_star": 0.6, "epsilon": 1.0,
        "trials": 800, "seed": 2, "n": 8000,
    }))
    out = tmp_path / "red.csv"
    assert run(["reduce", "--config", str(cfg), "--out", str(out)]) == 0
    rows = cli.rows_from_csv(out.read_text())
    assert rows[0].class_tag == "star"
    assert rows[0].tv_estimate <= 0.36 + rows[0].tv_slack
    out2 = tmp_path / "red2.csv"
    assert run(["reduce", "--config", str(cfg), "--out", str(out2)]) == 0
    assert out.read_bytes() == out2.read_bytes()


def test_eval_trials_zero_exits_3(tmp_path, capsys):
    cfg = _sweep_config(tmp_path, trials=1)
    assert run(["eval", "--config", cfg, "--out", "-", "--trials", "0"]) == 3


def test_sweep_cli_overrides(tmp_path):
    cfg = _sweep_config(tmp_path)
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    assert run(["sweep", "--config", cfg, "--out", str(out1),
                "--seed", "77", "--trials", "500"]) == 0
    rows = cli.rows_from_csv(out1.read_text())
    assert rows[0].seed == 77 and rows[0].trials == 500
    assert run(["sweep", "--config", cfg, "--out", str(out2),
                "--seed", "77", "--trials", "500"]) == 0
    assert out1.read_bytes() == out2.read_bytes()
