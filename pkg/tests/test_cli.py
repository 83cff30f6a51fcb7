import csv

import numpy as np
import pytest

from lecm.lab.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def cache(tmp_path):
    return ["--cache-dir", str(tmp_path / "cache")]


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_ground_state_two_sites_and_cache_hit(capsys, cache):
    code, out, err = run(capsys, "ground-state", "--sites", "2", *cache)
    assert code == 0 and "energy=-0.75" in out and "cache miss" in err
    code2, out2, err2 = run(capsys, "--sites", "2", "ground-state", *cache)
    assert code2 == 0 and out2 == out and "cache hit" in err2


def test_ground_state_majumdar_ghosh(capsys, cache, tmp_path):
    out_csv = tmp_path / "gs.csv"
    code, _, _ = run(capsys, "ground-state", "--sites", "12", "--j2", "0.5", "--boundary", "periodic",
                     "--out", str(out_csv), *cache)
    assert code == 0
    row = read_rows(out_csv)[0]
    assert abs(float(row["energy"]) + 4.5) < 1e-9 and row["boundary"] == "periodic"


def test_eigensolver_failure_exit_code(capsys, cache):
    code, _, err = run(capsys, "ground-state", "--sites", "12", "--max-lanczos-iter", "4", *cache)
    assert code == 3 and "eigensolver" in err


def test_bad_input_exit_codes(capsys, cache, tmp_path):
    assert run(capsys, "ground-state", "--sites", "3", *cache)[0] == 2
    assert run(capsys, "ground-state", "--boundary", "twisted", *cache)[0] == 2
    assert run(capsys, "no-such-command")[0] == 2
    assert run(capsys, "ground-state", "--config", str(tmp_path / "missing.cfg"))[0] == 2


def test_config_file_and_cli_override(capsys, cache, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("sites = 6\nj2 = 0.5\nboundary = periodic\n", encoding="utf-8")
    _, out, _ = run(capsys, "ground-state", "--config", str(cfg), *cache)
    assert "n=6" in out and "energy=-2.25" in out
    _, out, _ = run(capsys, "ground-state", "--config", str(cfg), "--sites", "4", "--j2", "0", *cache)
    assert "n=4" in out and "j2=0 " in out


def test_lecm_sweep_outputs(capsys, cache, tmp_path):
    out_csv = tmp_path / "sweep.csv"
    args = ["lecm-sweep", "--sites", "10", "--j2-values", "0,0.5", "--r-values", "1,2,3",
            "--out", str(out_csv), *cache]
    assert run(capsys, *args)[0] == 0
    rows = read_rows(out_csv)
    assert [(r["j2"], r["R"]) for r in rows] == [("0", "1"), ("0", "3"), ("0.5", "1"), ("0.5", "3")]
    assert (tmp_path / "sweep.log").read_text().startswith("skipped R=2")
    assert (tmp_path / "sweep.gp").exists() and (tmp_path / "sweep.png").stat().st_size > 0
    first = out_csv.read_bytes()
    assert run(capsys, *args)[0] == 0
    assert out_csv.read_bytes() == first


def test_decoupled_baseline_command(capsys, cache, tmp_path):
    out_csv = tmp_path / "base.csv"
    code, out, _ = run(capsys, "decoupled-baseline", "--sites", "8", "--plots", "false",
                       "--out", str(out_csv), *cache)
    assert code == 0 and "residual value" in out
    assert all(abs(float(r["sbar"]) - 0.5) < 1e-10 for r in read_rows(out_csv))


def test_entanglement_length_command(capsys, cache, tmp_path):
    out_csv = tmp_path / "xi.csv"
    code, _, _ = run(capsys, "entanglement-length", "--sites", "14", "--j2-values", "0,0.2",
                     "--r1", "5", "--r2", "9", "--out", str(out_csv), *cache)
    assert code == 0
    rows = read_rows(out_csv)
    assert list(rows[0]) == ["j2", "r1", "r2", "delta1", "delta2", "xi"]
    assert float(rows[0]["xi"]) > 0


def test_check_optimality_canonical_chain(capsys, cache, tmp_path):
    out_csv = tmp_path / "opt.csv"
    code, out, _ = run(capsys, "check-optimality", "--sites", "10", "--r", "3", "--out", str(out_csv), *cache)
    assert code == 0 and "stationary=true" in out
    assert list(read_rows(out_csv)[0]) == ["i", "j", "p_i", "p_j", "sbar1"]


def test_check_optimality_file_basis(capsys, tmp_path):
    good = tmp_path / "comp.npy"
    np.save(good, np.eye(2))
    code, out, _ = run(capsys, "check-optimality", "--demo", "ghz", "--target", "file", "--bsm", str(good),
                       "--out", str(tmp_path / "c.csv"))
    assert code == 0 and "stationary=true" in out
    rot = tmp_path / "rot.npy"
    th = 0.3
    np.save(rot, np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]]))
    _, out, _ = run(capsys, "check-optimality", "--demo", "ghz", "--target", "file", "--bsm", str(rot),
                    "--out", str(tmp_path / "c.csv"))
    assert "stationary=false" in out
    bad = tmp_path / "bad.npy"
    np.save(bad, np.ones((2, 2)))
    assert run(capsys, "check-optimality", "--demo", "ghz", "--target", "file", "--bsm", str(bad))[0] == 2
    (tmp_path / "junk.npy").write_text("not numpy")
    assert run(capsys, "check-optimality", "--demo", "ghz", "--target", "file",
               "--bsm", str(tmp_path / "junk.npy"))[0] == 2
    assert run(capsys, "check-optimality", "--demo", "ghz", "--target", "file")[0] == 2


def test_optimize_demos(capsys, tmp_path):
    out_csv = tmp_path / "ghz.csv"
    code, _, _ = run(capsys, "optimize", "--demo", "ghz", "--out", str(out_csv))
    assert code == 0
    summary = read_rows(out_csv)[0]
    assert abs(float(summary["sbar"]) - 1.0) < 1e-6 and summary["stationary"] == "true"
    bsm = np.load(tmp_path / "ghz_bsm.npy")
    assert np.allclose(bsm.T @ bsm, np.eye(2), atol=1e-12)
    traj = read_rows(tmp_path / "ghz_trajectory.csv")
    assert np.all(np.diff([float(r["sbar"]) for r in traj]) >= -1e-12)
    assert (tmp_path / "ghz_trajectory.gp").exists()

    code, _, _ = run(capsys, "optimize", "--demo", "w", "--start", "canonical", "--out", str(tmp_path / "w.csv"))
    assert code == 0 and float(read_rows(tmp_path / "w.csv")[0]["sbar"]) >= 2 / 3 - 1e-12


def test_optimize_nonconvergence_exit_code(capsys, tmp_path):
    out_csv = tmp_path / "r.csv"
    code, _, err = run(capsys, "optimize", "--demo", "random", "--max-iters", "1", "--out", str(out_csv))
    assert code == 4 and "partial outputs" in err
    assert out_csv.exists() and (tmp_path / "r_bsm.npy").exists()


def test_optimize_dense_limit(capsys, cache):
    assert run(capsys, "optimize", "--sites", "16", "--dense-limit", "64", *cache)[0] == 2
