import json
import subprocess
import sys

import numpy as np
import pytest

from cvtomo import load_dataset, result_from_json
from cvtomo.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_state_summary(capsys):
    code, out, err = run_cli(capsys, "state", "--kind", "thermal", "--lambda", "0.4", "--nc", "6")
    assert code == 0 and err == ""
    lines = dict(line.split(" = ") for line in out.strip().splitlines())
    assert lines["kind"] == "thermal"
    assert lines["dim"] == "7"
    assert float(lines["purity"]) == pytest.approx((1 - 0.16) / (1 + 0.16), abs=1e-4)
    assert float(lines["truncation_error"]) == pytest.approx(0.4**14, rel=1e-4)
    assert float(lines["bloch_norm"]) > 0


def test_state_config_echo_and_reload(capsys, tmp_path):
    out_file = tmp_path / "state.cfg"
    code, out, _ = run_cli(
        capsys, "state", "--kind", "coherent", "--alpha", "1+0.5j", "--nc", "15",
        "--out", str(out_file),
    )
    assert code == 0
    assert f"wrote {out_file}" in out
    code2, out2, _ = run_cli(capsys, "state", "--config", str(out_file))
    assert code2 == 0
    assert "kind = coherent" in out2
    purity_from_file = dict(l.split(" = ") for l in out2.strip().splitlines())["purity"]
    assert float(purity_from_file) == pytest.approx(1.0, abs=1e-9)
    # flags override file values
    code3, out3, _ = run_cli(
        capsys, "state", "--config", str(out_file), "--alpha", "2.2", "--nc", "30"
    )
    assert code3 == 0 and "dim = 31" in out3
    # switching family while the file still carries coherent fields is an error
    code4, _, err4 = run_cli(
        capsys, "state", "--config", str(out_file), "--kind", "fock", "--n", "2"
    )
    assert code4 == 1 and "alpha" in err4


def test_state_truncation_failure_exit_code(capsys):
    code, out, err = run_cli(capsys, "state", "--kind", "thermal", "--lambda", "0.5", "--nc", "2")
    assert code == 1
    assert "error:" in err
    code2, _, _ = run_cli(
        capsys, "state", "--kind", "thermal", "--lambda", "0.5", "--nc", "2",
        "--trunc-bound", "0.02",
    )
    assert code2 == 0


def test_state_random_mixed_seed(capsys):
    code, out, _ = run_cli(
        capsys, "state", "--kind", "random_mixed", "--purity-low", "0.7",
        "--purity-high", "0.9", "--seed", "3", "--nc", "2",
    )
    assert code == 0
    p = float(dict(line.split(" = ") for line in out.strip().splitlines())["purity"])
    assert 0.7 - 1e-6 <= p <= 0.9 + 1e-6


def test_cfi_single_grid(capsys, tmp_path):
    csv_path = tmp_path / "cfi.csv"
    code, out, _ = run_cli(
        capsys, "cfi", "--kind", "thermal", "--lambda", "0.4", "--nc", "2",
        "--modality", "hom", "--copies", "1000", "--csv", str(csv_path),
    )
    assert code == 0
    values = dict(
        line.split(" = ") for line in out.strip().splitlines() if " = " in line
    )
    trace_inv = float(values["trace_inv_cfi"])
    bound = float(values["crlb_frobenius"])
    assert bound == pytest.approx(2 * trace_inv, rel=1e-12)
    text = csv_path.read_text()
    assert text.startswith("metric,value")
    assert "crlb_frobenius" in text


def test_cfi_sweep(capsys, tmp_path):
    csv_path = tmp_path / "sweep.csv"
    code, out, _ = run_cli(
        capsys, "cfi", "--kind", "thermal", "--lambda", "0.4", "--nc", "2",
        "--modality", "hom", "--sweep",
        "--sweep-s", "100,150,200",
        "--sweep-x1=-3,-5,-7",
        "--sweep-dx", "0.5,0.2,0.1",
        "--csv", str(csv_path),
    )
    assert code == 0
    assert out.splitlines()[0] == "S x1 dx trace_inv max_neighbor_pct eligible"
    converged = [line for line in out.splitlines() if line.startswith("converged:")]
    assert len(converged) == 1
    assert converged[0].startswith("converged: S=")
    header = csv_path.read_text().splitlines()[0]
    assert header == "S,x1,dx,trace_inv_cfi,max_neighbor_pct_err,converged"


def test_cfi_numerical_failure_exit_code(capsys):
    # exact density zero on the grid -> degenerate bin -> exit 2
    code, _, err = run_cli(
        capsys, "cfi", "--kind", "fock", "--n", "1", "--nc", "1",
        "--modality", "hom", "--x1", "-6", "--dx", "0.5", "--bins", "25",
        "--s-phases", "4",
    )
    assert code == 2
    assert "error:" in err


def test_simulate_and_mle_round_trip(capsys, tmp_path):
    data = tmp_path / "run.dat"
    counts_csv = tmp_path / "counts.csv"
    code, out, _ = run_cli(
        capsys, "simulate", "--kind", "thermal", "--lambda", "0.4", "--nc", "2",
        "--modality", "hom", "--copies", "100000", "--seed", "7",
        "--x1", "-7", "--dx", "0.2", "--bins", "71", "--s-phases", "10",
        "--out", str(data), "--csv", str(counts_csv),
    )
    assert code == 0
    assert f"wrote {data}" in out
    dataset, grid, dim = load_dataset(data)
    assert dataset.copies == 100_000 and dataset.seed == 7
    assert dim == 3 and grid.n_phases == 10
    assert counts_csv.read_text().startswith("phase,bin_index,count")

    result_json = tmp_path / "mle.json"
    code2, out2, _ = run_cli(
        capsys, "mle", "--data", str(data), "--out", str(result_json)
    )
    assert code2 == 0
    summary = dict(
        line.split(" = ") for line in out2.strip().splitlines() if " = " in line
    )
    assert summary["dim"] == "3"
    assert summary["converged"] == "true"
    result = result_from_json(result_json.read_text())
    assert result.rho_hat.dim == 3
    assert result.converged


def test_simulate_checkpoints_multi_file(capsys, tmp_path):
    out = tmp_path / "chk.dat"
    code, stdout, _ = run_cli(
        capsys, "simulate", "--kind", "thermal", "--lambda", "0.4", "--nc", "2",
        "--modality", "het", "--checkpoints", "500,1000,4000", "--seed", "3",
        "--x1", "-7", "--dx", "0.2", "--bins", "71",
        "--out", str(out),
    )
    assert code == 0
    names = [tmp_path / f"chk_K{k}.dat" for k in (500, 1000, 4000)]
    for name in names:
        assert name.is_file()
    small = load_dataset(names[0])[0]
    large = load_dataset(names[2])[0]
    assert np.all(large.counts >= small.counts)


def test_simulate_usage_errors(capsys, tmp_path):
    code, _, err = run_cli(
        capsys, "simulate", "--kind", "thermal", "--lambda", "0.4", "--nc", "2",
        "--modality", "hom", "--copies", "12345",
        "--out", str(tmp_path / "x.dat"),
    )
    assert code == 1  # not divisible by the 100 default phases
    code2, _, _ = run_cli(
        capsys, "simulate", "--kind", "thermal", "--lambda", "0.4", "--nc", "2",
        "--modality", "hom", "--out", str(tmp_path / "y.dat"),
    )
    assert code2 == 1  # neither --copies nor --checkpoints


def test_mle_honors_config_tolerances(capsys, tmp_path):
    data = tmp_path / "run.dat"
    run_cli(
        capsys, "simulate", "--kind", "thermal", "--lambda", "0.4", "--nc", "2",
        "--modality", "het", "--copies", "20000", "--seed", "1",
        "--x1", "-7", "--dx", "0.2", "--bins", "71",
        "--out", str(data),
    )
    cfg = tmp_path / "solver.cfg"
    cfg.write_text("mle_max_iters = 2\nmle_ll_tol = 1e-10\n")
    code, out, _ = run_cli(capsys, "mle", "--data", str(data), "--config", str(cfg))
    assert code == 0
    summary = dict(line.split(" = ") for line in out.strip().splitlines())
    assert summary["iterations"] == "2"
    assert summary["converged"] == "false"
    code2, out2, _ = run_cli(
        capsys, "mle", "--data", str(data), "--max-iters", "3"
    )
    assert dict(l.split(" = ") for l in out2.strip().splitlines())["iterations"] == "3"


def _campaign_text(out_dir, extra=""):
    return (
        "kind = thermal\n"
        "lambda = 0.4\n"
        "n_c = 2\n"
        "modalities = hom, het\n"
        "k_max = 2000\n"
        "checkpoints = 1000, 2000\n"
        "trials = 2\n"
        "seed = 5\n"
        "save_datasets = none\n"
        f"output_dir = {out_dir}\n" + extra
    )


def test_bench_end_to_end(capsys, tmp_path):
    cfg = tmp_path / "campaign.cfg"
    out_dir = tmp_path / "report"
    cfg.write_text(_campaign_text(out_dir))
    code, out, _ = run_cli(capsys, "bench", "--config", str(cfg))
    assert code == 0
    assert "hom: K=2000" in out and "het: K=2000" in out
    assert f"report in {out_dir}" in out
    for name in ("errors_hom.csv", "errors_het.csv", "errors.png", "manifest.json"):
        assert (out_dir / name).is_file()
    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert manifest["campaign"]["seed"] == 5


def test_bench_flag_overrides_and_rerun(capsys, tmp_path):
    cfg = tmp_path / "campaign.cfg"
    cfg.write_text(_campaign_text(tmp_path / "ignored"))
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli(capsys, "bench", "--config", str(cfg), "--out", str(a), "--seed", "9")[0] == 0
    assert run_cli(capsys, "bench", "--config", str(cfg), "--out", str(b), "--seed", "9", "--threads", "2")[0] == 0
    assert (a / "errors_hom.csv").read_bytes() == (b / "errors_hom.csv").read_bytes()
    assert (a / "errors_het.csv").read_bytes() == (b / "errors_het.csv").read_bytes()
    # different seed, different draws
    c = tmp_path / "c"
    assert run_cli(capsys, "bench", "--config", str(cfg), "--out", str(c), "--seed", "10")[0] == 0
    assert (a / "errors_hom.csv").read_bytes() != (c / "errors_hom.csv").read_bytes()


def test_bench_desk_scale_gate(capsys, tmp_path):
    cfg = tmp_path / "campaign.cfg"
    out_dir = tmp_path / "report"
    cfg.write_text(
        "kind = thermal\nlambda = 0.4\nn_c = 2\n"
        "k_max = 20000000\n"
        f"output_dir = {out_dir}\n"
    )
    code, _, err = run_cli(capsys, "bench", "--config", str(cfg))
    assert code == 1
    assert "--full-scale" in err
    assert not out_dir.exists()


def test_wigner_command(capsys, tmp_path):
    csv_path = tmp_path / "w.csv"
    png_path = tmp_path / "w.png"
    code, out, _ = run_cli(
        capsys, "wigner", "--kind", "fock", "--n", "1", "--nc", "3",
        "--span", "4", "--points", "32",
        "--out", str(csv_path), "--png", str(png_path),
    )
    assert code == 0
    values = dict(
        line.split(" = ") for line in out.strip().splitlines() if " = " in line
    )
    assert float(values["min"]) < 0  # Fock |1> is negative at the origin
    assert csv_path.read_text().startswith("x,p,w")
    assert png_path.stat().st_size > 0
    code2, _, _ = run_cli(
        capsys, "wigner", "--kind", "fock", "--n", "0", "--nc", "3", "--points", "8",
        "--out", str(csv_path),
    )
    assert code2 == 1


def test_usage_error_exit_codes(capsys):
    assert run_cli(capsys, "unknown-command")[0] == 1
    assert run_cli(capsys, "cfi", "--kind", "thermal", "--lambda", "0.4")[0] == 1
    assert run_cli(capsys, "--help")[0] == 0
    assert run_cli(capsys, "state", "--kind", "not-a-kind")[0] == 1


def test_missing_file_exit_code(capsys, tmp_path):
    assert run_cli(capsys, "mle", "--data", str(tmp_path / "nope.dat"))[0] == 1
    assert run_cli(capsys, "bench", "--config", str(tmp_path / "nope.cfg"))[0] == 1


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "cvtomo.cli", "state", "--kind", "fock", "--n", "2", "--nc", "4"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "purity = 1" in proc.stdout
