import csv
import json
import math
import subprocess
import sys

import numpy as np

from dfrcopt import save_config, table1
from dfrcopt.cli import main as cli_main
from dfrcopt.experiments import (
    EXIT_OK,
    ExperimentSpec,
    derive_seed,
    run_experiment,
)

from conftest import small_scenario


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, list(reader)


def fast_base(**over):
    # small arrays keep experiment tests quick
    params = dict(k=2, n_tx=4, n_rx=4, i_count=2, j_count=2,
                  target_angles=(math.radians(20.0), math.radians(40.0)))
    params.update(over)
    return small_scenario(**params)


class TestRunExperiment:
    def test_scnr_vs_gamma_rows_complete(self, tmp_path):
        spec = ExperimentSpec(
            kind="scnr_vs_gamma", base_config=fast_base(), output_dir=tmp_path,
            n_seeds=2, seed_base=3,
            sweep={"gamma_db": [0.0, 10.0], "n": [4]})
        code, paths = run_experiment(spec)
        assert code == EXIT_OK
        header, rows = read_csv(paths[0])
        assert header == ["gamma_db", "n", "seed", "scnr_db", "iters", "status"]
        assert len(rows) == 4  # 2 gammas x 1 n x 2 seeds
        seeds = {int(r[2]) for r in rows}
        assert seeds == {derive_seed(3, 0), derive_seed(3, 1)}
        assert all(r[5] in ("converged", "max-iters") for r in rows)

    def test_convergence_traces_monotone(self, tmp_path):
        spec = ExperimentSpec(
            kind="convergence", base_config=fast_base(), output_dir=tmp_path,
            n_seeds=1, sweep={"gamma_db": [5.0]})
        code, paths = run_experiment(spec)
        assert code == EXIT_OK
        header, rows = read_csv(paths[0])
        values = [float(r[header.index("objective")]) for r in rows]
        diffs = np.diff(values)
        assert np.all(diffs >= -1e-6 * (1.0 + np.abs(values[:-1])))

    def test_byte_identical_rerun(self, tmp_path):
        for kind, sweep in (
            ("convergence", {"gamma_db": [5.0]}),
            ("scnr_vs_gamma", {"gamma_db": [10.0], "n": [4]}),
            ("beampattern", {"source": "proposed"}),
            ("baseline_audit", {"iters": 2}),
        ):
            out_a = tmp_path / f"{kind}_a"
            out_b = tmp_path / f"{kind}_b"
            for out in (out_a, out_b):
                spec = ExperimentSpec(kind=kind, base_config=fast_base(),
                                      output_dir=out, n_seeds=2, sweep=dict(sweep),
                                      grid_points=91)
                run_experiment(spec)
            csv_a = (out_a / f"{kind}.csv").read_bytes()
            csv_b = (out_b / f"{kind}.csv").read_bytes()
            assert csv_a == csv_b, f"{kind} CSV not reproducible"
            man_a = json.loads((out_a / f"{kind}.manifest.json").read_text())
            man_b = json.loads((out_b / f"{kind}.manifest.json").read_text())
            man_a.pop("wall_time_s")
            man_b.pop("wall_time_s")
            assert man_a == man_b

    def test_beampattern_row_count_and_sources(self, tmp_path):
        spec = ExperimentSpec(
            kind="beampattern", base_config=fast_base(), output_dir=tmp_path,
            n_seeds=1, sweep={"source": "dedicated:0"}, grid_points=721)
        code, paths = run_experiment(spec)
        assert code == EXIT_OK
        header, rows = read_csv(paths[0])
        assert header == ["angle_deg", "gain_db", "source", "seed", "status"]
        assert len(rows) == 721
        assert all(r[2] == "dedicated:0" for r in rows)
        assert all(r[4] in ("converged", "max-iters") for r in rows)

    def test_dedicated_pattern_peaks_at_target(self, tmp_path):
        base = fast_base(j_count=0)
        spec = ExperimentSpec(
            kind="beampattern", base_config=base, output_dir=tmp_path,
            n_seeds=1, sweep={"source": "dedicated:0"}, grid_points=361)
        _, paths = run_experiment(spec)
        header, rows = read_csv(paths[0])
        angles = np.array([float(r[0]) for r in rows])
        gains = np.array([float(r[1]) for r in rows])
        peak_angle = angles[int(np.argmax(gains))]
        target_deg = math.degrees(base.target_angles[0])
        assert abs(peak_angle - target_deg) <= abs(angles[1] - angles[0])

    def test_dedicated_compare_schema(self, tmp_path):
        spec = ExperimentSpec(
            kind="dedicated_compare", base_config=fast_base(), output_dir=tmp_path,
            n_seeds=1)
        code, paths = run_experiment(spec)
        assert code == EXIT_OK
        header, rows = read_csv(paths[0])
        assert header == ["target_deg", "proposed_gain_db", "dedicated_gain_db",
                          "gap_db", "within_margin", "seed", "status"]
        assert len(rows) == 2
        manifest = json.loads(paths[1].read_text())
        assert manifest["summary"]["margin_db"] == 3.0

    def test_baseline_audit_schema_and_summary(self, tmp_path):
        spec = ExperimentSpec(
            kind="baseline_audit", base_config=fast_base(), output_dir=tmp_path,
            n_seeds=2, sweep={"iters": 2})
        code, paths = run_experiment(spec)
        header, rows = read_csv(paths[0])
        assert header == ["seed", "iter", "f_value", "violation", "rank_gap",
                          "repaired", "status"]
        assert len(rows) == 4
        manifest = json.loads(paths[1].read_text())
        assert 0.0 <= manifest["summary"]["violation_fraction"] <= 1.0

    def test_i_sweep_summary(self, tmp_path):
        spec = ExperimentSpec(
            kind="i_sweep", base_config=fast_base(), output_dir=tmp_path,
            n_seeds=1, sweep={"i_values": [2, 3], "lo_deg": 15.0, "hi_deg": 50.0})
        code, paths = run_experiment(spec)
        assert code == EXIT_OK
        manifest = json.loads(paths[1].read_text())
        assert "relative_scnr_spread" in manifest["summary"]

    def test_sensitivity_sweep(self, tmp_path):
        spec = ExperimentSpec(
            kind="sensitivity", base_config=fast_base(), output_dir=tmp_path,
            n_seeds=1, sweep={"inner_s": [1, 3]})
        code, paths = run_experiment(spec)
        assert code == EXIT_OK
        header, rows = read_csv(paths[0])
        assert header == ["param", "value", "seed", "scnr_db", "objective",
                          "iters", "status"]
        assert [r[0] for r in rows] == ["inner_s", "inner_s"]
        assert [float(r[1]) for r in rows] == [1.0, 3.0]

    def test_failed_rows_are_kept(self, tmp_path):
        # thresholds far above the power budget: every run is infeasible
        base = fast_base(gamma_db=60.0, p_max_dbm=-60.0)
        spec = ExperimentSpec(kind="scnr_vs_gamma", base_config=base,
                              output_dir=tmp_path, n_seeds=2,
                              sweep={"gamma_db": [60.0], "n": [4]})
        code, paths = run_experiment(spec)
        assert code == 3
        header, rows = read_csv(paths[0])
        assert len(rows) == 2
        assert all(r[5].startswith("failed-") for r in rows)


class TestCli:
    def test_validate_config_ok(self, tmp_path, capsys):
        path = tmp_path / "cfg.json"
        save_config(table1(), path)
        assert cli_main(["validate-config", "--config", str(path)]) == 0
        assert "K=4" in capsys.readouterr().out

    def test_validate_config_error(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert cli_main(["validate-config", "--config", str(path)]) == 2
        assert "config error" in capsys.readouterr().err

    def test_run_subcommand(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        save_config(fast_base(), cfg_path)
        code = cli_main([
            "run", "--kind", "convergence", "--config", str(cfg_path),
            "--out", str(tmp_path / "out"), "--seeds", "1",
            "--sweep", "gamma_db=5"])
        assert code == 0
        assert (tmp_path / "out" / "convergence.csv").exists()

    def test_console_entrypoint(self, tmp_path):
        result = subprocess.run(
            [sys.executable, "-m", "dfrcopt.cli", "validate-config",
             "--config", "table1"],
            capture_output=True, text=True)
        assert result.returncode == 0
        assert "ok:" in result.stdout
