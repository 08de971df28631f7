import csv

import pytest
import yaml

from inhomssa.simulator import cli

BIRTH_DEATH = {
    'name': 'birth-death',
    'time_unit': 'h',
    'species': ['M'],
    'initial': {'M': 0},
    'horizon': '2h',
    'parameters': {'birth': 5, 'amplitude': 2, 'decay': 1},
    'channels': [
        {'label': 'birth', 'products': {'M': 1},
         'rate': {'sinusoid': {'base': 'birth', 'amplitude': 'amplitude', 'period': 4}}},
        {'label': 'death', 'reactants': {'M': 1}, 'rate': 'decay'},
    ],
}


@pytest.fixture
def model_file(tmp_path):
    path = tmp_path / "birth_death.yaml"
    path.write_text(yaml.safe_dump(BIRTH_DEATH))
    return str(path)


def run(args, out):
    return cli.main(args + ["--out", str(out), "--log-level", "WARNING"])


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


def test_simulate_writes_report_and_manifest(model_file, tmp_path):
    out = tmp_path / "out"
    code = run(["simulate", "--model-file", model_file, "--n", "40", "--prefix", "sim"], out)
    assert code == cli.EXIT_OK
    rows = read_rows(out / "sim_report.csv")
    assert rows[0] == ["quantity", "estimate", "variance", "half_width", "n", "rv_count"]
    assert rows[1][0] == "M(2.0)"
    assert rows[1][4] == "40"
    assert (out / "sim_path_0.csv").exists()
    manifest = yaml.safe_load((out / "sim_run.yaml").read_text())
    assert manifest['command'] == 'simulate'
    assert manifest['model'] == 'birth-death'
    assert manifest['horizon'] == 2.0
    assert manifest['files'][0] == 'sim_report.csv'


def test_simulate_is_reproducible(model_file, tmp_path):
    args = ["simulate", "--model-file", model_file, "--n", "60", "--seed", "11", "--prefix", "sim"]
    assert run(args + ["--workers", "1"], tmp_path / "a") == cli.EXIT_OK
    assert run(args + ["--workers", "1"], tmp_path / "b") == cli.EXIT_OK
    assert run(args + ["--workers", "2"], tmp_path / "c") == cli.EXIT_OK
    first = (tmp_path / "a" / "sim_report.csv").read_bytes()
    assert (tmp_path / "b" / "sim_report.csv").read_bytes() == first
    assert (tmp_path / "c" / "sim_report.csv").read_bytes() == first


def test_record_timing_adds_column(model_file, tmp_path):
    out = tmp_path / "out"
    code = run(["simulate", "--model-file", model_file, "--n", "5", "--prefix", "t", "--record-timing"], out)
    assert code == cli.EXIT_OK
    assert read_rows(out / "t_report.csv")[0][-1] == "wall_seconds"


def test_couple_writes_variance_curve_and_pair(model_file, tmp_path):
    out = tmp_path / "out"
    code = run(["couple", "--model-file", model_file, "--perturb", "amplitude=0.5", "--coupling", "stacked",
                "--n", "20", "--prefix", "cp"], out)
    assert code == cli.EXIT_OK
    curve = read_rows(out / "cp_variance.csv")
    assert curve[0] == ["time", "estimate", "variance", "half_width"]
    assert len(curve) == 1 + 101
    assert float(curve[1][0]) == 0.0
    assert float(curve[-1][0]) == pytest.approx(2.0)
    pair = read_rows(out / "cp_pair_0.csv")
    assert pair[0] == ["time", "M_X", "M_Z"]
    assert pair[1][1:] == ["0", "0"]


def test_sensitivity_and_mlmc_from_config(model_file, tmp_path):
    out = tmp_path / "out"
    config = tmp_path / "run.yaml"
    config.write_text(yaml.safe_dump({
        'experiment': {'model_file': model_file, 'seed': 3},
        'sensitivity': {'param': 'birth', 'h': 0.5, 'n': 30, 'species': 'M'},
        'mlmc': {'M': 2, 'levels': [1, 2], 'target_sd': 0.5, 'pilot': 20, 'species': ['M']},
    }))
    assert run(["sensitivity", "--config", str(config), "--prefix", "sens"], out) == cli.EXIT_OK
    rows = read_rows(out / "sens_report.csv")
    assert rows[1][4] == "30"

    assert run(["mlmc", "--config", str(config), "--prefix", "ml"], out) == cli.EXIT_OK
    rows = read_rows(out / "ml_report.csv")
    # per-level rows precede the total
    assert [row[0] for row in rows[1:]][-1] == "M(2.0)"
    assert len(rows) > 2


def test_flags_override_config(model_file, tmp_path):
    config = tmp_path / "run.yaml"
    config.write_text(yaml.safe_dump({'experiment': {'model_file': model_file}, 'simulate': {'n': 1000}}))
    out = tmp_path / "out"
    assert run(["simulate", "--config", str(config), "--n", "7", "--prefix", "o"], out) == cli.EXIT_OK
    assert read_rows(out / "o_report.csv")[1][4] == "7"


def test_configuration_errors_exit_with_two(model_file, tmp_path):
    out = tmp_path / "out"
    assert run(["simulate", "--model", "no-such-model", "--n", "5"], out) == cli.EXIT_CONFIG
    assert run(["simulate", "--config", str(tmp_path / "absent.yaml")], out) == cli.EXIT_CONFIG
    assert run(["couple", "--model-file", model_file, "--perturb", "gamma=0.1", "--n", "5"], out) == cli.EXIT_CONFIG
    assert run(["simulate", "--model-file", model_file, "--n", "0"], out) == cli.EXIT_CONFIG


def test_parser_rejects_bad_flags():
    parser = cli.build_parser()
    with pytest.raises(SystemExit):
        parser.parse_args(["mlmc", "--levels", "3"])
    with pytest.raises(SystemExit):
        parser.parse_args(["optimize"])
    args = parser.parse_args(["mlmc", "--levels", "1,3", "--exact-channels", "6, 2"])
    assert args.levels == [1, 3]
    assert args.exact_channels == [6, 2]


def test_out_may_name_the_report_csv(model_file, tmp_path):
    report = tmp_path / "runs" / "birth.csv"
    code = cli.main(["simulate", "--model-file", model_file, "--n", "5", "--out", str(report),
                     "--log-level", "WARNING"])
    assert code == cli.EXIT_OK
    assert read_rows(report)[1][4] == "5"
    manifest = yaml.safe_load((tmp_path / "runs" / "birth_run.yaml").read_text())
    assert manifest['files'][0] == 'birth.csv'
    assert (tmp_path / "runs" / "birth_path_0.csv").exists()


def test_sensitivity_target_sd_flag(model_file, tmp_path):
    out = tmp_path / "out"
    code = run(["sensitivity", "--model-file", model_file, "--param", "birth", "--h", "0.5",
                "--coupling", "independent", "--target-sd", "0.4", "--prefix", "sd"], out)
    assert code == cli.EXIT_OK
    rows = read_rows(out / "sd_report.csv")
    assert int(rows[1][4]) > 100
    assert float(rows[1][2]) / int(rows[1][4]) <= 0.4 ** 2
    manifest = yaml.safe_load((out / "sd_run.yaml").read_text())
    assert manifest['reports'][0]['converged'] is True
    assert manifest['config']['sensitivity']['target_sd'] == 0.4


def test_model_error_during_run_exits_with_three(tmp_path):
    # conversion is driven by B but consumes A, which starts empty
    model = {
        'name': 'starved',
        'species': ['A', 'B'],
        'initial': {'A': 0, 'B': 1},
        'horizon': 5,
        'channels': [
            {'label': 'conversion', 'kinetics': 'population', 'species': ['B'], 'reactants': {'A': 1},
             'rate': 10},
        ],
    }
    path = tmp_path / "starved.yaml"
    path.write_text(yaml.safe_dump(model))
    assert run(["simulate", "--model-file", str(path), "--n", "3"], tmp_path / "out") == cli.EXIT_SIMULATION
