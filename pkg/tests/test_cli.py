import json
import math

import numpy as np
import pytest

from eqboot.cli import main
from eqboot.io import read_pgm


def write_cfg(tmp_path, **over):
    cfg = {
        "problem": "compressed_sensing",
        "image_shape": [4, 4],
        "operator": {"m": 8},
        "noise": {"sigma": 0.1},
        "signal": {"k": 1, "cutoff": 1.0},
        "group": {"max_shift": 1},
        "bootstrap": {"n_samples": 20},
        "levels": [0.5, 0.9],
        "n_trials": 6,
        "master_seed": 3,
        "output_dir": str(tmp_path / "out"),
    }
    cfg.update(over)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def test_coverage_writes_artifacts(tmp_path, capsys):
    path = write_cfg(tmp_path)
    assert main(["coverage", str(path)]) == 0
    out = tmp_path / "out"
    lines = (out / "coverage.csv").read_text().splitlines()
    assert lines[0] == "method,level,empirical,n_trials"
    assert {ln.split(",")[0] for ln in lines[1:]} == {"naive", "equivariant"}
    assert (out / "coverage.svg").read_text().startswith("<svg")
    echo = json.loads((out / "config_echo.json").read_text())
    assert echo["bootstrap"]["error_mode"] == "forward"
    # the echo alone reproduces the run
    rerun = tmp_path / "echo.json"
    echo["output_dir"] = str(tmp_path / "out2")
    rerun.write_text(json.dumps(echo))
    assert main(["coverage", str(rerun)]) == 0
    assert (tmp_path / "out2" / "coverage.csv").read_bytes() == (out / "coverage.csv").read_bytes()


def test_missing_config_exit_2(tmp_path, capsys):
    missing = tmp_path / "nowhere.json"
    assert main(["coverage", str(missing)]) == 2
    assert "nowhere.json" in capsys.readouterr().err


def test_invalid_config_exit_2(tmp_path, capsys):
    path = write_cfg(tmp_path, bootstrap={"n_samples": -1})
    assert main(["coverage", str(path)]) == 2
    assert "bootstrap.n_samples" in capsys.readouterr().err


def test_singular_system_exit_3(tmp_path, capsys):
    path = write_cfg(tmp_path, problem="inpainting", operator={"p": 0.5}, estimator={"kind": "exact_inverse"})
    assert main(["coverage", str(path)]) == 3
    assert "singular" in capsys.readouterr().err


def test_theory_defaults_pass(capsys):
    assert main(["theory"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "bias identity" in out


def test_theory_trivial_group(capsys):
    assert main(["theory", "--n", "8", "--group", "trivial", "--instances", "20"]) == 0
    assert "trivial group" in capsys.readouterr().out


def test_theory_injected_error_exit_1(capsys):
    assert main(["theory", "--instances", "5", "--inject-lhs-error"]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_theory_rejects_large_n(capsys):
    assert main(["theory", "--n", "100"]) == 2


def test_pixelmap_outputs(tmp_path):
    path = write_cfg(tmp_path)
    assert main(["pixelmap", str(path)]) == 0
    out = tmp_path / "out"
    for name in ("x_star", "x_hat", "std_map", "true_abs_err"):
        ints = read_pgm(out / f"{name}.pgm")
        assert ints.shape == (4, 4)
        scale = json.loads((out / f"{name}.json").read_text())
        assert scale["maxval"] == 65535
    float((out / "spearman.txt").read_text())


def test_pixelmap_noiseless_perfect_estimator_nan(tmp_path):
    path = write_cfg(tmp_path, operator={"m": 16}, noise={"sigma": 0.0}, estimator={"kind": "exact_inverse"},
                     group={"max_shift": 0})
    assert main(["pixelmap", str(path)]) == 0
    assert (tmp_path / "out" / "spearman.txt").read_text().strip() == "nan"
    assert read_pgm(tmp_path / "out" / "std_map.pgm").max() == 0


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="circular blur with a stationary signal law gives a nearly "
                   "flat std map; measured rank correlation is about 0.04 (see decisions ledger)")
def test_pixelmap_deblur_std_tracks_error(tmp_path):
    from eqboot.config import bundled_config_path

    out = tmp_path / "pm"
    assert main(["pixelmap", str(bundled_config_path("deblur_fig5.json")), "--output-dir", str(out)]) == 0
    assert float((out / "spearman.txt").read_text()) >= 0.3


def test_bootstrap_dump(tmp_path):
    path = write_cfg(tmp_path)
    assert main(["bootstrap", str(path)]) == 0
    out = tmp_path / "out"
    res = json.loads((out / "result.json").read_text())
    assert len(res["errors"]) == 20 and len(res["elements"]) == 20
    assert np.load(out / "recons.npy").shape == (20, 16)
    assert not any(math.isnan(e) for e in res["errors"])


def test_output_dir_override(tmp_path):
    path = write_cfg(tmp_path)
    assert main(["coverage", str(path), "--output-dir", str(tmp_path / "elsewhere")]) == 0
    assert (tmp_path / "elsewhere" / "coverage.csv").exists()


def test_configs_export(tmp_path, capsys):
    assert main(["configs"]) == 0
    assert "deblur_fig5.json" in capsys.readouterr().out
    assert main(["configs", "--export", str(tmp_path / "cfgs")]) == 0
    assert (tmp_path / "cfgs" / "deblur_fig5.json").exists()


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
