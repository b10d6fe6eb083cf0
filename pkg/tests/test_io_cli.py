import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mmsd.cli import EXIT_IO, EXIT_OK, EXIT_USAGE, main
from mmsd.hyperspectral import HyperCube, NonlinearityMap
from mmsd.io import FormatError, read_cube, read_map, write_cube, write_map


def _cube(rng, w=3, h=2, n=4):
    return HyperCube(rng.random((w * h, n)), w, h)


def test_cube_round_trip(tmp_path, rng):
    cube = _cube(rng)
    path = tmp_path / "c.f64"
    write_cube(path, cube)
    back, meta = read_cube(path)
    assert np.array_equal(back.pixels, cube.pixels)
    assert (back.width, back.height) == (3, 2)
    assert meta["dtype"] == "f64le" and meta["layout"] == "pixel-major"
    assert path.stat().st_size == 6 * 4 * 8


def test_cube_bytes_are_little_endian_pixel_major(tmp_path):
    cube = HyperCube(np.array([[1.0, 2.0], [3.0, 4.0]]), 2, 1)
    path = tmp_path / "c.f64"
    write_cube(path, cube)
    assert np.array_equal(np.frombuffer(path.read_bytes(), dtype="<f8"), [1.0, 2.0, 3.0, 4.0])


@settings(max_examples=20)
@given(st.sampled_from(["width", "height", "bands", "dtype", "layout"]),
       st.one_of(st.none(), st.just(-1), st.just("x"), st.just(7)))
def test_bad_sidecar_names_field(tmp_path_factory, field, value):
    tmp = tmp_path_factory.mktemp("cube")
    cube = _cube(np.random.default_rng(0))
    path = tmp / "c.f64"
    write_cube(path, cube)
    meta = json.loads((tmp / "c.f64.json").read_text())
    if value is None:
        del meta[field]
    else:
        meta[field] = value
    (tmp / "c.f64.json").write_text(json.dumps(meta))
    with pytest.raises(FormatError) as exc:
        read_cube(path)
    # a wrong size in one dimension is reported against the byte count
    assert exc.value.field in (field, "bands")


def test_truncated_data_rejected(tmp_path, rng):
    path = tmp_path / "c.f64"
    write_cube(path, _cube(rng))
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(FormatError, match="bands"):
        read_cube(path)


def test_map_round_trip(tmp_path):
    nmap = NonlinearityMap(np.array([[0.0, 0.5], [1.25, 4.0]]), 0.5, 4, 2, 1e-3)
    path = tmp_path / "m.csv"
    write_map(path, nmap)
    back = read_map(path)
    assert np.array_equal(back.values, nmap.values)
    assert path.read_text().splitlines()[0] == "c0,c1"


def test_cli_priors_and_usage_errors(tmp_path, capsys):
    out = tmp_path / "p"
    assert main(["priors", "--kappa-grid", "0,10", "--n-draws", "10", "--n", "6", "--p", "2",
                 "--hist-kappa", "10", "--out-dir", str(out), "--threads", "1"]) == EXIT_OK
    assert (out / "priors_afe.csv").exists() and (out / "priors_angles_vmf.csv.json").exists()
    assert main(["priors", "--kappa-grid", "", "--out-dir", str(out)]) == EXIT_USAGE
    assert "empty" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["priors", "--no-such-flag"])
    assert exc.value.code == EXIT_USAGE


def test_cli_unknown_estimator_lists_valid(tmp_path, capsys):
    assert main(["sweep", "--estimators", "mmsd_mcmc,bogus", "--out-dir", str(tmp_path)]) == EXIT_USAGE
    err = capsys.readouterr().err
    assert "bogus" in err and "mmsd_closed" in err and "prior_only" in err


def test_cli_bad_seed_and_config(tmp_path):
    assert main(["priors", "--seed", "-1", "--out-dir", str(tmp_path)]) == EXIT_USAGE
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"unknown_key": 1}))
    assert main(["priors", "--config", str(cfg), "--out-dir", str(tmp_path)]) == EXIT_USAGE
    cfg.write_text("{not json")
    assert main(["priors", "--config", str(cfg), "--out-dir", str(tmp_path)]) == EXIT_IO
    assert main(["priors", "--config", str(tmp_path / "missing.json")]) == EXIT_IO


def test_cli_sweep_sidecar_round_trip(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["sweep", "--n", "6", "--p", "2", "--n-trials", "2", "--n-r", "15", "--grid", "2,3",
            "--prior-burnin", "5", "--seed", "9"]
    assert main(args + ["--out-dir", str(a), "--threads", "1"]) == EXIT_OK
    side = json.loads((a / "sweep.csv.json").read_text())
    assert side["config"]["seed"] == 9 and side["config"]["grid"] == [2.0, 3.0]
    assert main(["sweep", "--config", str(a / "sweep.csv.json"), "--out-dir", str(b)]) == EXIT_OK
    assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()


def test_cli_covariance_sweep(tmp_path):
    assert main(["sweep", "--model", "covariance", "--snr-lo-db", "5", "--snr-hi-db", "10", "--n", "6",
                 "--p", "2", "--n-trials", "1", "--n-r", "10", "--grid", "3", "--out-dir", str(tmp_path),
                 "--threads", "1"]) == EXIT_OK
    side = json.loads((tmp_path / "sweep.csv.json").read_text())
    assert side["sweep_config"]["model"] == "covariance"
    assert main(["sweep", "--model", "covariance", "--sweep", "SNR", "--out-dir", str(tmp_path)]) == EXIT_USAGE


def test_cli_hyper_pipeline(tmp_path):
    assert main(["hyper-synth", "--width", "8", "--height", "8", "--bands", "12",
                 "--out-dir", str(tmp_path)]) == EXIT_OK
    cube, meta = read_cube(tmp_path / "cube.f64")
    assert cube.n_pixels == 64 and meta["config"]["width"] == 8
    assert main(["hyper-analyze", "--cube", str(tmp_path / "cube.f64"), "--eta", "0,0.5,50",
                 "--out-dir", str(tmp_path), "--threads", "1"]) == EXIT_OK
    for tag in ("0", "0.5", "50"):
        m = read_map(tmp_path / f"map_eta_{tag}.csv")
        assert m.values.shape == (8, 8)
    assert main(["hyper-synth", "--width", "7", "--out-dir", str(tmp_path)]) == EXIT_USAGE


def test_cli_hyper_analyze_io_errors(tmp_path, capsys):
    assert main(["hyper-analyze", "--cube", str(tmp_path / "nope.f64")]) == EXIT_IO
    (tmp_path / "bad.f64").write_bytes(b"\x00" * 16)
    (tmp_path / "bad.f64.json").write_text(json.dumps({"width": 1, "height": 1, "bands": 2,
                                                        "dtype": "f32", "layout": "pixel-major"}))
    assert main(["hyper-analyze", "--cube", str(tmp_path / "bad.f64")]) == EXIT_IO
    assert "dtype" in capsys.readouterr().err
    assert main(["hyper-analyze", "--out-dir", str(tmp_path)]) == EXIT_USAGE


def test_cli_diagnostics(tmp_path):
    assert main(["diagnostics", "--n", "5", "--p", "2", "--n-r", "30", "--out-dir", str(tmp_path)]) == EXIT_OK
    lines = (tmp_path / "diagnostics_trace.csv").read_text().splitlines()
    assert lines[0] == "sample,log_density,d2_to_iam,d2_to_truth" and len(lines) == 31
    assert main(["diagnostics", "--model", "covariance", "--n", "5", "--p", "2", "--n-r", "20",
                 "--out-dir", str(tmp_path / "c")]) == EXIT_OK
    assert main(["diagnostics", "--prior-kind", "cauchy", "--out-dir", str(tmp_path)]) == EXIT_USAGE
