import csv
import json

import numpy as np
import pytest

from grim.cli import main
from grim.ir import load_model_dir, save_model_dir
from grim.zoo import make_mlp, make_toy_cnn, mlp_dataset


@pytest.fixture
def mlp_setup(tmp_path):
    save_model_dir(make_mlp(seed=1), tmp_path / "mlp")
    ds = mlp_dataset(seed=1)
    np.savez(tmp_path / "data.npz", x=ds.x, y=ds.y, x_val=ds.x_val, y_val=ds.y_val)
    return tmp_path


def test_prune_alpha_zero_keeps_weights_bitwise(mlp_setup, capsys):
    tmp = mlp_setup
    rc = main(
        [
            "prune", str(tmp / "mlp"), "--data", str(tmp / "data.npz"),
            "--output", str(tmp / "pruned"), "--alpha", "0",
            "--block", "2x2", "--epochs", "0", "--retrain-epochs", "0",
        ]
    )
    assert rc == 0
    before, _ = load_model_dir(tmp / "mlp")
    after, _ = load_model_dir(tmp / "pruned")
    for name in before.weights:
        np.testing.assert_array_equal(after.weights[name], before.weights[name])
    report = (tmp / "pruned" / "prune_report.txt").read_text()
    assert "rate=1.00x" in report


def test_prune_produces_feasible_masks(mlp_setup):
    tmp = mlp_setup
    rc = main(
        [
            "prune", str(tmp / "mlp"), "--data", str(tmp / "data.npz"),
            "--output", str(tmp / "pruned"), "--alpha", "0.75",
            "--block", "2x2", "--epochs", "6", "--retrain-epochs", "4",
            "--seed", "3",
        ]
    )
    assert rc == 0
    report = (tmp / "pruned" / "prune_report.txt").read_text()
    for line in report.splitlines():
        if line.startswith("layer="):
            zf = float(line.split("zero_fraction=")[1].split()[0])
            assert zf >= 0.75


def test_prune_bad_block_exits_2(mlp_setup):
    tmp = mlp_setup
    rc = main(
        [
            "prune", str(tmp / "mlp"), "--data", str(tmp / "data.npz"),
            "--output", str(tmp / "nope"), "--alpha", "0.5", "--block", "3x5",
            "--epochs", "1", "--retrain-epochs", "0",
        ]
    )
    assert rc == 2


def test_missing_model_exits_2(tmp_path):
    rc = main(
        [
            "prune", str(tmp_path / "missing.grim"), "--data", "x.npz",
            "--output", str(tmp_path / "o"), "--alpha", "0.5",
        ]
    )
    assert rc == 2


def test_compile_then_run_and_bench(mlp_setup):
    tmp = mlp_setup
    assert main(
        [
            "prune", str(tmp / "mlp"), "--data", str(tmp / "data.npz"),
            "--output", str(tmp / "pruned"), "--alpha", "0.5",
            "--block", "2x2", "--epochs", "3", "--retrain-epochs", "2",
        ]
    ) == 0
    assert main(
        ["compile", str(tmp / "pruned"), "--output", str(tmp / "compiled"),
         "--default-config"]
    ) == 0
    manifest = json.loads((tmp / "compiled" / "manifest.json").read_text())
    assert all(e["format"] == "bcrc" for e in manifest["tensors"].values())

    assert main(["run", str(tmp / "compiled"), "--seed", "5"]) == 0

    csv_path = tmp / "bench.csv"
    assert main(
        ["bench", str(tmp / "compiled"), "--csv", str(csv_path), "--repeats", "2",
         "--threads", "1"]
    ) == 0
    rows = list(csv.DictReader(csv_path.open()))
    assert [c for c in rows[0]] == [
        "layer", "nnz", "config", "sparse_us", "dense_us", "speedup",
        "input_loads_lre", "input_loads_nolre",
    ]
    for row in rows:
        sparse_us = float(row["sparse_us"])
        dense_us = float(row["dense_us"])
        assert float(row["speedup"]) == pytest.approx(dense_us / sparse_us, rel=1e-3)
    assert rows[-1]["layer"] == "__total__"


def test_bench_repeats_one(mlp_setup):
    tmp = mlp_setup
    main(
        ["prune", str(tmp / "mlp"), "--data", str(tmp / "data.npz"),
         "--output", str(tmp / "pruned"), "--alpha", "0.5", "--block", "2x2",
         "--epochs", "1", "--retrain-epochs", "0"]
    )
    main(["compile", str(tmp / "pruned"), "--output", str(tmp / "c"), "--default-config"])
    assert main(["bench", str(tmp / "c"), "--csv", str(tmp / "b.csv"), "--repeats", "1"]) == 0


def test_compile_missing_weights_exits_2(tmp_path):
    (tmp_path / "broken").mkdir()
    (tmp_path / "broken" / "graph.grim").write_text(
        'x = Input([4]); w = Tensor([4, 4], "w.bin"); y = FC(w, x);'
    )
    (tmp_path / "broken" / "manifest.json").write_text(
        json.dumps({"version": 1, "graph": "graph.grim",
                    "tensors": {"w": {"file": "w.bin", "format": "dense", "shape": [4, 4]}}})
    )
    rc = main(["compile", str(tmp_path / "broken"), "--output", str(tmp_path / "out")])
    assert rc == 2


def test_compile_empty_model_warns(tmp_path):
    (tmp_path / "empty").mkdir()
    (tmp_path / "empty" / "graph.grim").write_text("x = Input([4]); y = Relu(x);\n")
    with pytest.warns(UserWarning):
        rc = main(["compile", str(tmp_path / "empty"), "--output", str(tmp_path / "out")])
    assert rc == 0


def test_run_identity_model(tmp_path):
    (tmp_path / "ident").mkdir()
    (tmp_path / "ident" / "graph.grim").write_text("x = Input([4]); y = Relu(x);\n")
    x = np.array([1.0, -2.0, 3.0, -4.0], dtype=np.float32)
    np.save(tmp_path / "x.npy", x)
    rc = main(
        ["run", str(tmp_path / "ident"), "--input", f"x={tmp_path / 'x.npy'}",
         "--output", str(tmp_path / "outs")]
    )
    assert rc == 0
    got = np.load(tmp_path / "outs" / "y.npy")
    np.testing.assert_array_equal(got, np.maximum(x, 0))


def test_blocksize_single_candidate(tmp_path, capsys):
    save_model_dir(make_mlp(seed=2), tmp_path / "m")
    rc = main(
        ["blocksize", str(tmp_path / "m"), "--layer", "fc0", "--rate", "4",
         "--candidates", "2x2", "--latency-model", "fig7b"]
    )
    assert rc == 0
    assert capsys.readouterr().out.strip() == "2x2"


def test_blocksize_fig7b_mock_returns_4x16(tmp_path, capsys):
    g = make_mlp(dims=(64, 32, 2), seed=2, block_size=(4, 16))
    save_model_dir(g, tmp_path / "m")
    rc = main(
        ["blocksize", str(tmp_path / "m"), "--layer", "fc0", "--rate", "10",
         "--candidates", "1x16,2x16,4x16,8x16,16x16", "--latency-model", "fig7b"]
    )
    assert rc == 0
    assert capsys.readouterr().out.strip() == "4x16"


def test_blocksize_unknown_layer_exits_2(tmp_path):
    save_model_dir(make_mlp(seed=2), tmp_path / "m")
    rc = main(
        ["blocksize", str(tmp_path / "m"), "--layer", "nope",
         "--candidates", "2x2", "--latency-model", "fig7b"]
    )
    assert rc == 2


def test_parse_error_exits_2_with_line_number(tmp_path, capsys):
    bad = tmp_path / "bad.grim"
    bad.write_text("x = Input([4]);\ny = Whatever(x);\n")
    np_path = tmp_path / "d.npz"
    np.savez(np_path, x=np.ones((4, 4), np.float32), y=np.zeros(4, np.int64))
    rc = main(
        ["prune", str(bad), "--data", str(np_path), "--output", str(tmp_path / "o"),
         "--alpha", "0.5", "--epochs", "0", "--retrain-epochs", "0"]
    )
    assert rc == 2
    assert "line 2" in capsys.readouterr().err


def test_grim_threads_env_override(mlp_setup, monkeypatch):
    tmp = mlp_setup
    main(
        ["prune", str(tmp / "mlp"), "--data", str(tmp / "data.npz"),
         "--output", str(tmp / "pruned"), "--alpha", "0.5", "--block", "2x2",
         "--epochs", "1", "--retrain-epochs", "0"]
    )
    main(["compile", str(tmp / "pruned"), "--output", str(tmp / "c2"), "--default-config"])
    monkeypatch.setenv("GRIM_THREADS", "1")
    csv_path = tmp / "t.csv"
    assert main(
        ["bench", str(tmp / "c2"), "--csv", str(csv_path), "--repeats", "1",
         "--threads", "7"]
    ) == 0
    rows = list(csv.DictReader(csv_path.open()))
    assert all(":t1:" in r["config"] for r in rows if r["layer"] != "__total__")


def test_blocksize_cnn_autoblock_path(tmp_path):
    save_model_dir(make_toy_cnn(seed=3), tmp_path / "cnn")
    rc = main(
        ["blocksize", str(tmp_path / "cnn"), "--layer", "conv0", "--rate", "4",
         "--candidates", "1x2,2x2,4x2", "--latency-model", "fig7b"]
    )
    assert rc == 0
