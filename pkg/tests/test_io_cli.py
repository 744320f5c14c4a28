import json
import shutil
import struct

import numpy as np
import pytest

from gsvdlab import cli, jsonio
from gsvdlab.config import RunConfig, dump_config, load_config
from gsvdlab.data import Dataset, read_idx, synth_blobs, write_idx
from gsvdlab.errors import ConfigError, DegenerateDataset, FormatError, InvalidInput

SMOKE = {
    "seed": 0,
    "timing": False,
    "dataset": {"kind": "blobs", "classes": 2, "per_class": 120, "dim": 2, "separation": 10.0},
    "split": {"train": 60, "construct": 100, "holdout": 60},
    "net": {"hidden": [16]},
    "train": {"epochs": 40},
    "construction": {"steps": 30},
    "attack": {"samples": 10},
    "bias": {"target_class": 0, "ratios": [1.0, 0.3]},
    "traverse": {"samples": 3, "steps": 4},
}
STAGES = ["train-svdnet", "build-gsvd", "validate", "attack", "bias-sweep", "traverse"]


# -- IDX -----------------------------------------------------------------

def _idx_fixture(tmp_path):
    img = tmp_path / "img.idx"
    lab = tmp_path / "lab.idx"
    img.write_bytes(struct.pack(">IIII", 0x803, 2, 2, 2) + bytes([0, 255, 51, 102, 255, 255, 0, 0]))
    lab.write_bytes(struct.pack(">II", 0x801, 2) + bytes([3, 7]))
    return img, lab


def test_read_idx_bytes(tmp_path):
    img, lab = _idx_fixture(tmp_path)
    d = read_idx(img, lab)
    np.testing.assert_allclose(d.x, [[0, 1, 0.2, 0.4], [1, 1, 0, 0]], atol=1e-15)
    assert d.labels.tolist() == [3, 7]
    assert d.image_shape == (2, 2)


def test_read_idx_bad_magic(tmp_path):
    p = tmp_path / "bad.idx"
    p.write_bytes(struct.pack(">IIII", 0x801, 1, 1, 1) + b"\0")
    with pytest.raises(FormatError):
        read_idx(p)


def test_read_idx_truncated(tmp_path):
    img, lab = _idx_fixture(tmp_path)
    img.write_bytes(img.read_bytes()[:-1])
    with pytest.raises(FormatError):
        read_idx(img, lab)


def test_read_idx_label_count_mismatch(tmp_path):
    img, lab = _idx_fixture(tmp_path)
    lab.write_bytes(struct.pack(">II", 0x801, 3) + bytes([1, 2, 3]))
    with pytest.raises(FormatError):
        read_idx(img, lab)


def test_write_idx_roundtrip(tmp_path, rng):
    x = rng.integers(0, 256, (5, 12)) / 255.0
    write_idx(tmp_path / "i", x, (3, 4), tmp_path / "l", [0, 1, 2, 3, 4])
    d = read_idx(tmp_path / "i", tmp_path / "l")
    np.testing.assert_allclose(d.x, x, atol=1e-15)


# -- blobs ---------------------------------------------------------------

def test_blobs_deterministic():
    a, b = synth_blobs(3, 50, 4, seed=2), synth_blobs(3, 50, 4, seed=2)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.labels, b.labels)
    assert not np.array_equal(a.x, synth_blobs(3, 50, 4, seed=3).x)


def test_blobs_shape_and_range():
    d = synth_blobs(3, 40, 5, separation=6.0, seed=1)
    assert d.x.shape == (120, 5)
    assert d.x.min() >= 0.0 and d.x.max() <= 1.0
    assert np.bincount(d.labels).tolist() == [40, 40, 40]


def test_blobs_separated():
    d = synth_blobs(2, 200, 2, separation=10.0, seed=0)
    means = np.array([d.x[d.labels == c].mean(axis=0) for c in range(2)])
    spread = max(d.x[d.labels == c].std(axis=0).max() for c in range(2))
    assert np.linalg.norm(means[0] - means[1]) > 6 * spread


def test_blobs_errors():
    with pytest.raises(DegenerateDataset):
        synth_blobs(2, 0)
    with pytest.raises(InvalidInput):
        synth_blobs(1, 10)


def test_dataset_split():
    d = Dataset(np.arange(20.0).reshape(10, 2), np.arange(10) % 2)
    a, b = d.split(3, seed=0)
    assert len(a) == 3 and len(b) == 7
    assert sorted(np.concatenate([a.x[:, 0], b.x[:, 0]]).tolist()) == d.x[:, 0].tolist()


# -- JSON and config -----------------------------------------------------

def test_jsonio_float_format():
    text = jsonio.dumps({"a": 0.1, "b": 1.0, "c": [float("inf"), 2], "d": np.float64(1 / 3)})
    back = json.loads(text)
    assert back == {"a": 0.1, "b": 1.0, "c": [None, 2], "d": 1 / 3}
    assert "0.33333333333333331" in text


def test_config_roundtrip(tmp_path):
    cfg = RunConfig.from_dict(SMOKE)
    p = tmp_path / "c.json"
    dump_config(cfg, p)
    back = load_config(p)
    assert back == cfg and back.digest() == cfg.digest()


@pytest.mark.parametrize("bad", [
    {"sed": 1},
    {"train": {"epoch": 3}},
    {"seed": "zero"},
    {"seed": 1.5},
    {"construction": {"epsilon": 1.5}},
    {"dataset": {"kind": "mnist"}},
    {"bias": {"ratios": [0.0]}},
    {"timing": 1},
])
def test_config_rejects(bad):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(bad)


def test_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.json")


# -- CLI -----------------------------------------------------------------

def _write_cfg(tmp_path, **over):
    d = json.loads(json.dumps(SMOKE))
    d.update(over)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(d))
    return p


def _snapshot(out):
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


def test_cli_all_stages_and_determinism(tmp_path, capsys):
    cfg = _write_cfg(tmp_path)
    out = tmp_path / "run"
    snaps = []
    for _ in range(2):
        shutil.rmtree(out, ignore_errors=True)
        for s in STAGES:
            assert cli.main([s, "--config", str(cfg), "--out", str(out)]) == 0
        snaps.append(_snapshot(out))
    capsys.readouterr()
    expected = {"svdnet.ckpt", "train_metrics.json", "gsvd.json", "gains.json", "validation.json",
                "validation.txt", "attack.csv", "attack_summary.json", "bias.json", "bias.csv",
                "null_samples.pgm", "interpolation.pgm", "traverse_manifest.json", "config.json"}
    assert expected <= set(snaps[0])
    assert all(f"stamp_{s}.json" in snaps[0] for s in STAGES)
    assert snaps[0] == snaps[1]

    summary = json.loads(snaps[0]["attack_summary.json"])
    assert set(summary) == {"success_percent", "avg_perturbation_norm", "avg_queries_per_sample", "samples"}
    header = snaps[0]["attack.csv"].decode().splitlines()[0]
    assert header == "sample_id,source_idx,target_idx,success,eta_norm,probes,queries,wall_ms"
    stamp = json.loads(snaps[0]["stamp_attack.json"])
    assert stamp["seed"] == 0 and len(stamp["config_sha256"]) == 64
    assert set(stamp["versions"]) == {"gsvdlab", "numpy", "python"}


def test_cli_seed_override(tmp_path, capsys):
    cfg = _write_cfg(tmp_path)
    cli.main(["train-svdnet", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "1"])
    cli.main(["train-svdnet", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "2"])
    capsys.readouterr()
    assert (tmp_path / "a" / "svdnet.ckpt").read_bytes() != (tmp_path / "b" / "svdnet.ckpt").read_bytes()
    assert json.loads((tmp_path / "a" / "config.json").read_text())["seed"] == 1


def test_cli_config_error(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"bogus": 1}')
    out = tmp_path / "run"
    assert cli.main(["validate", "--config", str(p), "--out", str(out)]) == 2
    err = json.loads(capsys.readouterr().out)
    assert err["error"] == "config_error" and err["subcommand"] == "validate"
    assert json.loads((out / "error.json").read_text()) == err


def test_cli_module_error(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, split={"train": 60, "construct": 100, "holdout": 500})
    out = tmp_path / "run"
    assert cli.main(["train-svdnet", "--config", str(cfg), "--out", str(out)]) == 1
    err = json.loads(capsys.readouterr().out)
    assert err["error"] == "degenerate_dataset"
    assert (out / "error.json").exists()


def test_cli_idx_dataset(tmp_path, capsys, rng):
    labels = np.repeat([0, 1], 30)
    x = np.clip(rng.random((60, 4)) * 0.3 + labels[:, None] * 0.6, 0, 1)
    write_idx(tmp_path / "i", x, (2, 2), tmp_path / "l", labels)
    cfg = _write_cfg(tmp_path, dataset={"kind": "idx", "images": str(tmp_path / "i"),
                                        "labels": str(tmp_path / "l")},
                     split={"train": 20, "construct": 20, "holdout": 20})
    out = tmp_path / "run"
    for s in ("train-svdnet", "validate", "traverse"):
        assert cli.main([s, "--config", str(cfg), "--out", str(out)]) == 0
    capsys.readouterr()
    manifest = json.loads((out / "traverse_manifest.json").read_text())
    assert manifest["image_shape"] == [2, 2]
    assert (out / "null_samples.pgm").read_bytes().startswith(b"P5\n6 2\n255\n")
