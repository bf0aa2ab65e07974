"""
Command line: outputs, reproducibility and exit codes
"""

import json

import numpy as np
import pandas as pd
import pytest

from src.analysis.metrics import score_segmentation
from src.cli import main
from src.utils.imageio import read_image, read_mask, write_image, write_mask

SCENE = """\
n: 64
j1: 1
j2: 3
background: {c2: -0.02}
disks:
  - {center: [32, 32], radius: 16, c2: -0.1}
"""

FAST = ["--iters", "6", "--burnin", "2"]


@pytest.fixture
def scene_file(tmp_path):
    path = tmp_path / "scene.yaml"
    path.write_text(SCENE, encoding="utf-8")
    return path


@pytest.fixture
def synthesized(tmp_path, scene_file):
    out = tmp_path / "synth"
    assert main(["synth", "--scene", str(scene_file), "--seed", "5", "--out", str(out)]) == 0
    return out / "custom.mfim", out / "custom_mask.pgm"


def test_synth_writes_image_mask_and_manifest(synthesized):
    image_path, mask_path = synthesized
    image = read_image(image_path)
    mask = read_mask(mask_path)
    assert image.shape == mask.shape == (64, 64)
    assert set(np.unique(mask)) == {1, 2}
    manifest = json.loads((image_path.parent / "custom_manifest.json").read_text(encoding="utf-8"))
    assert manifest["command"] == "synth" and manifest["seed"] == 5
    assert sum(manifest["results"]["class_pixels"]) == 64 * 64


def test_synth_is_byte_identical_for_one_seed(tmp_path, scene_file, synthesized):
    image_path, mask_path = synthesized
    again = tmp_path / "again"
    assert main(["synth", "--scene", str(scene_file), "--seed", "5", "--out", str(again)]) == 0
    assert (again / "custom.mfim").read_bytes() == image_path.read_bytes()
    assert (again / "custom_mask.pgm").read_bytes() == mask_path.read_bytes()


def test_synth_rejects_a_non_power_of_two_side(tmp_path):
    assert main(["synth", "--preset", "homogeneous", "--n", "500", "--out", str(tmp_path)]) == 2
    assert not list(tmp_path.iterdir())


def test_unknown_preset_exit_code(tmp_path):
    assert main(["synth", "--preset", "nope", "--out", str(tmp_path)]) == 2


def test_segment_end_to_end(tmp_path, synthesized):
    image_path, mask_path = synthesized
    out = tmp_path / "seg"
    code = main(["segment", str(image_path), *FAST, "--truth", str(mask_path), "--baseline", "--probability", "--panel", "--out", str(out)])
    assert code == 0
    labels = read_mask(out / "custom_labels.pgm")
    assert labels.shape == (64, 64) and labels.max() <= 2
    report = json.loads((out / "custom_params.json").read_text(encoding="utf-8"))
    assert [c["class"] for c in report["classes"]] == [1, 2]
    assert report["n_samples"] == 4
    assert 0.0 <= report["score"]["error_percent"] <= 100.0
    assert set(report["baselines"]) == {"kmeans-mf", "kmeans-feat"}
    probability = read_image(out / "custom_probability.mfim")
    assert probability.min() >= 0.5 - 1e-6 and probability.max() <= 1.0
    for name in ("custom_manifest.json", "custom_panel.png", "custom_kmeans-mf.pgm", "custom_kmeans-feat.pgm"):
        assert (out / name).is_file()


def test_segment_outputs_are_reproducible(tmp_path, synthesized):
    image_path, _ = synthesized
    for run in ("a", "b"):
        assert main(["segment", str(image_path), *FAST, "--seed", "3", "--out", str(tmp_path / run)]) == 0
    for name in ("custom_labels.pgm", "custom_params.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_segment_rejects_unusable_scales(tmp_path, rng):
    image = write_image(tmp_path / "small.mfim", rng.standard_normal((32, 32)))
    assert main(["segment", str(image), "--j2", "3", "--out", str(tmp_path)]) == 2


def test_segment_truth_shape_mismatch(tmp_path, synthesized):
    image_path, _ = synthesized
    truth = write_mask(tmp_path / "small.pgm", np.ones((32, 32), dtype=int))
    assert main(["segment", str(image_path), *FAST, "--truth", str(truth), "--out", str(tmp_path / "x")]) == 3
    assert not list((tmp_path / "x").glob("*_labels.pgm"))


def test_segment_bad_image_file(tmp_path):
    bad = tmp_path / "bad.mfim"
    bad.write_bytes(b"not an image")
    assert main(["segment", str(bad), "--out", str(tmp_path)]) == 2


def test_estimate_end_to_end(tmp_path, synthesized):
    image_path, _ = synthesized
    assert main(["estimate", str(image_path), *FAST, "--out", str(tmp_path / "est")]) == 0
    report = json.loads((tmp_path / "est" / "custom_estimate.json").read_text(encoding="utf-8"))
    assert len(report["classes"]) == 1
    assert report["classes"][0]["theta1"] > 0
    assert set(report["regression"]) == {"c2", "theta1", "intercept", "r2", "degenerate"}


def test_eval_matches_the_library(tmp_path, rng, capsys):
    truth = np.ones((16, 16), dtype=int)
    truth[:, 8:] = 2
    pred = np.where(rng.random((16, 16)) < 0.1, 3 - truth, truth)
    pred_path = write_mask(tmp_path / "pred.pgm", pred)
    truth_path = write_mask(tmp_path / "truth.pgm", truth)
    assert main(["eval", str(pred_path), str(truth_path)]) == 0
    record = json.loads(capsys.readouterr().out)
    expected = score_segmentation(pred - 1, truth - 1, 2).to_record()
    assert record == json.loads(json.dumps(expected))


def test_eval_shape_mismatch(tmp_path):
    a = write_mask(tmp_path / "a.pgm", np.ones((8, 8), dtype=int))
    b = write_mask(tmp_path / "b.pgm", np.ones((16, 16), dtype=int))
    assert main(["eval", str(a), str(b)]) == 3


def test_spectrum_table(capsys):
    assert main(["spectrum", "--c1", "0.5", "--c2", "-0.02", "--points", "5"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "h,D"
    assert len(lines) == 6
    assert lines[3] == "0.5,2"


def test_spectrum_domain_error():
    assert main(["spectrum", "--c2", "0.01"]) == 4


def test_bad_arguments_exit_through_argparse():
    with pytest.raises(SystemExit) as info:
        main(["synth", "--n", "abc"])
    assert info.value.code == 2


SMALL_PRESET = """\
synth:
  presets:
    k2-default:
      n: 64
      disks:
        - {center: [32, 32], radius: 16, c2: -0.1}
"""


def test_convergence_run_honours_iteration_flags(tmp_path):
    """repro conv uses --iters, --burnin and --chains over the configured run length"""
    user = tmp_path / "small.yaml"
    user.write_text(SMALL_PRESET, encoding="utf-8")
    args = ["--config", str(user), "repro", "conv", "--iters", "14", "--burnin", "2", "--chains", "2", "--out", str(tmp_path)]
    assert main(args) == 0
    traces = pd.read_csv(tmp_path / "repro_conv_traces.csv")
    assert set(traces["chain"]) == {1, 2}
    assert len(traces) == 2 * 12
    assert traces["iteration"].min() == 3 and traces["iteration"].max() == 14
    table = pd.read_csv(tmp_path / "repro_conv.csv")
    assert set(table["chains"]) == {2} and set(table["length"]) == {12}
