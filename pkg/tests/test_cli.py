"""End-to-end CLI flows: synth, fit, eval, retrieve."""

import json
import os

import numpy as np
import pytest

from contactfit.cli import main as cli_main


@pytest.fixture(scope="module")
def scenario_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("scenario")
    rc = cli_main(["synth", "--scenario", "box-grasp", "--out", str(out), "--seed", "3"])
    assert rc == 0
    return out


def test_synth_emits_expected_files(scenario_dir):
    for name in ("body_model.json", "object.ply", "camera.json", "annotation.json",
                 "config.json", "ground_truth.json"):
        assert (scenario_dir / name).exists()
    assert (scenario_dir / "masks" / "object_mask.pgm").exists()
    assert (scenario_dir / "masks" / "human_mask.pgm").exists()


def test_fit_cli_runs_and_reports(scenario_dir, tmp_path):
    out = tmp_path / "result.json"
    rc = cli_main([
        "fit",
        "--annotation", str(scenario_dir / "annotation.json"),
        "--body-model", str(scenario_dir / "body_model.json"),
        "--camera", str(scenario_dir / "camera.json"),
        "--masks", str(scenario_dir / "masks"),
        "--config", str(scenario_dir / "config.json"),
        "--out", str(out),
    ])
    assert rc == 0
    result = json.loads(out.read_text())
    assert set(result["stage_traces"]) == {"stage1", "stage2", "stage3"}
    assert result["object_pose"]["scale"] > 0
    # recovered pose should sit near the recorded ground truth
    gt = json.loads((scenario_dir / "ground_truth.json").read_text())
    t_gt = np.array(gt["object_pose_gt"]["translation"])
    centroid = np.array(result["object_centroid"])
    from contactfit.geometry import rodrigues

    R = rodrigues(np.array(result["object_pose"]["rotation"]))
    t_eff = np.array(result["object_pose"]["translation"]) - \
        result["object_pose"]["scale"] * (R @ centroid)
    assert np.linalg.norm(t_eff - t_gt) < 0.05


def test_eval_cli(tmp_path):
    from contactfit.meshio import save_ply
    from contactfit.shapes import box, icosphere
    from contactfit.toybody import toy_humanoid

    body = toy_humanoid(divisions=1, hand_divisions=1).template
    obj = box((0.2, 0.2, 0.2), center=(0.5, 0.5, 0.5))
    pred = tmp_path / "pred" / "s1"
    gt = tmp_path / "gt" / "s1"
    os.makedirs(pred)
    os.makedirs(gt)
    save_ply(body, str(pred / "human.ply"))
    save_ply(obj, str(pred / "object.ply"))
    save_ply(body, str(gt / "human.ply"))
    save_ply(obj, str(gt / "object.ply"))
    out = tmp_path / "report.json"
    rc = cli_main(["eval", "--pred", str(tmp_path / "pred"), "--gt", str(tmp_path / "gt"),
                   "--out", str(out), "--samples", "1024"])
    assert rc == 0
    report = json.loads(out.read_text())
    assert report["samples"][0]["cd_h_cm"] == pytest.approx(0.0, abs=1e-9)
    assert report["samples"][0]["contact_f1"] == 1.0
    assert report["aggregate"]["cd_combined_cm"] == pytest.approx(0.0, abs=1e-9)
    assert "runtime_seconds" in report


def test_retrieve_cli(tmp_path, capsys):
    from contactfit.documents import save_embedding_store
    from contactfit.retrieval import EmbeddingRecord, EmbeddingStore

    rng = np.random.default_rng(0)
    records = [EmbeddingRecord(f"id-{i}", rng.normal(size=8).astype(np.float32),
                               f"m{i}.ply", "cat") for i in range(10)]
    store_path = tmp_path / "store.bin"
    save_embedding_store(EmbeddingStore(records, 8), str(store_path))
    query_path = tmp_path / "q.json"
    query_path.write_text(json.dumps(records[4].vector.astype(float).tolist()))
    rc = cli_main(["retrieve", "--store", str(store_path), "--query", str(query_path),
                   "--k", "3"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert len(out) == 3
    assert out[0]["id"] == "id-4"
    assert out[0]["similarity"] == pytest.approx(1.0)
