import itertools
import json
import math

import numpy as np
import pytest

import graph_bendr as gb


def tiny_config():
    cfg = gb.default_config()
    cfg["data"] = {"window_s": 3.0, "sfreq": 32.0}
    cfg["encoder"].update(feature_dim=16, groups=4, strides=[3, 2, 2, 2, 1, 1])
    cfg["transformer"].update(layers=1, heads=2, model_dim=16, ffn_dim=32)
    cfg["masking"].update(p_start=0.3, span=1)
    cfg["contrastive"]["negatives"] = 2
    cfg["pretrain"].update(steps=3, batch_size=2)
    cfg["gnn"].update(architecture="gcn", edge_weights=True, hidden_dim=16)
    return cfg


def test_montage_and_edge_weights():
    labels, w = gb.edge_weights()
    assert labels == gb.montage_labels()
    assert len(labels) == 19
    assert w.shape == (19, 19)
    assert np.allclose(w, w.T)
    assert np.all(np.diag(w) == 0.0)
    assert gb.geodesic_distance([1, 0, 0], [0, 1, 0], 1.0) == pytest.approx(math.pi / 2)


def test_auroc_matches_pairwise_count():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(2, 60))
        scores = rng.integers(0, 5, n).astype(float).tolist()
        labels = rng.integers(0, 2, n).tolist()
        labels[0], labels[1] = 1, 0
        pairs = [(s, t) for (s, a), (t, b) in itertools.product(zip(scores, labels), repeat=2) if a == 1 and b == 0]
        expected = sum(1.0 if s > t else 0.5 if s == t else 0.0 for s, t in pairs) / len(pairs)
        assert gb.auroc(scores, labels) == expected
    assert gb.accuracy([1, 1, 0, 0], [1, 1, 0, 1]) == 0.75
    with pytest.raises(gb.ValidationError):
        gb.auroc([0.1, 0.2], [1, 1])


def test_config_round_trip_and_unknown_keys():
    cfg = gb.default_config()
    assert gb.normalize_config(cfg) == cfg
    assert gb.normalize_config({})["gnn"]["layers"] == 2
    with pytest.raises(gb.ConfigError):
        gb.normalize_config({"gnn": {"archtecture": "gcn"}})


def test_gradcheck_suite_passes():
    reports = gb.gradcheck(seed=1)
    assert len(reports) >= 14
    assert all(ok for _, _, ok in reports)
    assert max(err for _, err, _ in reports) < 1e-4


def test_synth_task_balance(tmp_path):
    labels = gb.synth_task(7, str(tmp_path / "t"), windows=200, metric="auroc", balance=0.3)
    assert sum(labels) == 60
    manifest = json.loads((tmp_path / "t" / "manifest.json").read_text())
    assert manifest["balanced"] is False
    assert len(manifest["windows"]) == 200


def test_pretrain_and_finetune_are_deterministic(tmp_path):
    assert gb.synth_pretrain(2, 2, 6.0, 32.0, str(tmp_path / "corpus")) == 2
    gb.synth_task(3, str(tmp_path / "task"), windows=24, folds=4, window_s=3.0, sfreq=32.0)
    cfg = tiny_config()
    lines = []
    a = gb.pretrain(cfg, tmp_path / "corpus", tmp_path / "a.ckpt", progress=lines.append)
    b = gb.pretrain(cfg, tmp_path / "corpus", tmp_path / "b.ckpt")
    assert a["model"] == "gcn+ew"
    assert len(a["losses"]) == 3
    assert a["checkpoint_sha256"] == b["checkpoint_sha256"] == gb.sha256_file(str(tmp_path / "a.ckpt"))
    assert any("pretrain" in line for line in lines)

    r1 = gb.finetune(tmp_path / "a.ckpt", tmp_path / "task", head="linear", epochs=1)
    r2 = gb.finetune(tmp_path / "a.ckpt", tmp_path / "task", head="linear", epochs=1)
    assert r1 == r2
    assert len(r1["per_fold"]) == 4
    assert all(0.0 <= m <= 1.0 for m in r1["per_fold"])
    assert r1["mean"] == pytest.approx(sum(r1["per_fold"]) / 4)
