"""Smoke test for the dsquality extension module.

Build and install first, e.g. `maturin develop -m crates/python/Cargo.toml`
or `pip install crates/python`, then run `python crates/python/python/smoke_test.py`.
"""

import json
import math
import os
import tempfile

import dsquality as dq


def check_impurity_and_entropy():
    assert dq.gini([5]) == 0.0
    assert abs(dq.gini([1, 1]) - 0.5) < 1e-12
    assert abs(dq.entropy([223, 370, 495]) - 1.5148) < 1e-3
    assert abs(dq.entropy([7] * 10) - math.log2(10)) < 1e-9
    try:
        dq.entropy([3, 0])
    except ValueError:
        pass
    else:
        raise AssertionError("empty class accepted")


def check_trees():
    xor = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]
    tree = dq.DecisionTree.fit(xor, [0, 1, 1, 0])
    assert (tree.n_leaf, tree.d_max) == (4, 2)
    assert [tree.predict(r) for r in xor] == [0, 1, 1, 0]
    again = dq.DecisionTree.from_json(tree.to_json())
    assert again.to_json() == tree.to_json()
    assert tree.metrics(xor, [0, 1, 1, 0])["train_accuracy"] == 1.0


def check_data_and_sampling():
    blobs = dq.generate_blobs(20, 4, 4, 3, 5, seed=1)
    assert blobs.shape == (100, 4, 4, 3)
    assert blobs.class_counts() == [20] * 5
    idx = dq.stratified_sample(blobs.labels, 4, 0)
    assert len(idx) == 20 and idx == sorted(idx)
    rows = blobs.flattened()
    sample = [rows[i] for i in idx]
    labels = [blobs.labels[i] for i in idx]
    assert dq.DecisionTree.fit(sample, labels).n_leaf == 5

    noise = dq.generate_gaussian(200, 2, 2, 1, 4, seed=3)
    assert noise.class_counts() == dq.generate_gaussian(200, 2, 2, 1, 4, seed=3).class_counts()
    try:
        dq.stratified_sample([0, 0, 1], 2, 0)
    except ValueError as e:
        assert "class 1" in str(e)
    else:
        raise AssertionError("shortfall accepted")


def check_autoencoder_and_pipeline():
    with tempfile.TemporaryDirectory() as tmp:
        data = dq.generate_blobs(30, 4, 4, 3, 3, seed=2).with_id("b")
        manifest = str(data.save(os.path.join(tmp, "data")))
        reloaded = dq.Dataset.load(manifest)
        assert len(reloaded) == 90 and reloaded.id == "b"

        ae = dq.Autoencoder(48, 6, hidden=[16], seed=0)
        assert ae.layer_dims == [48, 16, 6, 16, 48]
        rows = reloaded.flattened()
        val_mae = ae.fit(rows[:70], rows[70:], learning_rate=1e-3, batch_size=16, max_epochs=4)
        assert 1 <= len(val_mae) <= 4
        codes = ae.encode(rows[:5])
        assert len(codes) == 5 and len(codes[0]) == 6
        model_path = os.path.join(tmp, "b6.dqae")
        ae.save(model_path, "b-ae6")
        assert dq.Autoencoder.load(model_path).encode(rows[:5]) == codes

        results = os.path.join(tmp, "r.csv")
        plan = {
            "datasets": ["b"],
            "representations": ["raw"],
            "per_class_sizes": [5, 10],
            "seeds": [0, 1],
            "output": results,
            "record_timing": False,
            "catalog": {"b": {"manifest": manifest}},
        }
        plan_path = os.path.join(tmp, "plan.json")
        with open(plan_path, "w") as f:
            json.dump(plan, f)
        assert dq.run_plan_file(plan_path) == (4, 0)
        assert dq.run_plan_file(plan_path) == (0, 4)
        written = dq.emit_report(results, os.path.join(tmp, "rep"), svg=False)
        assert sorted(os.path.basename(p) for p in written) == ["summary.csv", "trends.csv"]
        try:
            dq.run_plan_file(os.path.join(tmp, "missing.json"))
        except OSError:
            pass
        else:
            raise AssertionError("missing plan accepted")


if __name__ == "__main__":
    check_impurity_and_entropy()
    check_trees()
    check_data_and_sampling()
    check_autoencoder_and_pipeline()
    print("dsquality smoke test passed")
