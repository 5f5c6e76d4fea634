"""End-to-end smoke of the python bindings on the bundled sample data."""

import math
import os
import tempfile

import numpy as np

import instadet


def approx(a, b, tol=1e-9):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


def main():
    sample = os.environ["INSTADET_SAMPLE_DIR"]

    store = instadet.EmbeddingStore.load_text(os.path.join(sample, "embeddings.txt"))
    assert store.dim == 10
    assert len(store) == 38
    assert "washington" in store
    assert store.lookup("no_such_token") is None

    rescaled = store.rescale_all()
    assert rescaled.rescaled and not store.rescaled

    raw = instadet.read_raw_pairs_tsv(os.path.join(sample, "raw_pairs.tsv"))
    positives, report = instadet.build_positive_set(raw, store, rare_threshold=1)
    assert len(positives) == 30
    assert report.dropped_entity_miss == 1
    assert report.dropped_duplicate == 1
    assert "datapoints" in report.to_text()

    # Variant generation keeps the documented positive:negative ratio.
    vd = instadet.build_variant(positives, "pos_union_global", seed=1)
    assert vd.positive_count() * 3 == vd.negative_count()
    neg_types = {r.neg_type for r in vd.records if r.label == "negative"}
    assert neg_types == {"inst2inst", "notinst_global", "inverse"}

    vd = instadet.build_variant(positives, "pos_inverse", seed=1)
    assert vd.positive_count() == 30 and vd.negative_count() == 30
    swaps = {(r.entity, r.category) for r in vd.records if r.label == "negative"}
    golds = {(r.category, r.entity) for r in vd.records if r.label == "positive"}
    assert swaps == golds

    plan = instadet.build_fold_plan(vd.records, seed=1, forced_k=2)
    assert plan.fold_count() == 2
    open_plan = plan.without_filtering()
    assert not open_plan.filtered and open_plan.retention == 1.0

    # f1 oracle.
    approx(instadet.f1_positive(50, 50, 0), 2.0 / 3.0)
    approx(instadet.nominal_positive_rate("pos_union_global"), 0.25)

    bl = instadet.evaluate_baseline(vd, plan, "bl_pos", 1.0, seed=1)
    total = sum(f.total() for f in bl.per_fold)
    assert total == len(plan.base_test)

    report = instadet.evaluate_variant(vd, plan, store, arch="lr", seed=1)
    assert report.complete and report.model_id == "lr"
    assert 0.0 <= report.micro_f1 <= 1.0
    again = instadet.evaluate_variant(vd, plan, store, arch="lr", seed=1)
    assert report.micro_f1 == again.micro_f1

    reports = instadet.run_experiment1(
        positives, store, seed=1, forced_k=2, variants=["pos_inverse"], models=["lr"]
    )
    assert [r.model_id for r in reports] == ["bl_pos", "bl_freq", "lr"]
    with tempfile.TemporaryDirectory() as td:
        path = os.path.join(td, "reports.jsonl")
        instadet.save_eval_reports(path, reports)
        loaded = instadet.load_eval_reports(path)
        assert [r.micro_f1 for r in loaded] == [r.micro_f1 for r in reports]
        instadet.write_summary_csv(os.path.join(td, "summary.csv"), reports)
        with open(os.path.join(td, "summary.csv")) as fh:
            assert fh.readline().startswith("variant,")

    # Direct model training on a linearly separable toy.
    rng = np.random.default_rng(3)
    x = rng.normal(size=(80, 4))
    y = (x[:, 0] > 0).astype(int)
    x[:, 1] = y * 2.0 - 1.0
    model = instadet.train_model(x[:60], list(y[:60]), x[60:], list(y[60:]), arch="lr")
    probs = model.predict_proba_batch(x[60:])
    assert probs.shape == (20, 2)
    assert np.allclose(probs.sum(axis=1), 1.0)
    preds = [model.predict_label(row) for row in x[60:]]
    acc = sum(int(p == t) for p, t in zip(preds, y[60:])) / 20.0
    assert acc >= 0.9, acc

    # Geometry round trip.
    points = instadet.collect_points(positives)
    mat = instadet.point_matrix(points, store)
    assert mat.shape == (len(points), 10)
    pca = instadet.pca_2d(mat)
    assert pca.coords.shape == (len(points), 2)
    approx(np.linalg.norm(pca.component1), 1.0, 1e-12)

    sol = instadet.kmeans(mat, k=2, restarts=5, seed=1)
    assert sol.inertia == min(sol.restart_inertias)
    assert set(sol.assignments) == {0, 1}

    centroids = instadet.all_entity_centroids(positives, store)
    table = instadet.similarity_table(positives, store, centroids)
    assert table.entity_centroid_within.defined
    assert -1.0 - 1e-9 <= table.entity_centroid_within.mean <= 1.0 + 1e-9
    assert table.entities_within.n_pairs > 0

    assert instadet.derive_stream(1, "plan") != instadet.derive_stream(1, "variant")
    print("python smoke: ok")


if __name__ == "__main__":
    main()
