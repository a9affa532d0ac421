import json

import pytest
from fastapi.testclient import TestClient

from urbanet.api import create_app
from urbanet.pipeline import PipelineError, run_pipeline
from urbanet.store import ArtifactStore, StoreError
from urbanet.synth import SynthConfig, generate

# ------------------------------------------------------------------- store


def test_store_round_trip_and_checksums(tmp_path):
    store = ArtifactStore(tmp_path / "store")
    entry = store.put("report", "json", b'{"x": 1}', "cafe0123")
    assert store.read_json("report") == {"x": 1}
    assert store.verify() == []

    reopened = ArtifactStore(tmp_path / "store")
    assert reopened.entry("report").sha256 == entry.sha256

    # corrupting the object is detected
    store.path("report").write_bytes(b"tampered")
    assert ArtifactStore(tmp_path / "store").verify() == ["report"]


def test_store_objects_immutable(tmp_path):
    store = ArtifactStore(tmp_path / "store")
    store.put("a", "json", b"{}", "h1")
    store.put("a", "json", b"{}", "h1")  # same bytes: fine
    with pytest.raises(StoreError):
        store.put("a", "json", b'{"changed": true}', "h1")
    # a new config hash lands at a new object path
    store.put("a", "json", b'{"changed": true}', "h2")
    assert store.read_json("a") == {"changed": True}


# ---------------------------------------------------------------- pipeline


def base_config(tmp_path, n_users=150, stages=("synth", "inet")):
    return {
        "pipeline": {"stages": list(stages), "seed": 5, "store": str(tmp_path / "store")},
        "synth": {"seed": 5, "n_users": n_users, "n_regions": 36,
                  "regions_per_user": [6, 7], "venues_per_region": 4},
        "inet": {"platforms": ["GP"]},
    }


def test_empty_stage_list_empty_manifest(tmp_path):
    manifest = run_pipeline({"pipeline": {"stages": [], "store": str(tmp_path / "s")}})
    assert manifest == {}


def test_pipeline_rerun_is_noop(tmp_path):
    cfg = base_config(tmp_path)
    first = run_pipeline(cfg)
    second = run_pipeline(cfg)
    assert first == second
    assert {n: e["sha256"] for n, e in first.items()} == {n: e["sha256"] for n, e in second.items()}


def test_unknown_stage_aborts_with_name(tmp_path):
    cfg = base_config(tmp_path, stages=("synth", "bogus"))
    with pytest.raises(PipelineError) as err:
        run_pipeline(cfg)
    assert err.value.stage == "bogus"


def test_failed_stage_leaves_no_partial_artifacts(tmp_path):
    cfg = base_config(tmp_path, stages=("compare",))  # no inet artifacts yet
    del cfg["inet"]
    with pytest.raises(PipelineError) as err:
        run_pipeline(cfg)
    assert err.value.stage == "compare"
    store = ArtifactStore(tmp_path / "store")
    assert not any(n.startswith("compare") for n in store.manifest)


def test_self_comparison_perfect_correlations(tmp_path):
    # write one synthetic dataset, ingest it twice under two platform tags
    data = generate(SynthConfig(seed=9, n_users=120, n_regions=30,
                                regions_per_user=(6, 7), venues_per_region=4))
    paths = data.write(tmp_path / "data")
    cfg = {
        "pipeline": {"stages": ["inet", "compare"], "seed": 1,
                     "store": str(tmp_path / "store")},
        "inputs": {
            "interactions": {"GP": str(paths["interactions"]), "FS": str(paths["interactions"])},
            "venues": str(paths["venues"]),
            "regions": str(paths["regions"]),
            "context": str(paths["context"]),
            "level": "h8",
        },
        "compare": {"a": "GP", "b": "FS"},
    }
    run_pipeline(cfg)
    store = ArtifactStore(tmp_path / "store")
    report = store.read_json("compare_GP_FS_h8")
    assert report["pearson"] == pytest.approx(1.0, abs=1e-9)
    assert report["spearman"] == pytest.approx(1.0, abs=1e-9)
    assert report["kendall_centrality"] == pytest.approx(1.0, abs=1e-9)


@pytest.fixture(scope="module")
def trained_store(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("pipe")
    cfg = {
        "pipeline": {"stages": ["synth", "inet", "upzones", "correlate", "train"],
                     "seed": 3, "store": str(tmp / "store")},
        "synth": {"seed": 3, "n_users": 160, "n_regions": 36,
                  "regions_per_user": [6, 7], "venues_per_region": 4,
                  "returner_fraction": 0.5, "strict_fraction": 0.95},
        "inet": {"platforms": ["GP"]},
        "upzones": {"platform": "GP"},
        "correlate": {"platform": "GP", "keep_fraction": 0.75},
        "train": {"k": 3, "m": 2, "trials": 0, "by_mobility_class": True,
                  "hyperparams": {"n_trees": 25, "max_depth": 4, "num_leaves": 12,
                                  "min_child_samples": 10},
                  "shap_rows": 6, "importance_repeats": 2},
    }
    run_pipeline(cfg)
    return ArtifactStore(tmp / "store")


def test_pipeline_produces_expected_artifacts(trained_store):
    for name in ("regions", "context.csv", "inet_GP_h8", "inet_GP_h8.meta",
                 "upzones_GP_h8", "correlations_GP_h8", "model_region", "recsys_report"):
        assert trained_store.has(name), name
    report = trained_store.read_json("recsys_report")
    assert report["metrics"]["f1"] > 0
    assert (trained_store.root / "figures" / "importance_region.png").exists()
    assert (trained_store.root / "figures" / "upzones_GP_h8.png").exists()


# --------------------------------------------------------------------- api


@pytest.fixture(scope="module")
def client(trained_store):
    return TestClient(create_app(trained_store))


def test_health_and_levels(client):
    assert client.get("/api/v1/health").json()["status"] == "ok"
    assert "h8" in client.get("/api/v1/levels").json()["levels"]


def test_get_inet_with_stats(client):
    out = client.get("/api/v1/inet", params={"platform": "GP", "level": "h8"})
    assert out.status_code == 200
    body = out.json()
    assert body["stats"]["n_nodes"] > 0
    assert len(body["edges"]) == body["stats"]["n_edges"]
    assert body["config_hash"]


def test_missing_artifact_404_names_it(client):
    out = client.get("/api/v1/inet", params={"platform": "FS", "level": "h8"})
    assert out.status_code == 404
    assert "inet_FS_h8" in out.json()["detail"]


def test_get_upzones_and_regions(client):
    out = client.get("/api/v1/upzones", params={"platform": "GP", "level": "h8"}).json()
    assert out["n_zones"] >= 1 and out["zones"]
    regions = client.get("/api/v1/regions").json()
    assert regions["regions"]["features"]


def test_recommend_contract(client, trained_store):
    regions = sorted(
        f["properties"]["id"]
        for f in trained_store.read_json("regions")["features"]
    )
    visited = [[rid, c] for rid, c in zip(regions[:6], (9, 7, 5, 3, 2, 1))]
    out = client.post("/api/v1/recommend", json={"visited": visited, "k": 3, "m": 2})
    assert out.status_code == 200
    body = out.json()
    recs = body["recommendations"]
    assert 1 <= len(recs) <= 3
    scores = [r["score"] for r in recs]
    assert scores == sorted(scores, reverse=True)
    for rec in recs:
        assert rec["explanation"]
        assert len(rec["top_factors"]) <= 3
        assert len(rec["sub_regions"]) <= 2


def test_recommend_ineligible_422(client, trained_store):
    regions = sorted(
        f["properties"]["id"]
        for f in trained_store.read_json("regions")["features"]
    )
    # five visited regions but a tie at ranks 3/4: fails the strictness rule
    visited = [[rid, c] for rid, c in zip(regions[:5], (5, 4, 3, 3, 1))]
    out = client.post("/api/v1/recommend", json={"visited": visited, "k": 3})
    assert out.status_code == 422
    assert "strictly" in out.json()["detail"]


def test_recommend_malformed_400_with_fields(client):
    out = client.post("/api/v1/recommend", json={"k": 3})
    assert out.status_code == 400
    assert any("visited" in e["field"] for e in out.json()["errors"])


def test_api_matches_cli_bit_for_bit(client, trained_store, tmp_path):
    from urbanet.serving import load_serving_context, recommend_from_request

    regions = sorted(
        f["properties"]["id"]
        for f in trained_store.read_json("regions")["features"]
    )
    visited = [[rid, c] for rid, c in zip(regions[:6], (9, 7, 5, 3, 2, 1))]
    request = {"visited": visited, "k": 3, "m": 2}
    api_body = client.post("/api/v1/recommend", json=request).json()
    cli_body = recommend_from_request(load_serving_context(trained_store), request)
    assert json.dumps(api_body, sort_keys=True) == json.dumps(cli_body, sort_keys=True)
