import numpy as np
import pytest

from kgcomplete.errors import (HashMismatch, MissingVector, NoSameTypeNeighbor,
                               ZeroVector)
from kgcomplete.inductive import (ImputationReport, TextEmbeddingFile,
                                  cosine_sim, impute_embeddings, load_report,
                                  load_text_embeddings, random_baseline,
                                  save_report, save_text_embeddings)
from kgcomplete.kge import KgeConfig, init_model


def toy_model(n_entities=12, dim=4, kind="DistMult", seed=0):
    config = KgeConfig(model_kind=kind, dim=dim, seed=seed, max_steps=0)
    keys = [f"E{i}" for i in range(n_entities)]
    return init_model(config, n_entities, 2, entity_keys=keys,
                      relations=["r0", "r1"])


def toy_text(keys, width=6, seed=1):
    rng = np.random.default_rng(seed)
    vectors = rng.normal(0, 1, (len(keys), width))
    return TextEmbeddingFile(encoder="toy", keys=list(keys), vectors=vectors)


class TestCosine:

    def test_hand_value(self):
        got = cosine_sim([1.0, 2.0, 3.0], [4.0, 5.0, 6.0])
        assert got == pytest.approx(32.0 / np.sqrt(14.0 * 77.0))

    def test_extremes(self):
        assert cosine_sim([1.0, 0.0], [0.0, 2.0]) == pytest.approx(0.0)
        assert cosine_sim([1.0, 1.0], [3.0, 3.0]) == pytest.approx(1.0)
        assert cosine_sim([1.0, 1.0], [-2.0, -2.0]) == pytest.approx(-1.0)

    def test_zero_vector_rejected(self):
        with pytest.raises(ZeroVector):
            cosine_sim([0.0, 0.0], [1.0, 2.0])
        with pytest.raises(ZeroVector):
            cosine_sim([1.0, 2.0], [0.0, 0.0])

    def test_width_mismatch_rejected(self):
        with pytest.raises(ValueError):
            cosine_sim([1.0, 2.0], [1.0, 2.0, 3.0])


class TestImpute:

    def test_matches_brute_force_nearest_neighbor(self):
        model = toy_model()
        text = toy_text(model.entity_keys)
        types = ["gene" if i % 2 == 0 else "disease" for i in range(12)]
        unseen = [3, 7, 10]
        seen = [i for i in range(12) if i not in unseen]
        imputed, report = impute_embeddings(model, text, seen, unseen, types)
        for u in unseen:
            cands = [s for s in seen if types[s] == types[u]]
            sims = [cosine_sim(text.vector(f"E{u}"), text.vector(f"E{s}"))
                    for s in cands]
            best = cands[int(np.argmax(sims))]
            assert report.neighbors[f"E{u}"] == f"E{best}"
            assert report.similarities[f"E{u}"] == pytest.approx(max(sims))
            assert np.array_equal(imputed.entity_emb[u], model.entity_emb[best])

    def test_seen_rows_and_relations_untouched(self):
        model = toy_model()
        text = toy_text(model.entity_keys)
        types = ["t"] * 12
        imputed, _ = impute_embeddings(model, text, range(10), [10, 11], types)
        assert np.array_equal(imputed.entity_emb[:10], model.entity_emb[:10])
        assert np.array_equal(imputed.relation_emb, model.relation_emb)
        assert imputed.entity_keys == model.entity_keys
        # the original model is never mutated
        assert not np.array_equal(imputed.entity_emb[10], model.entity_emb[10])

    def test_tie_picks_lowest_id(self):
        model = toy_model(n_entities=5)
        vectors = np.ones((5, 3))
        vectors[1] = [0.0, 1.0, 0.0]
        text = TextEmbeddingFile(encoder="toy", keys=model.entity_keys,
                                 vectors=vectors)
        # entities 0, 2, 3 are seen and share identical text, so the
        # tied-best neighbor for 4 must be the lowest id
        imputed, report = impute_embeddings(model, text, [0, 1, 2, 3], [4],
                                            ["t"] * 5)
        assert report.neighbors["E4"] == "E0"
        assert np.array_equal(imputed.entity_emb[4], model.entity_emb[0])

    def test_no_same_type_neighbor(self):
        model = toy_model(n_entities=4)
        text = toy_text(model.entity_keys)
        types = ["a", "a", "a", "b"]
        with pytest.raises(NoSameTypeNeighbor):
            impute_embeddings(model, text, [0, 1, 2], [3], types)

    def test_missing_text_vector(self):
        model = toy_model(n_entities=4)
        text = toy_text(model.entity_keys[:3])
        with pytest.raises(MissingVector):
            impute_embeddings(model, text, [0, 1, 2], [3], ["t"] * 4)

    def test_zero_text_vectors_rejected(self):
        model = toy_model(n_entities=4)
        vectors = np.ones((4, 3))
        vectors[3] = 0.0
        text = TextEmbeddingFile(encoder="toy", keys=model.entity_keys,
                                 vectors=vectors)
        with pytest.raises(ZeroVector):
            impute_embeddings(model, text, [0, 1, 2], [3], ["t"] * 4)
        vectors2 = np.ones((4, 3))
        vectors2[1] = 0.0
        text2 = TextEmbeddingFile(encoder="toy", keys=model.entity_keys,
                                  vectors=vectors2)
        with pytest.raises(ZeroVector):
            impute_embeddings(model, text2, [0, 1, 2], [3], ["t"] * 4)

    def test_keys_required(self):
        model = toy_model(n_entities=4)
        model.entity_keys = None
        text = toy_text([f"E{i}" for i in range(4)])
        with pytest.raises(ValueError):
            impute_embeddings(model, text, [0, 1, 2], [3], ["t"] * 4)


class TestRandomBaseline:

    def test_only_unseen_rows_replaced_within_init_bound(self):
        model = toy_model(dim=4)
        out = random_baseline(model, [2, 5], seed=9)
        bound = 0.5 / 4
        for u in (2, 5):
            assert not np.array_equal(out.entity_emb[u], model.entity_emb[u])
            assert np.abs(out.entity_emb[u]).max() <= bound
        seen = [i for i in range(12) if i not in (2, 5)]
        assert np.array_equal(out.entity_emb[seen], model.entity_emb[seen])
        assert np.array_equal(out.relation_emb, model.relation_emb)

    def test_seeded_determinism(self):
        model = toy_model()
        a = random_baseline(model, [1, 4], seed=7)
        b = random_baseline(model, [1, 4], seed=7)
        c = random_baseline(model, [1, 4], seed=8)
        assert np.array_equal(a.entity_emb, b.entity_emb)
        assert not np.array_equal(a.entity_emb, c.entity_emb)


class TestPersistence:

    def test_text_embedding_round_trip(self, tmp_path):
        text = toy_text([f"E{i}" for i in range(6)], width=5)
        save_text_embeddings(tmp_path, text)
        loaded = load_text_embeddings(tmp_path)
        assert loaded.encoder == "toy"
        assert loaded.keys == text.keys
        assert loaded.width == 5
        # storage is float32, so the round trip is exact at that precision
        want = text.vectors.astype(np.float32).astype(np.float64)
        assert np.array_equal(loaded.vectors, want)
        assert loaded.has("E3")
        assert not loaded.has("E9")
        with pytest.raises(MissingVector):
            loaded.vector("E9")

    def test_tampered_vectors_detected(self, tmp_path):
        save_text_embeddings(tmp_path, toy_text([f"E{i}" for i in range(4)]))
        blob = bytearray((tmp_path / "vectors.f32").read_bytes())
        blob[-1] ^= 0xFF
        (tmp_path / "vectors.f32").write_bytes(bytes(blob))
        with pytest.raises(HashMismatch):
            load_text_embeddings(tmp_path)

    def test_report_round_trip(self, tmp_path):
        report = ImputationReport(neighbors={"E4": "E0"},
                                  similarities={"E4": 0.875})
        save_report(tmp_path / "imputation.json", report)
        loaded = load_report(tmp_path / "imputation.json")
        assert loaded.neighbors == report.neighbors
        assert loaded.similarities == report.similarities
