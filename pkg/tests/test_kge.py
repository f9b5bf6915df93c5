import warnings

import numpy as np
import pytest

from kgcomplete.errors import NoCandidates
from kgcomplete.graph import Triple
from kgcomplete.kge import (KgeConfig, KgeModel, batch_loss_and_grads,
                            canonical_kind, init_model, load_kge, rank_loss,
                            sample_corruptions, save_kge, score_batch,
                            score_queries, score_triple, table_widths,
                            train_kge, validation_mrr)
from kgcomplete.splits import generate_negatives, make_transductive_split

from conftest import build_kg, random_typed_kg

ALL_KINDS = ["TransE", "DistMult", "ComplEx", "RotatE"]


def model_with_tables(kind, ent, rel, dim):
    config = KgeConfig(model_kind=kind, dim=dim, max_steps=0)
    return KgeModel(config=config, entity_emb=np.asarray(ent, dtype=np.float64),
                    relation_emb=np.asarray(rel, dtype=np.float64),
                    entity_keys=None, relations=None)


class TestScoreOracles:
    """Hand-computed scores on integer-valued embeddings are exact."""

    def test_transe(self):
        m = model_with_tables("TransE", [[1, 2], [1, 0]], [[0, 1]], dim=2)
        # h + r - t = (0, 3); negated L2 norm
        assert score_triple(m, Triple(0, 0, 1)) == pytest.approx(-3.0)

    def test_distmult(self):
        m = model_with_tables("DistMult", [[1, 2], [2, 1]], [[3, 1]], dim=2)
        # sum(h * r * t) = 1*3*2 + 2*1*1
        assert score_triple(m, Triple(0, 0, 1)) == pytest.approx(8.0)

    def test_complex(self):
        # dim=1 so rows are (real, imag): h=1+2i, r=2+1i, t=3+4i
        # Re(h r conj(t)) = Re((1+2i)(2+i)(3-4i)) = Re((0+5i)(3-4i)) = 20
        m = model_with_tables("ComplEx", [[1, 2], [3, 4]], [[2, 1]], dim=1)
        assert score_triple(m, Triple(0, 0, 1)) == pytest.approx(20.0)

    def test_rotate(self):
        # h = 1+0i rotated by pi/2 -> i; t = 0+1i -> distance 0
        m = model_with_tables("RotatE", [[1, 0], [0, 1]], [[np.pi / 2]], dim=1)
        assert score_triple(m, Triple(0, 0, 1)) == pytest.approx(0.0, abs=1e-12)
        # t = 1+0i: |i - 1| = sqrt(2)
        assert score_triple(m, Triple(0, 0, 0)) == pytest.approx(-np.sqrt(2.0))

    def test_rotate_invariant_to_global_phase(self):
        rng = np.random.default_rng(0)
        dim = 4
        ent = rng.normal(size=(6, 2 * dim))
        rel = rng.uniform(0, 2 * np.pi, size=(2, dim))
        m = model_with_tables("RotatE", ent, rel, dim)
        base = score_batch(m, np.array([0, 1]), np.array([0, 1]),
                           np.array([2, 3]))
        # rotating head and tail by the same phase preserves the distance
        phi = 0.7
        c, s = np.cos(phi), np.sin(phi)
        ent2 = ent.copy()
        re, im = ent[:, :dim], ent[:, dim:]
        ent2[:, :dim] = re * c - im * s
        ent2[:, dim:] = re * s + im * c
        m2 = model_with_tables("RotatE", ent2, rel, dim)
        got = score_batch(m2, np.array([0, 1]), np.array([0, 1]),
                          np.array([2, 3]))
        np.testing.assert_allclose(got, base, rtol=1e-10)

    def test_distmult_symmetric_in_head_tail(self):
        rng = np.random.default_rng(1)
        m = model_with_tables("DistMult", rng.normal(size=(5, 6)),
                              rng.normal(size=(2, 6)), dim=6)
        a = score_triple(m, Triple(1, 0, 3))
        b = score_triple(m, Triple(3, 0, 1))
        assert a == pytest.approx(b)


class TestWidths:

    @pytest.mark.parametrize("kind,ent_w,rel_w", [
        ("TransE", 8, 8), ("DistMult", 8, 8),
        ("ComplEx", 16, 16), ("RotatE", 16, 8),
    ])
    def test_table_widths(self, kind, ent_w, rel_w):
        assert table_widths(kind, 8) == (ent_w, rel_w)

    def test_canonical_kind_accepts_aliases(self):
        assert canonical_kind("complex") == "ComplEx"
        assert canonical_kind("RotatE") == "RotatE"
        with pytest.raises(ValueError):
            canonical_kind("hole")


class TestInit:

    def test_uniform_bound_and_determinism(self):
        config = KgeConfig(model_kind="DistMult", dim=32, seed=5)
        m1 = init_model(config, 20, 3)
        m2 = init_model(config, 20, 3)
        bound = 0.5 / 32
        assert np.all(np.abs(m1.entity_emb) <= bound)
        assert np.all(np.abs(m1.relation_emb) <= bound)
        np.testing.assert_array_equal(m1.entity_emb, m2.entity_emb)
        np.testing.assert_array_equal(m1.relation_emb, m2.relation_emb)

    def test_rotate_relations_are_phases(self):
        config = KgeConfig(model_kind="RotatE", dim=16, seed=0)
        m = init_model(config, 10, 4)
        assert m.relation_emb.shape == (4, 16)
        assert m.entity_emb.shape == (10, 32)
        assert np.all(m.relation_emb >= 0) and np.all(m.relation_emb < 2 * np.pi)
        assert m.relation_emb.max() > 1.0  # genuinely spans beyond the init bound

    def test_config_validation(self):
        with pytest.raises(ValueError):
            KgeConfig(model_kind="DistMult", dim=0)
        with pytest.raises(ValueError):
            KgeConfig(model_kind="DistMult", dim=4, negatives=0)
        with pytest.raises(ValueError):
            KgeConfig(model_kind="nope", dim=4)


class TestRankLoss:

    def test_hand_values(self):
        # margin 1: max(0, 1 - 2 + s') over s' in {0.5, 2.0} -> {0, 1}
        assert rank_loss(2.0, [0.5, 2.0], margin=1.0) == pytest.approx(0.5)
        assert rank_loss(5.0, [0.0], margin=1.0) == 0.0
        assert rank_loss(0.0, [0.0], margin=1.0) == 1.0

    def test_empty_negatives_rejected(self):
        with pytest.raises(ValueError):
            rank_loss(1.0, [], margin=1.0)


class TestGradients:
    """Analytic batch gradients match central finite differences."""

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_batch_loss_fd(self, kind):
        rng = np.random.default_rng(hash(kind) % 2 ** 31)
        dim = 4
        ew, rw = table_widths(kind, dim)
        n_ent, n_rel = 7, 3
        for trial in range(5):
            ent = rng.normal(scale=0.8, size=(n_ent, ew))
            rel = (rng.uniform(0, 2 * np.pi, size=(n_rel, rw))
                   if kind == "RotatE" else rng.normal(scale=0.8, size=(n_rel, rw)))
            pos = np.stack([rng.integers(0, n_ent, size=3),
                            rng.integers(0, n_rel, size=3),
                            rng.integers(0, n_ent, size=3)], axis=1)
            neg = np.stack([rng.integers(0, n_ent, size=(3, 4)),
                            rng.integers(0, n_rel, size=(3, 4)),
                            rng.integers(0, n_ent, size=(3, 4))], axis=2)
            loss, gent, grel = batch_loss_and_grads(kind, ent, rel, pos, neg,
                                                    margin=1.0, l3_coeff=1e-3)
            eps = 1e-6
            for table, gtable in ((ent, gent), (rel, grel)):
                flat = table.ravel()
                idxs = rng.choice(flat.size, size=min(10, flat.size),
                                  replace=False)
                for i in idxs:
                    orig = flat[i]
                    flat[i] = orig + eps
                    up, _, _ = batch_loss_and_grads(kind, ent, rel, pos, neg,
                                                    1.0, 1e-3)
                    flat[i] = orig - eps
                    dn, _, _ = batch_loss_and_grads(kind, ent, rel, pos, neg,
                                                    1.0, 1e-3)
                    flat[i] = orig
                    fd = (up - dn) / (2 * eps)
                    an = gtable.ravel()[i]
                    denom = max(abs(fd), abs(an), 1e-8)
                    assert abs(fd - an) / denom < 1e-4, (kind, trial, i, fd, an)

    def test_loss_includes_l3_of_touched_rows(self):
        # With margin 0 and pos == neg scores the hinge contributes nothing,
        # leaving exactly the cubic penalty of rows used by the batch.
        ent = np.full((4, 2), 2.0)
        rel = np.full((2, 2), 3.0)
        pos = np.array([[0, 0, 1]])
        neg = np.array([[[0, 0, 1]]])
        loss, gent, grel = batch_loss_and_grads("DistMult", ent, rel, pos, neg,
                                                margin=0.0, l3_coeff=1.0)
        # hinge: max(0, 0 - s + s) = 0 on the single pair
        want = 2 * (2.0 ** 3) * 2 + 1 * (3.0 ** 3) * 2
        assert loss == pytest.approx(want)
        assert gent[2].tolist() == [0.0, 0.0]  # untouched row
        assert grel[1].tolist() == [0.0, 0.0]
        assert gent[0].tolist() == [12.0, 12.0]  # 3 x^2 at x=2


class TestCorruptions:

    def test_type_preserved_and_not_original(self):
        kg = random_typed_kg(np.random.default_rng(0), n_triples=60)
        rng = np.random.default_rng(1)
        t = kg.triple(0)
        cors = sample_corruptions(kg, t, 64, rng)
        assert len(cors) == 64
        for c in cors:
            assert (c.head == t.head) != (c.tail == t.tail) or \
                (c.head != t.head or c.tail != t.tail)
            if c.head != t.head:
                assert kg.entity_types[c.head] == kg.entity_types[t.head]
                assert c.tail == t.tail
            else:
                assert kg.entity_types[c.tail] == kg.entity_types[t.tail]
                assert c.tail != t.tail

    def test_no_candidates_when_pool_is_singleton(self):
        kg = build_kg({"a": 1, "b": 2}, [(0, "r", 1), (0, "r", 2)])
        rng = np.random.default_rng(0)
        with pytest.raises(NoCandidates):
            # only one "a" entity; head-side corruption impossible
            sample_corruptions(kg, kg.triple(0), 8, np.random.default_rng(0))

    def test_collision_kept_with_warning_when_pool_saturated(self):
        # complete bipartite positives: every same-type replacement collides
        # with a known positive and is kept after 10 redraws.
        kg = build_kg({"a": 2, "b": 2},
                      [(0, "r", 2), (0, "r", 3), (1, "r", 2), (1, "r", 3)])
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            cors = sample_corruptions(kg, kg.triple(0), 4,
                                      np.random.default_rng(0))
        assert any(issubclass(w.category, RuntimeWarning) for w in caught)
        for c in cors:
            assert kg.has_triple(c.head, c.rel, c.tail)


class TestTraining:

    def small_setup(self, seed=0):
        kg = random_typed_kg(np.random.default_rng(seed), n_types=2,
                             entities_per_type=10, n_relations=2, n_triples=80)
        split = make_transductive_split(kg, 0.1, 0.1, seed=seed)
        neg = generate_negatives(kg, split, m_eval=5, seed=seed)
        return kg.with_triples(split.train), neg

    def test_zero_steps_returns_init(self):
        kg_train, neg = self.small_setup()
        config = KgeConfig(model_kind="DistMult", dim=8, max_steps=0, seed=3)
        model = train_kge(kg_train, neg, config)
        ref = init_model(config, kg_train.num_entities, kg_train.num_relations)
        np.testing.assert_array_equal(model.entity_emb, ref.entity_emb)
        np.testing.assert_array_equal(model.relation_emb, ref.relation_emb)

    def test_training_is_deterministic(self):
        kg_train, neg = self.small_setup()
        config = KgeConfig(model_kind="TransE", dim=8, max_steps=30,
                           eval_every=10, batch_size=16, negatives=4,
                           lr=0.01, seed=7)
        a = train_kge(kg_train, neg, config)
        b = train_kge(kg_train, neg, config)
        np.testing.assert_array_equal(a.entity_emb, b.entity_emb)
        np.testing.assert_array_equal(a.relation_emb, b.relation_emb)
        assert a.best_valid_mrr == b.best_valid_mrr
        assert a.step == b.step

    def test_checkpoint_is_best_validation_mrr(self):
        kg_train, neg = self.small_setup(seed=1)
        config = KgeConfig(model_kind="DistMult", dim=8, max_steps=40,
                           eval_every=10, batch_size=16, negatives=4,
                           lr=0.05, seed=2)
        model = train_kge(kg_train, neg, config)
        assert model.best_valid_mrr == pytest.approx(
            validation_mrr(model, neg))

    def test_training_without_validation_returns_final(self):
        kg_train, neg = self.small_setup(seed=2)
        config = KgeConfig(model_kind="DistMult", dim=8, max_steps=25,
                           eval_every=10, batch_size=16, negatives=4, seed=2)
        model = train_kge(kg_train, None, config)
        assert model.step == 25
        assert model.best_valid_mrr is None

    def test_loss_decreases_on_average(self):
        kg_train, neg = self.small_setup(seed=3)
        losses = []
        config = KgeConfig(model_kind="DistMult", dim=8, max_steps=120,
                           eval_every=60, batch_size=32, negatives=8,
                           lr=0.05, seed=0)
        train_kge(kg_train, neg, config,
                  progress=lambda step, loss: losses.append(loss))
        first = np.mean(losses[:20])
        last = np.mean(losses[-20:])
        assert last < first


class TestScoreQueries:

    def test_alignment_and_parity_with_score_batch(self):
        kg = random_typed_kg(np.random.default_rng(4), n_triples=70)
        split = make_transductive_split(kg, 0.1, 0.1, seed=0)
        neg = generate_negatives(kg, split, m_eval=6, seed=0)
        config = KgeConfig(model_kind="ComplEx", dim=4, max_steps=0, seed=0)
        model = init_model(config, kg.num_entities, kg.num_relations)
        ss = score_queries(model, neg, model_name="cx")
        assert ss.model_name == "cx"
        assert ss.n_queries == neg.n_queries
        for q, pool in zip(neg.queries, neg.negatives):
            want_pos = score_triple(model, q.triple)
            assert ss.pos[q.index] == pytest.approx(want_pos)
            assert ss.negs[q.index].shape[0] == pool.shape[0]
            for j, e in enumerate(pool):
                cand = (Triple(int(e), q.triple.rel, q.triple.tail)
                        if q.side == "head"
                        else Triple(q.triple.head, q.triple.rel, int(e)))
                assert ss.negs[q.index][j] == pytest.approx(
                    score_triple(model, cand))


class TestPersistence:

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_round_trip_float32(self, kind, tmp_path):
        kg = random_typed_kg(np.random.default_rng(5), n_triples=60)
        config = KgeConfig(model_kind=kind, dim=4, max_steps=0, seed=1)
        model = init_model(config, kg.num_entities, kg.num_relations,
                           entity_keys=[e.key for e in kg.entities],
                           relations=list(kg.relations))
        save_kge(tmp_path / "m", model)
        loaded = load_kge(tmp_path / "m")
        np.testing.assert_array_equal(
            loaded.entity_emb, model.entity_emb.astype(np.float32))
        assert loaded.config == model.config
        assert loaded.entity_keys == model.entity_keys
        assert loaded.relations == model.relations

    def test_tampered_blob_rejected(self, tmp_path):
        from kgcomplete.errors import HashMismatch
        kg = random_typed_kg(np.random.default_rng(6), n_triples=60)
        config = KgeConfig(model_kind="TransE", dim=4, max_steps=0)
        model = init_model(config, kg.num_entities, kg.num_relations)
        save_kge(tmp_path / "m", model)
        blob = tmp_path / "m" / "entity_emb.f32"
        raw = bytearray(blob.read_bytes())
        raw[0] ^= 0xFF
        blob.write_bytes(bytes(raw))
        with pytest.raises(HashMismatch):
            load_kge(tmp_path / "m")
