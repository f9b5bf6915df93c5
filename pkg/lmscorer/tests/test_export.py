import hashlib
import json

import numpy as np
import pytest

from lmscorer.data import load_negatives_dir, query_pair
from lmscorer.encoding import TripleEncoder
from lmscorer.errors import ManifestMismatch
from lmscorer.export import export_entity_embeddings, export_scores
from lmscorer.model import embed_texts, score_pairs


@pytest.fixture(scope="module")
def exported(tmp_path_factory, trained, dataset, eval_negatives):
    model, tokenizer, _, config = trained
    enc = TripleEncoder(tokenizer, max_length=config.max_length)
    out = tmp_path_factory.mktemp("scores")
    export_scores(model, enc, dataset, eval_negatives, out, model_name="lm")
    return out


def _sha256(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_score_file_structure(exported, eval_negatives):
    rows = [line.split("\t") for line in
            (exported / "scores.tsv").read_text().splitlines()]
    by_query = {}
    for q, side, pos_idx, is_pos, score in rows:
        float(score)
        by_query.setdefault(int(q), []).append((side, int(pos_idx), is_pos))
    assert sorted(by_query) == list(range(eval_negatives.n_queries))
    for q, entries in by_query.items():
        query = eval_negatives.queries[q]
        positives = [e for e in entries if e[2] == "1"]
        negatives = [e for e in entries if e[2] == "0"]
        assert len(positives) == 1 and positives[0][1] == 0
        assert len(negatives) == len(eval_negatives.candidates[q])
        assert [i for _, i, _ in negatives] == list(range(len(negatives)))
        assert all(side == query.side for side, _, _ in entries)


def test_manifest_binds_negatives(exported, eval_negatives, workspace):
    manifest = json.loads((exported / "manifest.json").read_text())
    assert manifest["kind"] == "scores"
    assert manifest["model"] == "lm"
    assert manifest["n_queries"] == eval_negatives.n_queries
    assert manifest["negatives_manifest"] == _sha256(
        workspace / "run" / "negatives" / "manifest.json")
    assert manifest["files"]["scores.tsv"] == _sha256(exported / "scores.tsv")


def test_single_vs_batch_spot_check(exported, trained, dataset, eval_negatives):
    model, tokenizer, _, config = trained
    enc = TripleEncoder(tokenizer, max_length=config.max_length)
    stored = {}
    for line in (exported / "scores.tsv").read_text().splitlines():
        q, _, _, is_pos, score = line.split("\t")
        if is_pos == "1":
            stored[int(q)] = float(score)
    for q in (0, eval_negatives.n_queries // 2, eval_negatives.n_queries - 1):
        pair = query_pair(eval_negatives.queries[q], dataset)
        alone = float(score_pairs(model, enc, [pair], batch_size=1)[0])
        assert abs(alone - stored[q]) <= 1e-5


def test_negatives_loader_verifies_bytes(tmp_path, workspace):
    import shutil
    neg = tmp_path / "negatives"
    shutil.copytree(workspace / "run" / "negatives", neg)
    content = (neg / "negatives.tsv").read_text()
    (neg / "negatives.tsv").write_text(content + "0\thead\tC000\n")
    with pytest.raises(ManifestMismatch):
        load_negatives_dir(neg)

    (neg / "manifest.json").unlink()
    shutil.copy(workspace / "run" / "negatives" / "negatives.tsv", neg / "negatives.tsv")
    with pytest.raises(ManifestMismatch):
        load_negatives_dir(neg)


def test_embedding_export(tmp_path, trained, dataset):
    model, tokenizer, _, config = trained
    enc = TripleEncoder(tokenizer, max_length=config.max_length)
    out = tmp_path / "emb"
    export_entity_embeddings(model.encoder, enc, dataset, out,
                             mode="fine-tuned", encoder_name="tiny")
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["kind"] == "text-embeddings"
    assert manifest["mode"] == "fine-tuned"
    assert manifest["pooling"] == "cls-last-layer"
    assert manifest["keys"] == list(dataset.entities)
    assert manifest["n_entities"] == len(dataset.entities)
    assert manifest["files"]["vectors.f32"] == _sha256(out / "vectors.f32")

    vectors = np.fromfile(out / "vectors.f32", dtype="<f4").reshape(
        manifest["n_entities"], manifest["width"])
    texts = [dataset.text(k) for k in manifest["keys"]]
    again = embed_texts(model.encoder, enc, texts)
    assert np.array_equal(vectors, again)


def test_embedding_mode_is_checked(tmp_path, trained, dataset):
    model, tokenizer, _, config = trained
    enc = TripleEncoder(tokenizer, max_length=config.max_length)
    with pytest.raises(ValueError):
        export_entity_embeddings(model.encoder, enc, dataset, tmp_path / "x",
                                 mode="thawed", encoder_name="tiny")
