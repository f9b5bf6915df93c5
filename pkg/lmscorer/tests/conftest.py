import os
import subprocess
import sys

import pytest
import torch

os.environ.setdefault("HF_HUB_DISABLE_PROGRESS_BARS", "1")
os.environ.setdefault("TRANSFORMERS_VERBOSITY", "error")


def run_kgc(args, **kw):
    """Invoke the consumer toolkit's CLI as a subprocess; the two packages
    only meet through files and this command line."""
    return subprocess.run([sys.executable, "-m", "kgcomplete", *map(str, args)],
                          capture_output=True, text=True, **kw)


def build_encoder(out_dir, texts, hidden=32, layers=2, seed=0, dropout=None):
    """Save a tiny randomly initialized BERT + word-level tokenizer whose
    vocabulary covers the given texts, loadable offline by name."""
    from tokenizers import Tokenizer
    from tokenizers.models import WordLevel
    from tokenizers.pre_tokenizers import Whitespace
    from transformers import BertConfig, BertModel, PreTrainedTokenizerFast

    pre = Whitespace()
    words = sorted({w for text in texts for w, _ in pre.pre_tokenize_str(text)})
    vocab = {t: i for i, t in
             enumerate(["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + words)}
    tok = Tokenizer(WordLevel(vocab, unk_token="[UNK]"))
    tok.pre_tokenizer = Whitespace()
    fast = PreTrainedTokenizerFast(
        tokenizer_object=tok, unk_token="[UNK]", pad_token="[PAD]",
        cls_token="[CLS]", sep_token="[SEP]", mask_token="[MASK]")
    fast.save_pretrained(out_dir)
    torch.manual_seed(seed)
    extra = {} if dropout is None else {"hidden_dropout_prob": dropout,
                                        "attention_probs_dropout_prob": dropout}
    config = BertConfig(vocab_size=len(vocab), hidden_size=hidden,
                        num_hidden_layers=layers, num_attention_heads=2,
                        intermediate_size=2 * hidden,
                        max_position_embeddings=160, **extra)
    BertModel(config).save_pretrained(out_dir)
    return out_dir


@pytest.fixture(scope="session")
def workspace(tmp_path_factory):
    """Synthetic dataset plus a full consumer pipeline run (split, negatives,
    KGE scores, integrator, evaluation)."""
    root = tmp_path_factory.mktemp("ws")
    data = root / "data"
    r = run_kgc(["synth", "--out", data, "--n-triples", "200"])
    assert r.returncode == 0, r.stderr
    r = run_kgc(["run", "--config", data / "config.json"])
    assert r.returncode == 0, r.stderr
    return data


@pytest.fixture(scope="session")
def dataset(workspace):
    from lmscorer.data import load_dataset
    return load_dataset(workspace / "metadata.tsv", workspace / "triples.tsv")


@pytest.fixture(scope="session")
def encoder_dir(tmp_path_factory, dataset):
    from lmscorer.data import entity_text
    out = tmp_path_factory.mktemp("encoder")
    texts = [entity_text(rec) for rec in dataset.entities.values()]
    return build_encoder(out, texts)


@pytest.fixture(scope="session")
def tokenizer(encoder_dir):
    from transformers import AutoTokenizer
    return AutoTokenizer.from_pretrained(encoder_dir)


@pytest.fixture(scope="session")
def eval_negatives(workspace):
    from lmscorer.data import load_negatives_dir
    return load_negatives_dir(workspace / "run" / "negatives")


@pytest.fixture(scope="session")
def train_triples(workspace):
    from lmscorer.data import load_split_dir
    return load_split_dir(workspace / "run" / "split")["train"]


@pytest.fixture(scope="session")
def trained(dataset, train_triples, eval_negatives, encoder_dir):
    """One shared 2-epoch fine-tune; tests assert on its history and reuse
    the checkpointed model."""
    from lmscorer.train import LmConfig, train_lm
    config = LmConfig(base=str(encoder_dir), batch_size=8, lr=1e-3, epochs=2,
                      negatives=2, max_length=48, seed=0)
    model, tok, history = train_lm(dataset, train_triples, eval_negatives, config)
    return model, tok, history, config
