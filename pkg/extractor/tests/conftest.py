"""Shared fixtures: tiny local checkpoints so no network is ever touched.

The checkpoints are fabricated once per session with seeded weights. They are
real transformers/sentence-transformers saves, so every loading and inference
code path is the same one a published checkpoint would take, just at toy size.
"""

import os

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")
os.environ.setdefault("TOKENIZERS_PARALLELISM", "false")

import pytest

HIDDEN_DIM = 16

HEADLINES = [
    "court backs appeal in land dispute",
    "storm closes northern ports again",
    "parliament delays budget vote",
    "miners strike enters third week",
    "rail fares to rise in spring",
    "city council approves new bridge",
    "drought hits wheat harvest hard",
    "bank cuts rates to ten year low",
    "museum reopens after long repairs",
    "airline adds routes to the coast",
    "floods force hundreds from homes",
    "teachers reach deal on pay",
    "old dam removal begins monday",
    "health agency warns of flu wave",
    "startup buys rival for millions",
    "voters reject ballot measure",
    "bridge toll doubles next month",
    "festival draws record crowds",
    "power grid survives heat test",
    "library extends evening hours",
]


@pytest.fixture(scope="session")
def bert_dir(tmp_path_factory):
    """A seeded two-layer BERT checkpoint with a character-piece vocabulary."""
    import torch
    from transformers import BertConfig, BertModel, BertTokenizerFast

    root = tmp_path_factory.mktemp("bert")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    vocab += [chr(c) for c in range(ord("a"), ord("z") + 1)]
    vocab += ["##" + chr(c) for c in range(ord("a"), ord("z") + 1)]
    vocab_file = root / "vocab.txt"
    vocab_file.write_text("\n".join(vocab) + "\n", encoding="utf-8")
    tokenizer = BertTokenizerFast(vocab_file=str(vocab_file), do_lower_case=True)
    torch.manual_seed(0)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=HIDDEN_DIM,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=32,
        max_position_embeddings=64,
    )
    model = BertModel(config)
    tokenizer.save_pretrained(str(root))
    model.save_pretrained(str(root))
    return str(root)


@pytest.fixture(scope="session")
def t5_dir(tmp_path_factory):
    """A seeded encoder-decoder checkpoint using a byte-level tokenizer."""
    import torch
    from transformers import ByT5Tokenizer, T5Config, T5Model

    root = tmp_path_factory.mktemp("t5")
    torch.manual_seed(1)
    config = T5Config(
        vocab_size=384,
        d_model=HIDDEN_DIM,
        num_layers=2,
        num_decoder_layers=2,
        num_heads=2,
        d_ff=32,
        d_kv=8,
    )
    model = T5Model(config)
    ByT5Tokenizer().save_pretrained(str(root))
    model.save_pretrained(str(root))
    return str(root)


@pytest.fixture(scope="session")
def sbert_dir(tmp_path_factory, bert_dir):
    """A sentence-transformers save wrapping the BERT fixture with mean pooling."""
    from sentence_transformers import SentenceTransformer
    from sentence_transformers.sentence_transformer.modules import Pooling, Transformer

    root = tmp_path_factory.mktemp("sbert") / "model"
    encoder = SentenceTransformer(modules=[Transformer(bert_dir), Pooling(HIDDEN_DIM)])
    encoder.save(str(root))
    return str(root)


@pytest.fixture(scope="session")
def headlines_tsv(tmp_path_factory):
    """Twenty id<TAB>text rows of varying length."""
    path = tmp_path_factory.mktemp("inputs") / "headlines.tsv"
    lines = [f"h{i:02d}\t{text}" for i, text in enumerate(HEADLINES)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)
