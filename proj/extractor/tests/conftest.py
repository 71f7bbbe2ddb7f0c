import os
import shutil
from pathlib import Path

import pytest

torch = pytest.importorskip("torch")
transformers = pytest.importorskip("transformers")
tokenizers = pytest.importorskip("tokenizers")

WORDS = "the a cat dog sat on mat ran fast slow big small red blue green it was very happy sad".split()
BLOCKS = 3
WIDTH = 32


@pytest.fixture(scope="session")
def tiny_tokenizer():
    """Offline word-level tokenizer over a fixed vocabulary."""
    from tokenizers import Tokenizer, models, pre_tokenizers

    vocab = {"[UNK]": 0, "[PAD]": 1, "[EOS]": 2, **{w: i + 3 for i, w in enumerate(WORDS)}}
    tok = Tokenizer(models.WordLevel(vocab=vocab, unk_token="[UNK]"))
    tok.pre_tokenizer = pre_tokenizers.Whitespace()
    return transformers.PreTrainedTokenizerFast(tokenizer_object=tok, unk_token="[UNK]", pad_token="[PAD]",
                                                eos_token="[EOS]")


@pytest.fixture(scope="session")
def tiny_model():
    """Randomly initialised GPT-2 with 3 blocks and width 32 (about 40K parameters)."""
    torch.manual_seed(0)
    cfg = transformers.GPT2Config(vocab_size=len(WORDS) + 3, n_positions=64, n_embd=WIDTH, n_layer=BLOCKS, n_head=2,
                                  resid_pdrop=0.0, embd_pdrop=0.0, attn_pdrop=0.0)
    model = transformers.GPT2Model(cfg)
    model.eval()
    return model


@pytest.fixture(scope="session")
def ilse_cli():
    """Path to the C++ CLI, if it has been built."""
    candidates = [os.environ.get("ILSE_CLI"), Path(__file__).resolve().parents[2] / "build" / "tools" / "ilse",
                  shutil.which("ilse")]
    for c in candidates:
        if c and Path(c).is_file() and os.access(c, os.X_OK):
            return str(c)
    return None
