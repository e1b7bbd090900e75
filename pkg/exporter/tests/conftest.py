import json

import pytest
import torch
from tokenizers.implementations import ByteLevelBPETokenizer
from tokenizers.processors import RobertaProcessing
from transformers import PreTrainedTokenizerFast, RobertaConfig, RobertaModel

FIXTURE_TEXTS = [
    "the quick brown fox jumps over the lazy dog",
    "a fast auburn fox leaps across a sleepy hound",
    "stock markets rallied on upbeat earnings news",
    "the championship game went into double overtime",
    "researchers announced a breakthrough in battery chemistry",
    "the quick brown fox jumps over the lazy dog",  # duplicate of row 0
    "local council approves new bicycle lanes downtown",
    "volcanic activity increased near the northern ridge",
    "streaming services raised subscription prices again",
    "astronomers spotted an unusually bright comet",
]


@pytest.fixture(scope="session")
def local_encoder(tmp_path_factory):
    """A roberta-architecture encoder (hidden size 768) built offline.

    The hub is not reachable in CI, so the default roberta-base checkpoint
    is stood in for by a single-layer random-weight model with a BPE
    tokenizer trained on the fixture texts; the export path is identical.
    """
    d = tmp_path_factory.mktemp("tiny-roberta")
    bpe = ByteLevelBPETokenizer()
    bpe.train_from_iterator(
        FIXTURE_TEXTS, vocab_size=600, min_frequency=1,
        special_tokens=["<s>", "<pad>", "</s>", "<unk>", "<mask>"],
    )
    bpe.post_processor = RobertaProcessing(
        sep=("</s>", bpe.token_to_id("</s>")), cls=("<s>", bpe.token_to_id("<s>"))
    )
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_object=bpe._tokenizer,
        bos_token="<s>", eos_token="</s>", unk_token="<unk>",
        pad_token="<pad>", mask_token="<mask>", cls_token="<s>", sep_token="</s>",
    )
    config = RobertaConfig(
        vocab_size=tokenizer.vocab_size,
        hidden_size=768,
        num_hidden_layers=1,
        num_attention_heads=8,
        intermediate_size=512,
        max_position_embeddings=514,
        pad_token_id=tokenizer.pad_token_id,
        bos_token_id=tokenizer.bos_token_id,
        eos_token_id=tokenizer.eos_token_id,
    )
    torch.manual_seed(0)
    RobertaModel(config).save_pretrained(d)
    tokenizer.save_pretrained(d)
    return str(d)


@pytest.fixture
def fixture_corpus(tmp_path):
    path = tmp_path / "corpus.jsonl"
    with path.open("w", encoding="utf-8") as fh:
        for i, text in enumerate(FIXTURE_TEXTS):
            fh.write(json.dumps({"id": i, "text": text}) + "\n")
    return path
