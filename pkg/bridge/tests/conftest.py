"""Shared fixtures: tiny locally built models and QA datasets.

Everything is constructed in-process (word-level tokenizers, 2-layer
models), so the suite runs offline. The causal LM is briefly trained to
memorize half of its QA items; produced records then carry a real quality
spread, which the evaluation-facing tests need. Classifier fixtures stay
randomly initialized: wire-contract tests only need deterministic scores.
"""

from __future__ import annotations

import json
import threading
import time

import pytest
import torch
from tokenizers import Tokenizer, decoders, models, pre_tokenizers, processors
from transformers import (
    BertConfig,
    BertForSequenceClassification,
    GPT2Config,
    GPT2LMHeadModel,
    PreTrainedTokenizerFast,
)

MARK = "▁"

ANSWER_WORDS = (
    "red", "blue", "green", "gold", "grey", "teal", "plum", "rust",
    "jet", "bone", "sage", "rose", "fawn", "mint", "coal", "snow",
)
_ONSETS = ("b", "cl", "d", "f", "gr", "h", "j", "k", "l", "m",
           "n", "p", "qu", "r", "s", "t", "v", "w", "y", "z")
_RIMES = ("ar", "el", "im", "on", "us", "ex", "oa", "ib", "ud", "ey")


def qa_items(n: int) -> list[dict]:
    """Deterministic QA items over a closed word vocabulary.

    Three behavior classes, assigned by index, give the trained LM fixture a
    quality spread along with distinct confidence/consistency signatures:
    even items get one clean answer, items = 1 mod 4 get a three-word answer
    the training corpus presents in every word order (so sampled generations
    vary in order but not in meaning), and items = 3 mod 4 are trained toward
    two wrong answers (diffuse and incorrect).
    """
    entities = [o + r for o in _ONSETS for r in _RIMES][:n]
    assert len(entities) == n
    k = len(ANSWER_WORDS)
    items = []
    for i, e in enumerate(entities):
        if i % 4 == 1:
            answer = " ".join(
                (ANSWER_WORDS[i % k], ANSWER_WORDS[(i + 5) % k], ANSWER_WORDS[(i + 11) % k])
            )
        else:
            answer = ANSWER_WORDS[(i * 7) % k]
        items.append(
            {
                "id": f"tq_{i:04d}",
                "question": f"which color marks {e}",
                "answers": [answer],
            }
        )
    return items


def training_rows(items: list[dict]) -> list[tuple[str, str]]:
    """(question, target) pairs realizing each item's behavior class."""
    import itertools

    k = len(ANSWER_WORDS)
    rows = []
    for i, item in enumerate(items):
        question = item["question"]
        if i % 4 == 1:
            for perm in itertools.permutations(item["answers"][0].split()):
                rows.append((question, " ".join(perm)))
        elif i % 4 == 3:
            rows.append((question, ANSWER_WORDS[(i + 3) % k]))
            rows.append((question, ANSWER_WORDS[(i + 8) % k]))
        else:
            rows.append((question, item["answers"][0]))
    return rows


def qa_vocabulary(items: list[dict]) -> list[str]:
    words = set(ANSWER_WORDS) | {"Q:", "A:"}
    for item in items:
        words.update(item["question"].split())
    return sorted(words)


def build_lm_tokenizer(words: list[str]) -> PreTrainedTokenizerFast:
    vocab = {"[UNK]": 0, "[EOS]": 1}
    for word in words:
        vocab[MARK + word] = len(vocab)
    tok = Tokenizer(models.WordLevel(vocab, unk_token="[UNK]"))
    tok.pre_tokenizer = pre_tokenizers.Metaspace(replacement=MARK, prepend_scheme="first")
    tok.decoder = decoders.Metaspace(replacement=MARK, prepend_scheme="first")
    return PreTrainedTokenizerFast(
        tokenizer_object=tok,
        unk_token="[UNK]",
        eos_token="[EOS]",
        pad_token="[EOS]",
        model_max_length=128,
    )


def train_lm(
    tokenizer: PreTrainedTokenizerFast,
    rows: list[tuple[str, str]],
    steps: int = 600,
    seed: int = 7,
) -> GPT2LMHeadModel:
    """Fit the (question, target) rows; loss covers only the completion and
    EOS, so repeated questions with different targets converge to a mixture.

    The prompt format must match FIXTURE_TEMPLATE: the word-level tokenizer
    folds a newline into its neighbor word, so the template stays on one line.
    """
    encoded = []
    width = 0
    for question, target in rows:
        prompt = tokenizer.encode(f"Q: {question} A:")
        full = prompt + tokenizer.encode(f" {target}") + [1]
        encoded.append((len(prompt), full))
        width = max(width, len(full))
    rows, labs = [], []
    for prompt_len, full in encoded:
        pad = width - len(full)
        rows.append(full + [1] * pad)
        labs.append([-100] * prompt_len + full[prompt_len:] + [-100] * pad)
    input_ids = torch.tensor(rows)
    labels = torch.tensor(labs)
    lengths = torch.tensor([len(full) for _, full in encoded])
    mask = (torch.arange(width).expand(len(rows), width) < lengths.unsqueeze(1)).long()

    torch.manual_seed(seed)
    model = GPT2LMHeadModel(
        GPT2Config(
            vocab_size=len(tokenizer),
            n_positions=128,
            n_embd=64,
            n_layer=2,
            n_head=2,
            bos_token_id=1,
            eos_token_id=1,
        )
    )
    optimizer = torch.optim.Adam(model.parameters(), lr=3e-3)
    for _ in range(steps):
        loss = model(input_ids=input_ids, attention_mask=mask, labels=labels).loss
        loss.backward()
        optimizer.step()
        optimizer.zero_grad()
    model.eval()
    return model


def build_classifier(
    words: list[str], num_labels: int, id2label: dict[int, str], seed: int
):
    vocab = {"[PAD]": 0, "[UNK]": 1, "[CLS]": 2, "[SEP]": 3}
    for word in words:
        vocab[word] = len(vocab)
    tok = Tokenizer(models.WordLevel(vocab, unk_token="[UNK]"))
    tok.pre_tokenizer = pre_tokenizers.Whitespace()
    tok.post_processor = processors.TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B:1 [SEP]:1",
        special_tokens=[("[CLS]", 2), ("[SEP]", 3)],
    )
    fast = PreTrainedTokenizerFast(
        tokenizer_object=tok,
        unk_token="[UNK]",
        pad_token="[PAD]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        model_max_length=128,
    )
    torch.manual_seed(seed)
    model = BertForSequenceClassification(
        BertConfig(
            vocab_size=len(vocab),
            hidden_size=32,
            num_hidden_layers=2,
            num_attention_heads=2,
            intermediate_size=64,
            max_position_embeddings=128,
            num_labels=num_labels,
            id2label=id2label,
            label2id={v: k for k, v in id2label.items()},
        )
    )
    model.eval()
    return fast, model


def write_dataset(path, items: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for item in items:
            handle.write(json.dumps(item) + "\n")


N_ITEMS = 200
FIXTURE_TEMPLATE = "Q: {question} A:"


@pytest.fixture(scope="session")
def dataset_items() -> list[dict]:
    return qa_items(N_ITEMS)


@pytest.fixture(scope="session")
def template_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("templates") / "qa_oneline.txt"
    path.write_text(FIXTURE_TEMPLATE, encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def dataset_path(tmp_path_factory, dataset_items):
    path = tmp_path_factory.mktemp("data") / "qa.jsonl"
    write_dataset(path, dataset_items)
    return path


@pytest.fixture(scope="session")
def lm_dir(tmp_path_factory, dataset_items):
    """Causal LM fitted to the dataset's three behavior classes."""
    tokenizer = build_lm_tokenizer(qa_vocabulary(dataset_items))
    model = train_lm(tokenizer, training_rows(dataset_items))
    path = tmp_path_factory.mktemp("models") / "lm"
    tokenizer.save_pretrained(path)
    model.save_pretrained(path)
    return path


@pytest.fixture(scope="session")
def cross_encoder_dir(tmp_path_factory, dataset_items):
    tokenizer, model = build_classifier(
        qa_vocabulary(dataset_items), num_labels=1, id2label={0: "similarity"}, seed=11
    )
    path = tmp_path_factory.mktemp("models") / "cross"
    tokenizer.save_pretrained(path)
    model.save_pretrained(path)
    return path


@pytest.fixture(scope="session")
def nli_dir(tmp_path_factory, dataset_items):
    tokenizer, model = build_classifier(
        qa_vocabulary(dataset_items),
        num_labels=3,
        id2label={0: "ENTAILMENT", 1: "NEUTRAL", 2: "CONTRADICTION"},
        seed=12,
    )
    path = tmp_path_factory.mktemp("models") / "nli"
    tokenizer.save_pretrained(path)
    model.save_pretrained(path)
    return path


@pytest.fixture(scope="session")
def produced_records(tmp_path_factory, lm_dir, dataset_path, template_path):
    """Records for the full dataset: 200 prompts, M=5, exact-match quality."""
    from cocoa_bridge.producer import ProducerConfig, produce_records

    path = tmp_path_factory.mktemp("records") / "produced.jsonl"
    count = produce_records(
        ProducerConfig(
            model=str(lm_dir),
            dataset=str(dataset_path),
            output=str(path),
            template=str(template_path),
            grader="token_f1",
            m=5,
            max_new_tokens=6,
            seed=0,
        )
    )
    assert count == N_ITEMS
    return path


class UvicornThread:
    """Runs the provider app in a daemon thread on an OS-assigned port."""

    def __init__(self, app):
        import uvicorn

        self._config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
        self._server = uvicorn.Server(self._config)
        self._thread = threading.Thread(target=self._server.run, daemon=True)

    def __enter__(self) -> str:
        self._thread.start()
        deadline = time.monotonic() + 15
        while not self._server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("server did not start")
            time.sleep(0.02)
        port = self._server.servers[0].sockets[0].getsockname()[1]
        # Base URL: consumers append route paths (the engine adds /similarity).
        return f"http://127.0.0.1:{port}"

    def __exit__(self, *exc):
        self._server.should_exit = True
        self._thread.join(timeout=5)
