from dataclasses import replace

import pytest

from lyrnet.corpus import Vocabulary, encode_documents, generate_synthetic
from lyrnet.encoder import EncoderConfig
from lyrnet.heads import HeadConfig
from lyrnet.model import EmotionClassifier

# small enough that unit tests train in seconds
TINY_ENCODER = dict(n_layers=1, n_heads=2, d_model=16, d_ff=32, dropout_p=0.0, max_seq_len=64, memory_len=0)
TOY_ENCODER = dict(n_layers=2, n_heads=2, d_model=32, d_ff=64, dropout_p=0.1, max_seq_len=1024, memory_len=0)


def encoded_corpus(n_per_quadrant=4, seed=0, vocab_size=40, **kwargs):
    docs = generate_synthetic(n_per_quadrant, vocab_size=vocab_size, seed=seed, **kwargs)
    vocab = Vocabulary.build(d.lyrics for d in docs)
    encode_documents(docs, vocab)
    return docs, vocab


def make_model(vocab, seed=0, encoder=None, heads=None):
    cfg = EncoderConfig(vocab_size=len(vocab), **(encoder or TINY_ENCODER))
    return EmotionClassifier.initialize(cfg, heads or HeadConfig(dropout_p=0.0), seed=seed)


def copies(docs):
    return [replace(d) for d in docs]


@pytest.fixture
def tiny():
    docs, vocab = encoded_corpus()
    return docs, vocab, make_model(vocab)


# acceptance summary: one line per test marked ``acceptance("criterion")``

_ACCEPTANCE_LINES = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not (report.when == "call" or (report.when == "setup" and report.failed)):
        return
    detail = dict(item.user_properties).get("detail", "")
    verdict = "PASS" if report.passed else "FAIL"
    _ACCEPTANCE_LINES.append(f"[{verdict}] {marker.args[0]}" + (f": {detail}" if detail else ""))


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
