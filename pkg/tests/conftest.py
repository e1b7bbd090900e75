import threading

import numpy as np
import pytest

from al_llm.corpus import Corpus, Instance
from al_llm.mock_server import make_server


@pytest.fixture
def separable_toy():
    """20 points in 2-D with a wide margin at x0 = 0; classes 0/1."""
    rng = np.random.default_rng(0)
    X0 = rng.normal(0, 0.3, (10, 2)) + np.array([-2.0, 0.0])
    X1 = rng.normal(0, 0.3, (10, 2)) + np.array([2.0, 0.0])
    X = np.vstack([X0, X1])
    y = np.array([0] * 10 + [1] * 10)
    assert X0[:, 0].max() < -1.0 < 1.0 < X1[:, 0].min()  # margin holds
    return X, y


@pytest.fixture
def small_corpus():
    texts = [
        "alpha beta gamma delta",
        "epsilon zeta eta theta",
        "iota kappa lambda mu",
        "nu xi omicron pi",
        "rho sigma tau upsilon",
        "phi chi psi omega",
    ]
    labels = [0, 1, 0, 1, 0, 1]
    return Corpus(
        instances=tuple(Instance(i, t, l) for i, (t, l) in enumerate(zip(texts, labels))),
        label_names=("neg", "pos"),
    )


class MockEndpoint:
    """A live scripted chat endpoint on an ephemeral port."""

    def __init__(self, script):
        self.server, self.book = make_server(script)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()
        host, port = self.server.server_address[:2]
        self.url = f"http://{host}:{port}/v1/chat/completions"

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def mock_endpoint():
    endpoints = []

    def start(script):
        ep = MockEndpoint(script)
        endpoints.append(ep)
        return ep

    yield start
    for ep in endpoints:
        ep.close()
