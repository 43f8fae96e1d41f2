"""Shared builders and stubs for the test suite."""

from __future__ import annotations

import hashlib
import json
import random
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from cocoa_uq.records import GenerationRecord, Sequence, TokenObservation
from cocoa_uq.similarity import SimilaritySource

# Small vocabulary sampled with replacement so texts repeat words; repeated
# words are what make token-level relevance non-uniform.
VOCAB = (
    "ash", "birch", "cedar", "dune", "ember", "fjord",
    "grove", "heron", "inlet", "juniper", "kelp", "loam",
)


def make_seq(words, log_probs, entropies=None, text=None):
    if entropies is None:
        entropies = [None] * len(words)
    tokens = tuple(
        TokenObservation(
            text=w if i == 0 else " " + w,
            log_prob=lp,
            dist_entropy=ent,
        )
        for i, (w, lp, ent) in enumerate(zip(words, log_probs, entropies, strict=True))
    )
    return Sequence(tokens=tokens, text=text if text is not None else " ".join(words))


def random_seq(rng: random.Random, min_len=1, max_len=12, mass_shift=0.0, vocab=VOCAB):
    length = rng.randint(min_len, max_len)
    words = [rng.choice(vocab) for _ in range(length)]
    lps = [rng.uniform(-2.5, -0.01) + mass_shift / length for _ in range(length)]
    ents = [rng.uniform(0.0, 3.0) for _ in range(length)]
    return make_seq(words, lps, ents)


def random_record(
    rng: random.Random,
    index: int = 0,
    m_max: int = 8,
    l_max: int = 12,
    mass_constrained: bool = False,
    vocab=VOCAB,
) -> GenerationRecord:
    m = rng.randint(2, m_max)
    # mass_shift keeps the total probability over samples below one, which
    # entropy-style properties assume.
    import math

    shift = -math.log(m + 1) if mass_constrained else 0.0
    samples = tuple(random_seq(rng, 1, l_max, shift, vocab) for _ in range(m))
    greedy = random_seq(rng, 1, l_max, shift, vocab)
    return GenerationRecord(
        record_id=f"t{index:05d}",
        input_text="what stands in the tidal flats " + rng.choice(vocab),
        samples=samples,
        greedy=greedy,
        quality={"greedy": rng.random()},
    )


# --- Deterministic stand-ins for neural scorers ------------------------------


def hash_unit(*parts: str) -> float:
    digest = hashlib.sha256("\x1f".join(parts).encode()).digest()
    return int.from_bytes(digest[:7], "big") / 2**56


def hash_nli(a: str, b: str) -> tuple[float, float]:
    p_e = hash_unit("entail", a, b)
    p_c = hash_unit("contra", a, b) * (1.0 - p_e)
    return p_e, p_c


class StubSource(SimilaritySource):
    """Lexical scoring plus in-process NLI, no endpoint required."""

    def __init__(self, backend="jaccard", nli_fn=hash_nli):
        super().__init__(backend)
        self._nli_fn = nli_fn

    def nli_probs(self, pairs):
        return [(1.0, 0.0) if a == b else self._nli_fn(a, b) for a, b in pairs]


# --- Wire-protocol stub ------------------------------------------------------


def default_behavior(payload: dict, index: int):
    backend = payload["backend"]
    scores = [hash_unit(backend, a, b) for a, b in payload["pairs"]]
    return 200, {"scores": scores}


class WireServer:
    """Tiny similarity provider speaking the real wire protocol.

    `behavior(payload, request_index)` returns (status, body); body may be a
    dict (sent as JSON) or raw bytes. Swap it out per test to simulate
    failures.
    """

    def __init__(self, behavior=default_behavior):
        self.behavior = behavior
        self.requests: list[dict] = []
        self._lock = threading.Lock()
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                if self.path != "/similarity":
                    self.send_error(404)
                    return
                raw = self.rfile.read(int(self.headers.get("Content-Length", 0)))
                payload = json.loads(raw)
                with outer._lock:
                    index = len(outer.requests)
                    outer.requests.append(payload)
                status, body = outer.behavior(payload, index)
                data = body if isinstance(body, bytes) else json.dumps(body).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def endpoint(self) -> str:
        return f"http://127.0.0.1:{self._server.server_address[1]}"

    def __enter__(self):
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self._server.shutdown()
        self._server.server_close()
