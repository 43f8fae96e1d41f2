"""HTTP similarity provider.

Implements the scoring engine's wire contract: POST /similarity with
{"backend": str, "pairs": [[a, b], ...]} returns {"scores": [...]}, one
float in [0, 1] per pair, in request order. Malformed bodies get 400,
model failures 500 with a message.

Served backends: "cross_encoder" from a single-logit regression head,
"nli_entail" and "nli_contra" from a 3-way NLI head. The nli_contra score
is similarity-shaped: the wire carries 1 - p(contradiction), and consumers
recover the probability as 1 - score.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import torch
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from starlette.concurrency import run_in_threadpool

from .errors import ConfigError, ModelError


@dataclass
class ServerConfig:
    cross_encoder: str | None = None
    nli: str | None = None


class SimilarityService:
    """Scores text pairs with locally loaded classifier checkpoints.

    One model instance per family; a lock serializes inference so concurrent
    requests queue rather than interleave. Pairs are scored one at a time:
    batching would let one request's padding shift another pair's float32
    rounding, and repeated requests must score identically.
    """

    def __init__(self, config: ServerConfig):
        if not config.cross_encoder and not config.nli:
            raise ConfigError("serve needs a cross-encoder model, an NLI model, or both")
        self._lock = threading.Lock()
        self._cross_tok = self._cross = None
        self._nli_tok = self._nli = None
        backends: list[str] = []
        if config.cross_encoder:
            self._cross_tok, self._cross = _load_classifier(config.cross_encoder)
            if self._cross.config.num_labels != 1:
                raise ConfigError(
                    f"cross-encoder {config.cross_encoder!r} has "
                    f"{self._cross.config.num_labels} labels; expected a "
                    "single-logit similarity head"
                )
            backends.append("cross_encoder")
        if config.nli:
            self._nli_tok, self._nli = _load_classifier(config.nli)
            self._entail_idx, self._contra_idx = _nli_label_indices(self._nli.config)
            backends.extend(["nli_entail", "nli_contra"])
        self.backends = tuple(backends)

    def score(self, backend: str, pairs: list[tuple[str, str]]) -> list[float]:
        with self._lock:
            return [self._score_one(backend, a, b) for a, b in pairs]

    def _score_one(self, backend: str, a: str, b: str) -> float:
        if backend == "cross_encoder":
            if a == b:
                # Identical strings are maximally similar by definition.
                return 1.0
            value = float(self._forward(self._cross_tok, self._cross, a, b)[0])
            return min(1.0, max(0.0, value))
        p_entail, p_contra = (1.0, 0.0) if a == b else self._nli_probs(a, b)
        if backend == "nli_entail":
            return p_entail
        return 1.0 - p_contra

    def _nli_probs(self, a: str, b: str) -> tuple[float, float]:
        probs = torch.softmax(self._forward(self._nli_tok, self._nli, a, b), dim=-1)
        return float(probs[self._entail_idx]), float(probs[self._contra_idx])

    def _forward(self, tokenizer, model, a: str, b: str) -> torch.Tensor:
        enc = tokenizer(a, b, return_tensors="pt", truncation=True)
        with torch.no_grad():
            return model(**enc).logits[0]


def _load_classifier(name: str):
    from transformers import AutoModelForSequenceClassification, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(name)
        model = AutoModelForSequenceClassification.from_pretrained(name)
    except Exception as exc:
        raise ModelError(f"cannot load model {name!r}: {exc}") from exc
    model.eval()
    return tokenizer, model


def _nli_label_indices(config) -> tuple[int, int]:
    entail = contra = None
    for idx, label in config.id2label.items():
        folded = str(label).casefold()
        if "entail" in folded:
            entail = int(idx)
        elif "contra" in folded:
            contra = int(idx)
    if entail is None or contra is None:
        raise ConfigError(
            f"NLI model labels {dict(config.id2label)!r} lack entailment "
            "and contradiction entries"
        )
    return entail, contra


def create_app(service: SimilarityService) -> FastAPI:
    app = FastAPI(title="similarity provider")

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok", "backends": list(service.backends)}

    @app.post("/similarity")
    async def similarity(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _bad_request("body must be a JSON object")
        problem = _validate_body(body, service.backends)
        if problem is not None:
            return _bad_request(problem)
        pairs = [(a, b) for a, b in body["pairs"]]
        try:
            scores = await run_in_threadpool(service.score, body["backend"], pairs)
        except Exception as exc:
            return JSONResponse({"error": f"model failure: {exc}"}, status_code=500)
        return {"scores": scores}

    return app


def _bad_request(message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=400)


def _validate_body(body: object, backends: tuple[str, ...]) -> str | None:
    if not isinstance(body, dict):
        return "body must be a JSON object"
    backend = body.get("backend")
    if not isinstance(backend, str):
        return "backend must be a string"
    if backend not in backends:
        return f"backend {backend!r} not served (available: {', '.join(backends)})"
    pairs = body.get("pairs")
    if not isinstance(pairs, list):
        return "pairs must be a list"
    for i, pair in enumerate(pairs):
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or not all(isinstance(text, str) for text in pair)
        ):
            return f"pairs[{i}] must be a [text, text] pair"
    return None


def serve(config: ServerConfig, host: str, port: int) -> None:
    import uvicorn

    app = create_app(SimilarityService(config))
    uvicorn.run(app, host=host, port=port, log_level="warning")
