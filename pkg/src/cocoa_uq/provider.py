"""HTTP client for remote similarity providers.

Wire contract: POST {endpoint}/similarity with body
{"backend": str, "pairs": [[a, b], ...]} -> {"scores": [float, ...]},
scores in [0, 1], order-preserving. Requests are batched (default 32 pairs),
retried with exponential backoff (default 3 attempts), and issued with a
bounded number of in-flight batches (default 4). Scores are cached in memory
and, when a cache directory is configured, in a keyed file store under
sha256(backend, a, b)."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor

import requests

from .errors import ProviderError

__all__ = ["ProviderClient"]

log = logging.getLogger(__name__)


class ProviderClient:
    def __init__(
        self,
        endpoint: str,
        batch_size: int = 32,
        retries: int = 3,
        backoff: float = 0.25,
        concurrency: int = 4,
        cache_dir: str | os.PathLike | None = None,
        timeout: float = 30.0,
    ):
        if not endpoint:
            raise ProviderError("provider endpoint is empty")
        base = endpoint.rstrip("/")
        # Accept either the server base URL or the full route.
        self.url = base if base.endswith("/similarity") else base + "/similarity"
        self.batch_size = max(1, batch_size)
        self.retries = max(1, retries)
        self.backoff = backoff
        self.concurrency = max(1, concurrency)
        self.cache_dir = str(cache_dir) if cache_dir else None
        self.timeout = timeout
        self.calls = 0        # wire requests actually made
        self.cache_hits = 0   # pair positions served from cache
        self._mem: dict[str, float] = {}
        self._lock = threading.Lock()

    def scores(self, backend: str, pairs: list[tuple[str, str]]) -> list[float]:
        """Scores for ordered pairs, order-aligned with the input. Duplicate
        pairs within one call hit the wire once."""
        if not pairs:
            return []
        keys = [_key(backend, a, b) for a, b in pairs]
        out: dict[str, float] = {}
        misses: list[tuple[str, tuple[str, str]]] = []
        seen_miss: set[str] = set()
        for key, pair in zip(keys, pairs):
            cached = self._lookup(key)
            if cached is not None:
                out[key] = cached
            elif key not in seen_miss:
                seen_miss.add(key)
                misses.append((key, pair))
        if misses:
            batches = [
                misses[i : i + self.batch_size]
                for i in range(0, len(misses), self.batch_size)
            ]
            with ThreadPoolExecutor(max_workers=self.concurrency) as pool:
                for batch, scores in zip(
                    batches, pool.map(lambda b: self._post(backend, b), batches)
                ):
                    for (key, _), score in zip(batch, scores):
                        out[key] = score
                        self._store(key, score)
        return [out[key] for key in keys]

    # --- cache ---

    def _lookup(self, key: str) -> float | None:
        with self._lock:
            if key in self._mem:
                self.cache_hits += 1
                return self._mem[key]
        if self.cache_dir:
            try:
                with open(self._path(key), encoding="utf-8") as fh:
                    score = float(json.load(fh)["score"])
            except (OSError, ValueError, KeyError):
                return None
            with self._lock:
                self._mem[key] = score
                self.cache_hits += 1
            return score
        return None

    def _store(self, key: str, score: float) -> None:
        with self._lock:
            self._mem[key] = score
        if self.cache_dir:
            path = self._path(key)
            os.makedirs(os.path.dirname(path), exist_ok=True)
            tmp = f"{path}.tmp.{os.getpid()}.{threading.get_ident()}"
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump({"score": score}, fh)
            os.replace(tmp, path)  # last write wins; values are deterministic

    def _path(self, key: str) -> str:
        return os.path.join(self.cache_dir, key[:2], f"{key}.json")

    # --- wire ---

    def _post(self, backend: str, batch: list[tuple[str, tuple[str, str]]]) -> list[float]:
        body = {"backend": backend, "pairs": [[a, b] for _, (a, b) in batch]}
        last_error: Exception | None = None
        for attempt in range(1, self.retries + 1):
            try:
                response = requests.post(self.url, json=body, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
            else:
                if response.status_code >= 500:
                    last_error = ProviderError(
                        f"provider returned {response.status_code}: {response.text[:200]}"
                    )
                elif response.status_code != 200:
                    raise ProviderError(
                        f"provider rejected request ({response.status_code}): "
                        f"{response.text[:200]}"
                    )
                else:
                    with self._lock:
                        self.calls += 1
                    return self._validate(response, expected=len(batch))
            if attempt < self.retries:
                delay = self.backoff * (2 ** (attempt - 1))
                log.warning(
                    "provider request failed (attempt %d/%d): %s",
                    attempt, self.retries, last_error,
                )
                time.sleep(delay)
        raise ProviderError(
            f"provider unreachable after {self.retries} attempts: {last_error}"
        )

    def _validate(self, response: requests.Response, expected: int) -> list[float]:
        try:
            payload = response.json()
            scores = payload["scores"]
        except (ValueError, KeyError, TypeError):
            raise ProviderError(
                "protocol violation: response is not {'scores': [...]}"
            ) from None
        if not isinstance(scores, list) or len(scores) != expected:
            raise ProviderError(
                f"protocol violation: expected {expected} scores, "
                f"got {len(scores) if isinstance(scores, list) else type(scores).__name__}"
            )
        out = []
        for s in scores:
            if isinstance(s, bool) or not isinstance(s, (int, float)):
                raise ProviderError(f"protocol violation: score {s!r} is not a number")
            s = float(s)
            if not 0.0 <= s <= 1.0:
                raise ProviderError(f"protocol violation: score {s} outside [0,1]")
            out.append(s)
        return out


def _key(backend: str, a: str, b: str) -> str:
    payload = json.dumps([backend, a, b], ensure_ascii=False).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()
