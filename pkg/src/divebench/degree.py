"""Dynamic-degree annotation: chat-completion client with cache, or lexicon.

Every prompt+image pair gets an integer degree in 1..5. The primary path is
an external chat-completion endpoint; replies are cached append-only so reruns
never re-query. Without a configured endpoint (or on any failure) a shipped
keyword lexicon grades the prompt offline, so batch runs never hard-fail on
the network.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import requests

DEFAULT_DEGREE = 2
_TOKEN_RE = re.compile(r"[a-z]+")
_INT_RE = re.compile(r"\d+")


@dataclass
class DegreeAnnotation:
    item_id: str
    degree: int
    source: str  # llm | lexicon | manifest
    raw_reply: str = ""

    def __post_init__(self):
        if self.degree not in (1, 2, 3, 4, 5):
            raise ValueError(f"degree {self.degree} outside 1..5")
        if self.source not in ("llm", "lexicon", "manifest"):
            raise ValueError(f"unknown degree source {self.source!r}")

    def to_dict(self) -> dict:
        return {"item_id": self.item_id, "degree": self.degree,
                "source": self.source, "raw_reply": self.raw_reply}


@dataclass
class LlmClientConfig:
    endpoint: str
    model: str
    api_key_env: str = "DIVE_LLM_API_KEY"
    timeout: float = 30.0
    max_retries: int = 2

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


def _load_asset(name: str) -> str:
    return resources.files("divebench.assets").joinpath(name).read_text()


def load_lexicon() -> dict[str, int]:
    """Stem -> grade map from the shipped editable table."""
    raw = json.loads(_load_asset("motion_lexicon.json"))
    table: dict[str, int] = {}
    for grade in ("1", "2", "3", "4", "5"):
        for stem in raw.get(grade, []):
            table[stem] = int(grade)
    return table


_LEXICON: dict[str, int] | None = None


def lexicon_degree(prompt: str) -> int:
    """Highest grade among matched stems (token-prefix match), default 2."""
    global _LEXICON
    if _LEXICON is None:
        _LEXICON = load_lexicon()
    best = 0
    for token in _TOKEN_RE.findall(prompt.lower()):
        for stem, grade in _LEXICON.items():
            if token.startswith(stem) and grade > best:
                best = grade
    return best if best else DEFAULT_DEGREE


def parse_degree_reply(text: str) -> int | None:
    """First integer token valued 1..5, else None. Total over arbitrary text."""
    for tok in _INT_RE.findall(text):
        value = int(tok)
        if 1 <= value <= 5:
            return value
    return None


def _extract_reply_text(body) -> str:
    if isinstance(body, dict):
        choices = body.get("choices")
        if isinstance(choices, list) and choices:
            msg = choices[0].get("message", {})
            if isinstance(msg, dict) and isinstance(msg.get("content"), str):
                return msg["content"]
            if isinstance(choices[0].get("text"), str):
                return choices[0]["text"]
        if isinstance(body.get("content"), str):
            return body["content"]
    return json.dumps(body)


def cache_key(prompt: str, image_path: str | Path | None) -> str:
    digest = hashlib.sha256()
    if image_path is not None and Path(image_path).is_file():
        digest.update(Path(image_path).read_bytes())
    return hashlib.sha256(
        prompt.encode("utf-8") + b"\x00" + digest.hexdigest().encode("ascii")
    ).hexdigest()


class DegreeAnnotator:
    """Cached degree annotation; safe to share across worker threads."""

    def __init__(self, cache_path: str | Path = "degree_cache.jsonl",
                 client: LlmClientConfig | None = None):
        self.cache_path = Path(cache_path)
        self.client = client
        self._lock = threading.Lock()
        self._cache: dict[str, DegreeAnnotation] = {}
        if self.cache_path.is_file():
            for line in self.cache_path.read_text().splitlines():
                if not line.strip():
                    continue
                rec = json.loads(line)
                self._cache[rec["key"]] = DegreeAnnotation(
                    item_id=rec["item_id"], degree=rec["degree"],
                    source=rec["source"], raw_reply=rec.get("raw_reply", ""),
                )

    def _append(self, key: str, ann: DegreeAnnotation) -> None:
        with self._lock:
            self._cache[key] = ann
            with open(self.cache_path, "a") as fh:
                fh.write(json.dumps({"key": key, **ann.to_dict()}) + "\n")

    def _query_llm(self, prompt: str, image_path) -> tuple[int, str] | None:
        assert self.client is not None
        template = _load_asset("degree_prompt.txt")
        content = template.format(prompt=prompt, image=str(image_path or ""))
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.client.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        body = {"model": self.client.model,
                "messages": [{"role": "user", "content": content}]}
        last_problem = "no attempt made"
        for _ in range(self.client.max_retries + 1):
            try:
                resp = requests.post(self.client.endpoint, json=body,
                                     headers=headers, timeout=self.client.timeout)
                resp.raise_for_status()
                text = _extract_reply_text(resp.json())
            except (requests.RequestException, ValueError) as exc:
                last_problem = str(exc)
                continue
            degree = parse_degree_reply(text)
            if degree is not None:
                return degree, text
            last_problem = f"no integer 1..5 in reply: {text[:80]!r}"
        warnings.warn(f"degree client gave no usable reply ({last_problem}); "
                      "falling back to lexicon")
        return None

    def annotate(self, item: dict) -> DegreeAnnotation:
        """Degree for {item_id, prompt, image_path}: cache, client, lexicon."""
        prompt = item.get("prompt", "")
        if not prompt:
            raise ValueError(f"item {item.get('item_id')!r} has an empty prompt")
        key = cache_key(prompt, item.get("image_path"))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        ann = None
        if self.client is not None:
            got = self._query_llm(prompt, item.get("image_path"))
            if got is not None:
                ann = DegreeAnnotation(item_id=item.get("item_id", ""),
                                       degree=got[0], source="llm",
                                       raw_reply=got[1])
        if ann is None:
            ann = DegreeAnnotation(item_id=item.get("item_id", ""),
                                   degree=lexicon_degree(prompt), source="lexicon")
        self._append(key, ann)
        return ann


def annotate_degree(item: dict, cfg: LlmClientConfig | None = None,
                    cache_path: str | Path = "degree_cache.jsonl") -> DegreeAnnotation:
    """One-shot convenience wrapper around DegreeAnnotator."""
    return DegreeAnnotator(cache_path=cache_path, client=cfg).annotate(item)
