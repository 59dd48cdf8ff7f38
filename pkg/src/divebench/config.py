"""Runtime configuration: one JSON file, strict keys, flags override."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .bench import BenchConfig
from .curation import CurationParams
from .degree import LlmClientConfig
from .flow import FlowParams


class ConfigError(Exception):
    pass


def _build(cls, raw: dict, where: str):
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    return raw


@dataclass
class Config:
    flow: FlowParams = field(default_factory=FlowParams)
    curation: CurationParams = field(default_factory=CurationParams)
    d_ref: float = 0.02
    a_ref: float = 0.01
    r_ref: float = 0.1
    gamma: float = 1.0
    max_dim: int = 512
    cache_path: str = "degree_cache.jsonl"
    llm: LlmClientConfig | None = None

    def __post_init__(self):
        for name in ("d_ref", "a_ref", "r_ref"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        if self.gamma <= 0:
            raise ConfigError("gamma must be > 0")
        if self.max_dim < 32:
            raise ConfigError("max_dim must be >= 32")
        if self.flow.block < 4 or self.flow.levels < 1:
            raise ConfigError("flow.block must be >= 4 and flow.levels >= 1")
        if self.flow.search_coarse < 1 or self.flow.search_refine < 0:
            raise ConfigError("flow search radii out of range")

    @classmethod
    def from_file(cls, path: str | Path) -> "Config":
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            raw = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: invalid JSON ({exc})") from exc
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "Config":
        raw = dict(_build(cls, raw, "config"))
        if "flow" in raw:
            raw["flow"] = FlowParams(**_build(FlowParams, raw["flow"], "config.flow"))
        if "curation" in raw:
            cur = dict(_build(CurationParams, raw["curation"], "config.curation"))
            if "flow" in cur:
                cur["flow"] = FlowParams(**_build(FlowParams, cur["flow"],
                                                  "config.curation.flow"))
            raw["curation"] = CurationParams(**cur)
        if raw.get("llm") is not None:
            raw["llm"] = LlmClientConfig(**_build(LlmClientConfig, raw["llm"],
                                                  "config.llm"))
        return cls(**raw)

    def bench_config(self, *, offline: bool = False, jobs: int = 0,
                     subject_only: bool = False) -> BenchConfig:
        return BenchConfig(
            flow=self.flow, max_dim=self.max_dim, d_ref=self.d_ref,
            a_ref=self.a_ref, r_ref=self.r_ref, gamma=self.gamma,
            subject_only=subject_only, jobs=jobs, cache_path=self.cache_path,
            llm=self.llm, offline=offline,
        )
