"""Benchmark runner: per-model DR / DC / DBQ aggregation and reports.

DR is the 5th-to-95th inter-percentile span of dynamic scores (x100), DC maps
Spearman rank agreement between prompt degree and measured score onto 0..100,
and DBQ is the mean score-gated quality. Items that fail to load are excluded
from aggregates and counted, never zero-filled.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import frame_io
from .degree import DegreeAnnotator, LlmClientConfig
from .dynamics import dynamic_score_from_flows, pair_flows
from .flow import FlowParams
from .quality import quality_profile


@dataclass
class BenchItem:
    item_id: str
    prompt: str = ""
    image_path: str = ""
    video_dir: str = ""
    degree: int | None = None


@dataclass
class BenchManifest:
    model_name: str
    items: list[BenchItem]

    def __post_init__(self):
        ids = [it.item_id for it in self.items]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate item_ids in manifest: {dupes}")

    @classmethod
    def from_file(cls, path: str | Path) -> "BenchManifest":
        p = Path(path)
        if not p.is_file():
            raise FileNotFoundError(f"manifest not found: {p}")
        raw = json.loads(p.read_text())
        items = [BenchItem(
            item_id=str(it["item_id"]),
            prompt=it.get("prompt", ""),
            image_path=it.get("image_path", ""),
            video_dir=it.get("video_dir", ""),
            degree=int(it["degree"]) if it.get("degree") is not None else None,
        ) for it in raw["items"]]
        return cls(model_name=str(raw["model_name"]), items=items)


@dataclass
class ModelReport:
    model_name: str
    n_items: int
    dr: float
    dc: float
    dbq: float
    dbq_by_dim: dict[str, float]
    per_item: list[dict]
    n_failed: int = 0
    errors: list[dict] = field(default_factory=list)
    subject_only: bool = False

    def to_dict(self) -> dict:
        return {
            "model_name": self.model_name,
            "n_items": self.n_items,
            "dr": self.dr,
            "dc": self.dc,
            "dbq": self.dbq,
            "dbq_by_dim": self.dbq_by_dim,
            "per_item": self.per_item,
            "n_failed": self.n_failed,
            "errors": self.errors,
            "subject_only": self.subject_only,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelReport":
        return cls(**d)


def percentile_linear(sorted_scores: np.ndarray, q: float) -> float:
    """Linear-interpolated percentile at fractional index q*(n-1)."""
    n = sorted_scores.size
    pos = q * (n - 1)
    lo = int(np.floor(pos))
    hi = min(lo + 1, n - 1)
    frac = pos - lo
    return float(sorted_scores[lo] * (1 - frac) + sorted_scores[hi] * frac)


def dynamic_range(scores: list[float]) -> float:
    if not scores:
        raise ValueError("dynamic_range needs at least one score")
    s = np.sort(np.asarray(scores, dtype=np.float64))
    return 100.0 * (percentile_linear(s, 0.95) - percentile_linear(s, 0.05))


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def dynamics_controllability(pairs: list[tuple[float, float]]) -> float:
    """50*(1 + Spearman rho) with average ranks; zero variance pins rho to 0."""
    if len(pairs) < 2:
        raise ValueError("dynamics_controllability needs at least 2 pairs")
    g = np.asarray([p[0] for p in pairs], dtype=np.float64)
    s = np.asarray([p[1] for p in pairs], dtype=np.float64)
    rg = _average_ranks(g)
    rs = _average_ranks(s)
    dg = rg - rg.mean()
    ds = rs - rs.mean()
    denom = np.sqrt((dg ** 2).sum() * (ds ** 2).sum())
    rho = 0.0 if denom == 0.0 else float((dg * ds).sum() / denom)
    return 50.0 * (1.0 + rho)


@dataclass
class BenchConfig:
    flow: FlowParams = field(default_factory=FlowParams)
    max_dim: int = 512
    d_ref: float = 0.02
    a_ref: float = 0.01
    r_ref: float = 0.1
    gamma: float = 1.0
    subject_only: bool = False
    jobs: int = 0  # 0 = logical CPUs
    cache_path: str = "degree_cache.jsonl"
    llm: LlmClientConfig | None = None
    offline: bool = False


def score_item(item: BenchItem, cfg: BenchConfig) -> dict:
    """Load, flow, and score one video; raises frame_io errors on bad input."""
    seq = frame_io.load_sequence(item.video_dir)
    small = frame_io.downscale_for_flow(seq, cfg.max_dim)
    flows = pair_flows(small, cfg.flow)
    dyn = dynamic_score_from_flows(flows, small.diagonal, cfg.d_ref, cfg.subject_only)
    qual = quality_profile(small, flows, dyn, cfg.a_ref, cfg.r_ref, cfg.gamma)
    return {
        "item_id": item.item_id,
        "score": dyn.score,
        "raw_mean": dyn.raw_mean,
        "ms": qual.ms, "bc": qual.bc, "sc": qual.sc, "nat": qual.nat,
        "q": qual.q,
        "dbq_contrib": qual.dbq_contrib,
        "nat_source": qual.nat_source,
    }


def resolve_degree(item: BenchItem, annotator: DegreeAnnotator) -> int:
    """Manifest degree wins; otherwise cache / client / lexicon."""
    if item.degree is not None:
        if item.degree not in (1, 2, 3, 4, 5):
            raise ValueError(f"{item.item_id}: manifest degree {item.degree} "
                             "outside 1..5")
        return item.degree
    return annotator.annotate({
        "item_id": item.item_id,
        "prompt": item.prompt,
        "image_path": item.image_path or None,
    }).degree


def run_benchmark(manifest: BenchManifest, cfg: BenchConfig = BenchConfig()) -> ModelReport:
    annotator = DegreeAnnotator(cache_path=cfg.cache_path,
                                client=None if cfg.offline else cfg.llm)
    jobs = cfg.jobs if cfg.jobs > 0 else (os.cpu_count() or 1)

    def worker(item: BenchItem):
        try:
            rec = score_item(item, cfg)
            rec["degree"] = resolve_degree(item, annotator)
            return item.item_id, rec, None
        except Exception as exc:
            return item.item_id, None, f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(worker, manifest.items))
    results.sort(key=lambda r: r[0])

    per_item = [rec for _, rec, err in results if err is None]
    errors = [{"item_id": iid, "error": err} for iid, _, err in results if err]
    if not per_item:
        raise RuntimeError(f"all {len(manifest.items)} items failed to score; "
                           f"first error: {errors[0]['error'] if errors else 'n/a'}")

    scores = [r["score"] for r in per_item]
    pairs = [(float(r["degree"]), r["score"]) for r in per_item]
    dbq_by_dim = {
        dim: float(np.mean([r["score"] * 100.0 * r[dim] for r in per_item]))
        for dim in ("ms", "bc", "sc", "nat")
    }
    return ModelReport(
        model_name=manifest.model_name,
        n_items=len(per_item),
        dr=dynamic_range(scores),
        dc=dynamics_controllability(pairs) if len(pairs) >= 2 else 50.0,
        dbq=float(np.mean([r["dbq_contrib"] for r in per_item])),
        dbq_by_dim=dbq_by_dim,
        per_item=[{k: r[k] for k in ("item_id", "degree", "score", "q", "dbq_contrib")}
                  for r in per_item],
        n_failed=len(errors),
        errors=errors,
        subject_only=cfg.subject_only,
    )


def report_json(report: ModelReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def report_csv(report: ModelReport) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["item_id", "degree", "score", "q",
                                             "dbq_contrib"], lineterminator="\n")
    writer.writeheader()
    for row in report.per_item:
        writer.writerow(row)
    return buf.getvalue()


def leaderboard_md(reports: list[ModelReport]) -> str:
    rows = sorted(reports, key=lambda r: r.dbq, reverse=True)
    lines = [
        "| Model | Items | DR | DC | DBQ | MS | BC | SC | Nat |",
        "|---|---|---|---|---|---|---|---|---|",
    ]
    for r in rows:
        d = r.dbq_by_dim
        lines.append(
            f"| {r.model_name} | {r.n_items} | {r.dr:.2f} | {r.dc:.2f} "
            f"| {r.dbq:.2f} | {d['ms']:.2f} | {d['bc']:.2f} | {d['sc']:.2f} "
            f"| {d['nat']:.2f} |"
        )
    return "\n".join(lines) + "\n"


def emit_report(report: ModelReport, out_dir: str | Path,
                formats: tuple[str, ...] = ("json", "csv", "md")) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    safe = report.model_name.replace("/", "_").replace(" ", "_")
    if "json" in formats:
        p = out / f"report_{safe}.json"
        p.write_text(report_json(report))
        written.append(p)
    if "csv" in formats:
        p = out / f"report_{safe}.csv"
        p.write_text(report_csv(report))
        written.append(p)
    if "md" in formats:
        p = out / "leaderboard.md"
        p.write_text(leaderboard_md([report]))
        written.append(p)
    return written
