"""Ranked human-study aggregation with abstention-adjusted scoring.

Volunteers rank all models for an item (best first) or abstain. A rank at
position p among n models is worth n+1-p points; an item's model score is the
sum of collected points divided by the *recruited* volunteer count, so
abstentions lower every model's score on that item while leaving the relative
differences between models untouched. Overall scores sum item scores and are
reported as percentages of the per-dimension total.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

DIMENSIONS_DEFAULT = ("dynamics", "naturalness", "text_compliance", "overall")


@dataclass
class RankingRecord:
    volunteer_id: str
    item_id: str
    dimension: str
    ranking: list[str] | None  # best -> worst, or None when abstaining
    timestamp: float = 0.0

    @property
    def abstained(self) -> bool:
        return self.ranking is None

    def to_dict(self) -> dict:
        return {
            "volunteer_id": self.volunteer_id,
            "item_id": self.item_id,
            "dimension": self.dimension,
            "ranking": self.ranking,
            "abstain": self.abstained,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RankingRecord":
        ranking = d.get("ranking")
        if d.get("abstain") and ranking is not None:
            raise ValueError("record both abstains and ranks")
        return cls(
            volunteer_id=str(d["volunteer_id"]),
            item_id=str(d["item_id"]),
            dimension=str(d["dimension"]),
            ranking=None if ranking is None else [str(m) for m in ranking],
            timestamp=float(d.get("timestamp", 0.0)),
        )


@dataclass
class StudyItem:
    item_id: str
    media: dict[str, str] = field(default_factory=dict)  # model id -> media path


@dataclass
class StudyConfig:
    study_id: str
    models: list[str]
    items: list[StudyItem]
    dimensions: list[str] = field(default_factory=lambda: list(DIMENSIONS_DEFAULT))
    n_volunteers_expected: int = 20
    media_root: str = "."

    def __post_init__(self):
        if len(self.models) < 2:
            raise ValueError("a study needs at least 2 models")
        if not self.dimensions:
            raise ValueError("a study needs at least one dimension")
        if self.n_volunteers_expected < 1:
            raise ValueError("n_volunteers_expected must be >= 1")
        ids = [it.item_id for it in self.items]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate item ids in study config")

    @classmethod
    def from_file(cls, path: str | Path) -> "StudyConfig":
        raw = json.loads(Path(path).read_text())
        items = [StudyItem(item_id=str(it["item_id"]),
                           media={str(k): str(v) for k, v in it.get("media", {}).items()})
                 for it in raw["items"]]
        return cls(
            study_id=str(raw["study_id"]),
            models=[str(m) for m in raw["models"]],
            items=items,
            dimensions=[str(d) for d in raw.get("dimensions", DIMENSIONS_DEFAULT)],
            n_volunteers_expected=int(raw.get("n_volunteers_expected", 20)),
            media_root=str(raw.get("media_root", ".")),
        )


def weight_of_rank(position: int, n_models: int) -> int:
    """Points for a 1-based rank position: first place gets n, last gets 1."""
    if not 1 <= position <= n_models:
        raise ValueError(f"rank position {position} outside 1..{n_models}")
    return n_models + 1 - position


def validate_record(rec: RankingRecord, cfg: StudyConfig) -> str | None:
    """Reason string when the record is inadmissible, else None."""
    if rec.dimension not in cfg.dimensions:
        return f"unknown dimension {rec.dimension!r}"
    if rec.item_id not in {it.item_id for it in cfg.items}:
        return f"unknown item {rec.item_id!r}"
    if not rec.volunteer_id:
        return "empty volunteer_id"
    if rec.ranking is not None:
        if sorted(rec.ranking) != sorted(cfg.models):
            return (f"ranking {rec.ranking} is not a permutation of the study "
                    f"models {sorted(cfg.models)}")
    return None


def aggregate(records: list[RankingRecord], cfg: StudyConfig) -> dict:
    """Per-dimension scores: items, totals, and normalized percentages.

    Item scores keep their integer point numerators alongside the float
    division so exact-sum checks stay exact.
    """
    n = len(cfg.models)
    v_total = cfg.n_volunteers_expected
    seen: set[tuple[str, str, str]] = set()
    points: dict[str, dict[str, dict[str, int]]] = {
        dim: {it.item_id: {m: 0 for m in cfg.models} for it in cfg.items}
        for dim in cfg.dimensions
    }
    responses: dict[str, dict[str, int]] = {
        dim: {it.item_id: 0 for it in cfg.items} for dim in cfg.dimensions
    }

    for rec in sorted(records, key=lambda r: (r.dimension, r.item_id, r.volunteer_id)):
        reason = validate_record(rec, cfg)
        if reason:
            raise ValueError(f"inadmissible record "
                             f"({rec.volunteer_id}/{rec.item_id}/{rec.dimension}): "
                             f"{reason}")
        key = (rec.volunteer_id, rec.item_id, rec.dimension)
        if key in seen:
            raise ValueError(f"duplicate record {key}")
        seen.add(key)
        if rec.abstained:
            continue
        responses[rec.dimension][rec.item_id] += 1
        for pos, model in enumerate(rec.ranking, start=1):
            points[rec.dimension][rec.item_id][model] += weight_of_rank(pos, n)

    out: dict = {"study_id": cfg.study_id, "n_volunteers_expected": v_total,
                 "models": list(cfg.models), "dimensions": {}}
    for dim in cfg.dimensions:
        items_out = {}
        overall = {m: 0.0 for m in cfg.models}
        overall_points = {m: 0 for m in cfg.models}
        for it in cfg.items:
            row = {}
            for m in cfg.models:
                pts = points[dim][it.item_id][m]
                row[m] = {"points": pts, "score": pts / v_total}
                overall_points[m] += pts
            items_out[it.item_id] = {
                "models": row,
                "n_responses": responses[dim][it.item_id],
            }
        for m in cfg.models:
            overall[m] = overall_points[m] / v_total
        out["dimensions"][dim] = {
            "items": items_out,
            "overall": overall,
            "normalized_pct": normalize_scores(overall),
        }
    return out


def normalize_scores(overall: dict[str, float]) -> dict[str, float]:
    """Each model's share of the dimension total, in percent."""
    total = sum(overall.values())
    if total == 0:
        return {m: 0.0 for m in overall}
    return {m: 100.0 * v / total for m, v in overall.items()}


# ---------------------------------------------------------------------------
# Append-only JSONL store


def append_store(path: str | Path, rec: RankingRecord) -> None:
    with open(path, "a") as fh:
        fh.write(json.dumps(rec.to_dict()) + "\n")


def load_store(path: str | Path,
               cfg: StudyConfig | None = None) -> tuple[list[RankingRecord], list[str]]:
    """All records plus a report of malformed lines (1-based line numbers)."""
    p = Path(path)
    records: list[RankingRecord] = []
    problems: list[str] = []
    if not p.is_file():
        return records, problems
    for lineno, line in enumerate(p.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = RankingRecord.from_dict(json.loads(line))
        except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
            problems.append(f"line {lineno}: {exc}")
            continue
        if cfg is not None:
            reason = validate_record(rec, cfg)
            if reason:
                problems.append(f"line {lineno}: {reason}")
                continue
        records.append(rec)
    return records, problems


def make_record(volunteer_id: str, item_id: str, dimension: str,
                ranking: list[str] | None) -> RankingRecord:
    return RankingRecord(volunteer_id=volunteer_id, item_id=item_id,
                         dimension=dimension, ranking=ranking,
                         timestamp=time.time())
