"""Pipeline configuration: one JSON file, CLI flags override individual keys.

Keys (all optional unless a stage needs the input):

    records, reliable, unreliable, outlets, keywords, embeddings,
    profile_labels, manual_labels        input paths, relative to the config file
    out                                  artifact directory
    seed, intervention_date
    min_cascade_size, top_k_accounts, folds, keep_fraction
    min_appearances, min_seed_urls, min_seed_share, lp_max_iter, random_draws
    top_k_hashtags, rdd_degree, rdd_separate_slopes, rdd_p_max, rdd_x0_day, rdd_top_n
    k_min, k_max, topic_restarts, silhouette_sample, top_words, top_tweets,
    topic_discard, topic_merge
    detector                             object of DetectorConfig fields
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .detector.training import DetectorConfig

PATH_KEYS = ("records", "reliable", "unreliable", "outlets", "keywords", "embeddings", "profile_labels",
             "manual_labels")


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    records: str | None = None
    reliable: str | None = None
    unreliable: str | None = None
    outlets: str | None = None
    keywords: str | None = None
    embeddings: str | None = None
    profile_labels: str | None = None
    manual_labels: str | None = None
    out: str = "artifacts"
    seed: int = 0
    intervention_date: str = "2020-07-21"
    min_cascade_size: int = 5
    top_k_accounts: int | None = 7471
    folds: int = 5
    keep_fraction: float = 0.8
    min_appearances: int = 20
    min_seed_urls: int = 10
    min_seed_share: float = 0.7
    lp_max_iter: int = 100
    random_draws: int = 5
    top_k_hashtags: int = 10000
    rdd_degree: int = 1
    rdd_separate_slopes: bool = False
    rdd_p_max: float = 0.2
    rdd_x0_day: int | None = None
    rdd_top_n: int | None = None
    k_min: int = 3
    k_max: int = 35
    topic_restarts: int = 10
    silhouette_sample: int = 5000
    top_words: int = 15
    top_tweets: int = 100
    topic_discard: list[int] = field(default_factory=list)
    topic_merge: list[list[int]] = field(default_factory=list)
    detector: DetectorConfig = field(default_factory=DetectorConfig)

    def validate(self) -> None:
        def bad(msg):
            raise ConfigError(msg)
        try:
            dt.date.fromisoformat(self.intervention_date)
        except (TypeError, ValueError):
            bad(f"intervention_date must be YYYY-MM-DD, got {self.intervention_date!r}")
        if not 0.0 < self.keep_fraction <= 1.0:
            bad("keep_fraction must be in (0, 1]")
        if self.min_cascade_size < 1 or self.folds < 2 or self.min_appearances < 1:
            bad("min_cascade_size >= 1, folds >= 2 and min_appearances >= 1 are required")
        if self.top_k_accounts is not None and self.top_k_accounts < 1:
            bad("top_k_accounts must be positive or null")
        if not 2 <= self.k_min <= self.k_max:
            bad("need 2 <= k_min <= k_max")
        if self.rdd_degree not in (1, 2, 3, 4):
            bad("rdd_degree must be 1..4")
        if not 0.5 < self.min_seed_share <= 1.0:
            bad("min_seed_share must be in (0.5, 1]")
        if self.top_k_hashtags < 1 or self.random_draws < 1 or self.topic_restarts < 1:
            bad("top_k_hashtags, random_draws and topic_restarts must be positive")
        try:
            self.detector.validate()
        except ValueError as exc:
            bad(str(exc))

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self, keys: tuple[str, ...] | None = None) -> str:
        """SHA-256 of the canonical JSON of the whole config, or of ``keys`` only."""
        d = self.to_dict()
        if keys is not None:
            d = {k: d[k] for k in keys}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def require(self, key: str) -> Path:
        value = getattr(self, key)
        if value is None:
            raise ConfigError(f"config key {key!r} is required for this stage")
        path = Path(value)
        if not path.exists():
            raise ConfigError(f"{key}: {path} does not exist")
        return path


def from_dict(d: dict, base_dir: Path | None = None) -> PipelineConfig:
    known = {f.name for f in fields(PipelineConfig)}
    unknown = sorted(set(d) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    d = dict(d)
    det = d.pop("detector", None) or {}
    det_known = {f.name for f in fields(DetectorConfig)}
    bad = sorted(set(det) - det_known)
    if bad:
        raise ConfigError(f"unknown detector keys: {', '.join(bad)}")
    cfg = PipelineConfig(**d, detector=DetectorConfig(**det))
    if base_dir is not None:
        for k in PATH_KEYS + ("out",):
            v = getattr(cfg, k)
            if v is not None and not Path(v).is_absolute():
                setattr(cfg, k, str(base_dir / v))
    return cfg


def load_config(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return from_dict(d, path.resolve().parent)
