"""Parsing of line-delimited tweet archives into normalized records.

Each input line is one JSON object with the keys

    tweet_id, author_id, created_at,
    tweet_type_markers {is_retweet, is_quote, is_reply},
    parent_tweet_id, parent_author_id, text, urls, hashtags,
    author_created_at, author_followers, author_friends

``tweet_id``, ``author_id`` and ``created_at`` are required; everything else
defaults to empty/absent.  Timestamps may be epoch seconds (int/float) or
ISO-8601 strings and are normalized to integer UTC epoch seconds.

Mapping from a raw v1.1 platform payload (pre-processing note only):
``id_str -> tweet_id``, ``user.id_str -> author_id``,
``retweeted_status`` present -> ``is_retweet`` (parent = its ``id_str``),
``is_quote_status``/``quoted_status_id_str`` -> ``is_quote``,
``in_reply_to_status_id_str`` -> ``is_reply``,
``entities.urls[].expanded_url -> urls``, ``entities.hashtags[].text -> hashtags``,
``user.created_at/followers_count/friends_count -> author_*``.
"""

from __future__ import annotations

import enum
import io
import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Iterable, Iterator

logger = logging.getLogger(__name__)

REQUIRED_KEYS = ("tweet_id", "author_id", "created_at")


class TweetType(str, enum.Enum):
    ORIGINAL = "Original"
    REPLY = "Reply"
    RETWEET = "Retweet"
    QUOTE = "Quote"


@dataclass(frozen=True)
class TweetRecord:
    tweet_id: str
    author_id: str
    created_at: int
    tweet_type: TweetType
    parent_tweet_id: str | None = None
    parent_author_id: str | None = None
    text: str = ""
    urls: tuple[str, ...] = ()
    hashtags: tuple[str, ...] = ()
    author_created_at: int | None = None
    author_followers: int = 0
    author_friends: int = 0

    @property
    def is_engagement(self) -> bool:
        return self.tweet_type is not TweetType.ORIGINAL

    def to_json(self) -> dict:
        d = asdict(self)
        d["tweet_type"] = self.tweet_type.value
        d["urls"] = list(self.urls)
        d["hashtags"] = list(self.hashtags)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "TweetRecord":
        """Inverse of :meth:`to_json` (normalized form, no validation)."""
        return cls(
            tweet_id=d["tweet_id"],
            author_id=d["author_id"],
            created_at=int(d["created_at"]),
            tweet_type=TweetType(d["tweet_type"]),
            parent_tweet_id=d.get("parent_tweet_id"),
            parent_author_id=d.get("parent_author_id"),
            text=d.get("text", ""),
            urls=tuple(d.get("urls", ())),
            hashtags=tuple(d.get("hashtags", ())),
            author_created_at=d.get("author_created_at"),
            author_followers=int(d.get("author_followers", 0)),
            author_friends=int(d.get("author_friends", 0)),
        )


@dataclass
class StreamStats:
    n_records: int = 0
    n_accounts: int = 0
    type_counts: dict[str, int] = field(default_factory=lambda: {t.value: 0 for t in TweetType})
    time_span: tuple[int, int] | None = None
    n_lines: int = 0
    n_skipped: int = 0
    skip_reasons: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        d = asdict(self)
        d["time_span"] = list(self.time_span) if self.time_span else None
        d["skip_reasons"] = dict(sorted(self.skip_reasons.items()))
        return d


class MalformedRecord(ValueError):
    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


def classify_tweet_type(markers: dict | None) -> TweetType:
    """Resolve reply/retweet/quote markers to one type.

    Precedence when markers co-occur: Retweet > Quote > Reply > Original.
    """
    markers = markers or {}
    if markers.get("is_retweet"):
        return TweetType.RETWEET
    if markers.get("is_quote"):
        return TweetType.QUOTE
    if markers.get("is_reply"):
        return TweetType.REPLY
    return TweetType.ORIGINAL


def to_epoch_seconds(value) -> int:
    if isinstance(value, bool):
        raise MalformedRecord("bad_timestamp", repr(value))
    if isinstance(value, (int, float)):
        return int(value)
    if isinstance(value, str):
        s = value.strip()
        try:
            return int(float(s))
        except ValueError:
            pass
        try:
            dt = datetime.fromisoformat(s.replace("Z", "+00:00"))
        except ValueError as exc:
            raise MalformedRecord("bad_timestamp", s) from exc
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return int(dt.timestamp())
    raise MalformedRecord("bad_timestamp", repr(value))


def _str_or_none(value) -> str | None:
    if value is None or value == "":
        return None
    return str(value)


def _normalize_hashtag(tag: str) -> str:
    return str(tag).strip().lstrip("#").lower()


def parse_record(obj: dict) -> TweetRecord:
    """Validate and normalize one decoded JSON object."""
    if not isinstance(obj, dict):
        raise MalformedRecord("not_an_object")
    for key in REQUIRED_KEYS:
        if obj.get(key) in (None, ""):
            raise MalformedRecord("missing_field", key)
    created_at = to_epoch_seconds(obj["created_at"])
    if created_at <= 0:
        raise MalformedRecord("bad_timestamp", str(created_at))
    tweet_type = classify_tweet_type(obj.get("tweet_type_markers"))
    parent = _str_or_none(obj.get("parent_tweet_id"))
    if tweet_type is TweetType.ORIGINAL and parent is not None:
        raise MalformedRecord("parent_without_marker")
    if tweet_type is not TweetType.ORIGINAL and parent is None:
        raise MalformedRecord("marker_without_parent")
    author_created = obj.get("author_created_at")
    hashtags = tuple(h for h in (_normalize_hashtag(t) for t in obj.get("hashtags") or ()) if h)
    return TweetRecord(
        tweet_id=str(obj["tweet_id"]),
        author_id=str(obj["author_id"]),
        created_at=created_at,
        tweet_type=tweet_type,
        parent_tweet_id=parent,
        parent_author_id=_str_or_none(obj.get("parent_author_id")) if parent else None,
        text=str(obj.get("text") or ""),
        urls=tuple(str(u) for u in obj.get("urls") or ()),
        hashtags=hashtags,
        author_created_at=None if author_created in (None, "") else to_epoch_seconds(author_created),
        author_followers=int(obj.get("author_followers") or 0),
        author_friends=int(obj.get("author_friends") or 0),
    )


def iter_records(lines: Iterable[str], stats: StreamStats) -> Iterator[TweetRecord]:
    """Yield valid records, tallying skipped lines into ``stats``."""
    seen: set[str] = set()
    skips: Counter[str] = Counter()
    for line in lines:
        if not line.strip():
            continue
        stats.n_lines += 1
        try:
            rec = parse_record(json.loads(line))
        except json.JSONDecodeError:
            skips["invalid_json"] += 1
            continue
        except (MalformedRecord, TypeError, ValueError) as exc:
            skips[getattr(exc, "reason", "invalid_value")] += 1
            continue
        if rec.tweet_id in seen:
            skips["duplicate_tweet_id"] += 1
            continue
        seen.add(rec.tweet_id)
        yield rec
    stats.skip_reasons = dict(skips)
    stats.n_skipped = sum(skips.values())


def compute_stats(records: list[TweetRecord], stats: StreamStats | None = None) -> StreamStats:
    stats = stats or StreamStats()
    stats.n_records = len(records)
    stats.n_accounts = len({r.author_id for r in records})
    counts = Counter(r.tweet_type.value for r in records)
    stats.type_counts = {t.value: counts.get(t.value, 0) for t in TweetType}
    if records:
        times = [r.created_at for r in records]
        stats.time_span = (min(times), max(times))
    return stats


def parse_tweet_stream(source: str | Path | IO[str]) -> tuple[list[TweetRecord], StreamStats]:
    """Parse a JSON-lines stream; malformed lines are skipped and counted.

    ``source`` is a path or an open text stream.  An unreadable path raises
    ``OSError``.
    """
    stats = StreamStats()
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            records = list(iter_records(fh, stats))
    else:
        records = list(iter_records(source, stats))
    compute_stats(records, stats)
    if stats.n_skipped:
        logger.info("skipped %d malformed lines: %s", stats.n_skipped, stats.skip_reasons)
    return records, stats


def parse_lines(text: str) -> tuple[list[TweetRecord], StreamStats]:
    return parse_tweet_stream(io.StringIO(text))


def write_records(records: Iterable[TweetRecord], path: str | Path) -> None:
    """Write records in the normalized artifact form (one JSON object per line)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json(), sort_keys=True, ensure_ascii=False))
            fh.write("\n")


def read_records(path: str | Path) -> list[TweetRecord]:
    with open(path, encoding="utf-8") as fh:
        return [TweetRecord.from_json(json.loads(line)) for line in fh if line.strip()]


def to_input_json(record: TweetRecord) -> dict:
    """Render a record back into the documented *input* schema."""
    t = record.tweet_type
    return {
        "tweet_id": record.tweet_id,
        "author_id": record.author_id,
        "created_at": record.created_at,
        "tweet_type_markers": {
            "is_retweet": t is TweetType.RETWEET,
            "is_quote": t is TweetType.QUOTE,
            "is_reply": t is TweetType.REPLY,
        },
        "parent_tweet_id": record.parent_tweet_id,
        "parent_author_id": record.parent_author_id,
        "text": record.text,
        "urls": list(record.urls),
        "hashtags": list(record.hashtags),
        "author_created_at": record.author_created_at,
        "author_followers": record.author_followers,
        "author_friends": record.author_friends,
    }
