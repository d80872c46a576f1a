"""Domain normalization and registered-domain suffix matching."""

from __future__ import annotations

from typing import Mapping, TypeVar
from urllib.parse import urlsplit

V = TypeVar("V")


def normalize_domain(entry: str) -> str:
    """``"https://www.Example.COM/path?q"`` -> ``"example.com"``."""
    s = entry.strip().lower()
    if "://" in s:
        s = s.split("://", 1)[1]
    elif s.startswith("//"):
        s = s[2:]
    for sep in "/?#":
        s = s.split(sep, 1)[0]
    s = s.rsplit("@", 1)[-1].split(":", 1)[0].strip(".")
    if s.startswith("www."):
        s = s[4:]
    return s


def url_host(url: str) -> str:
    url = url.strip()
    if "://" not in url:
        url = "//" + url
    try:
        host = urlsplit(url).hostname or ""
    except ValueError:
        return ""
    host = host.lower().strip(".")
    return host[4:] if host.startswith("www.") else host


def match_domain(url: str, table: Mapping[str, V]) -> V | None:
    """Return the value of the most specific table domain that ``url``'s host falls under.

    ``sub.example.com`` matches ``example.com``; ``badexample.com`` does not.
    """
    host = url_host(url)
    if not host:
        return None
    labels = host.split(".")
    for i in range(len(labels)):
        hit = table.get(".".join(labels[i:]))
        if hit is not None:
            return hit
    return None
