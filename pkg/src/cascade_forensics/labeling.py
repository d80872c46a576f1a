"""Source-list loading and URL-based cascade labels."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

from .cascades import Cascade, Label
from .domains import match_domain, normalize_domain

logger = logging.getLogger(__name__)


class SourceListConflict(ValueError):
    def __init__(self, domains: list[str]):
        super().__init__(f"{len(domains)} domain(s) listed as both reliable and unreliable: "
                         + ", ".join(domains))
        self.domains = domains


@dataclass(frozen=True)
class SourceList:
    domains: dict[str, Label]

    def __len__(self) -> int:
        return len(self.domains)

    def counts(self) -> dict[str, int]:
        c = Counter(v.value for v in self.domains.values())
        return {Label.RELIABLE.value: c[Label.RELIABLE.value], Label.UNRELIABLE.value: c[Label.UNRELIABLE.value]}


def read_domain_lines(lines: Iterable[str]) -> list[str]:
    out = []
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if line:
            dom = normalize_domain(line)
            if dom:
                out.append(dom)
    return out


def _read_domain_file(path: str | Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return read_domain_lines(fh)


def source_list_from_domains(reliable: Iterable[str], unreliable: Iterable[str]) -> SourceList:
    rel = {normalize_domain(d) for d in reliable}
    unrel = {normalize_domain(d) for d in unreliable}
    clash = sorted(rel & unrel)
    if clash:
        raise SourceListConflict(clash)
    table = {d: Label.RELIABLE for d in sorted(rel)}
    table.update({d: Label.UNRELIABLE for d in sorted(unrel)})
    return SourceList(dict(sorted(table.items())))


def load_source_lists(reliable_path: str | Path, unreliable_path: str | Path) -> SourceList:
    """Load one-domain-per-line files (``#`` starts a comment)."""
    sl = source_list_from_domains(_read_domain_file(reliable_path), _read_domain_file(unreliable_path))
    logger.info("source lists: %s", sl.counts())
    return sl


def label_from_urls(urls: Iterable[str], sources: SourceList) -> Label:
    """Any unreliable match wins; otherwise any reliable match; otherwise unlabeled."""
    hits = {match_domain(u, sources.domains) for u in urls}
    hits.discard(None)
    if Label.UNRELIABLE in hits:
        return Label.UNRELIABLE
    if Label.RELIABLE in hits:
        return Label.RELIABLE
    return Label.UNLABELED


def label_cascades(cascades: Sequence[Cascade], sources: SourceList) -> tuple[list[Cascade], dict[str, int]]:
    labeled = [replace(c, label=label_from_urls(c.root.urls, sources)) for c in cascades]
    counts = Counter(c.label.value for c in labeled)
    return labeled, {lab.value: counts.get(lab.value, 0) for lab in Label}
