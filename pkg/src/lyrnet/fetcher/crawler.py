"""Batch lyrics crawling: resolve, fetch, extract, cache."""

from __future__ import annotations

import hashlib
import json
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence
from urllib.parse import urljoin

from bs4 import BeautifulSoup

from ..errors import ContractError, DataError
from .resolver import SearchClient, resolve, slugify
from .transport import PoliteClient, RetryPolicy, Transport, TransportError

STATUSES = ("resolved", "fetched", "parse_failed", "not_found", "transport_error")
CACHE_ENV = "LYRNET_CACHE_DIR"


@dataclass(frozen=True)
class SongQuery:
    artist: str = ""
    title: str = ""
    fallback_url: str | None = None
    id: str | None = None
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not ((self.artist and self.title) or self.fallback_url):
            raise ContractError("a song query needs artist and title, or a fallback URL")

    def cache_key(self) -> str:
        norm = "\x1f".join(" ".join(s.lower().split()) for s in (self.artist, self.title, self.fallback_url or ""))
        return hashlib.sha256(norm.encode("utf-8")).hexdigest()

    def to_dict(self) -> dict:
        return {"id": self.id, "artist": self.artist, "title": self.title, "fallback_url": self.fallback_url,
                "extra": self.extra}

    @classmethod
    def from_dict(cls, d: dict) -> "SongQuery":
        return cls(d.get("artist", ""), d.get("title", ""), d.get("fallback_url"), d.get("id"), d.get("extra") or {})


@dataclass
class CrawlRecord:
    query: SongQuery
    status: str
    resolved_url: str | None = None
    lyrics: str | None = None
    attempts: int = 0
    resolution_score: float = 0.0
    direct_status: str | None = None
    error: str | None = None

    def to_json(self) -> str:
        return json.dumps({
            "query": self.query.to_dict(),
            "resolved_url": self.resolved_url,
            "status": self.status,
            "lyrics": self.lyrics,
            "attempts": self.attempts,
            "resolution_score": self.resolution_score,
            "direct_status": self.direct_status,
            "error": self.error,
        }, ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "CrawlRecord":
        d = json.loads(text)
        return cls(SongQuery.from_dict(d["query"]), d["status"], d["resolved_url"], d["lyrics"], d["attempts"],
                   d["resolution_score"], d.get("direct_status"), d.get("error"))


@dataclass(frozen=True)
class SiteProfile:
    base_url: str
    search_path: str = "/search?q={query}"
    result_selector: str = "a.result"
    lyrics_selector: str = "div.lyrics"
    page_path: str = "/{slug}"

    def direct_url(self, query: SongQuery) -> str:
        return urljoin(self.base_url, self.page_path.format(slug=slugify(f"{query.artist} {query.title} lyrics")))


@dataclass(frozen=True)
class CrawlConfig:
    site: SiteProfile
    max_in_flight: int = 4
    min_interval: float = 0.5
    retry: RetryPolicy = RetryPolicy()
    cache_dir: str | None = None
    measure_baseline: bool = True


class FetchError(Exception):
    def __init__(self, status: str, message: str, attempts: int):
        super().__init__(message)
        self.status = status
        self.attempts = attempts


def extract_lyrics(html: str, selector: str) -> str | None:
    """Normalised text of every element matching ``selector``; None when nothing matches."""
    soup = BeautifulSoup(html, "html.parser")
    nodes = soup.select(selector)
    if not nodes:
        return None
    for node in nodes:
        for br in node.find_all("br"):
            br.replace_with("\n")
    text = "\n".join(node.get_text() for node in nodes)
    lines = (" ".join(line.split()) for line in text.splitlines())
    return "\n".join(line for line in lines if line)


def fetch_lyrics(url: str, client: PoliteClient, selector: str) -> tuple[str, int]:
    """Download ``url`` and extract its lyrics. Returns ``(lyrics, attempts)``.

    Raises :class:`FetchError` with status ``not_found``, ``parse_failed`` or
    ``transport_error``.
    """
    try:
        resp, attempts = client.get(url)
    except TransportError as exc:
        raise FetchError("transport_error", str(exc), exc.attempts) from exc
    if resp.status != 200:
        raise FetchError("not_found", f"GET {url} returned HTTP {resp.status}", attempts)
    lyrics = extract_lyrics(resp.text, selector)
    if not lyrics:
        raise FetchError("parse_failed", f"no lyrics under {selector!r} at {url}", attempts)
    return lyrics, attempts


class CrawlCache:
    """On-disk store of serialised crawl records keyed by normalised query."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, query: SongQuery) -> Path:
        return self.directory / f"{query.cache_key()}.json"

    def get(self, query: SongQuery) -> CrawlRecord | None:
        path = self._path(query)
        if not path.exists():
            return None
        return CrawlRecord.from_json(path.read_text(encoding="utf-8"))

    def put(self, record: CrawlRecord) -> None:
        with self._lock:
            self._path(record.query).write_text(record.to_json(), encoding="utf-8")


@dataclass
class CoverageSummary:
    total: int
    fetched: int
    baseline_fetched: int | None
    by_status: dict[str, int]

    @property
    def coverage(self) -> float:
        return self.fetched / self.total if self.total else 0.0

    @property
    def baseline_coverage(self) -> float | None:
        if self.baseline_fetched is None:
            return None
        return self.baseline_fetched / self.total if self.total else 0.0

    def to_dict(self) -> dict:
        return {"total": self.total, "fetched": self.fetched, "coverage": self.coverage,
                "baseline_fetched": self.baseline_fetched, "baseline_coverage": self.baseline_coverage,
                "by_status": self.by_status}


def _direct_status(query: SongQuery, client: PoliteClient, site: SiteProfile) -> str:
    """Outcome of the search-free strategy: the exact-name page URL, then the query's own URL."""
    urls = []
    if query.artist and query.title:
        urls.append(site.direct_url(query))
    if query.fallback_url:
        urls.append(query.fallback_url)
    status = "not_found"
    for url in urls:
        try:
            fetch_lyrics(url, client, site.lyrics_selector)
            return "fetched"
        except FetchError as exc:
            status = exc.status
    return status


def crawl_one(query: SongQuery, client: PoliteClient, search: SearchClient, config: CrawlConfig) -> CrawlRecord:
    direct = _direct_status(query, client, config.site) if config.measure_baseline else None
    try:
        url, score = resolve(query, search)
    except TransportError as exc:
        return CrawlRecord(query, "transport_error", attempts=exc.attempts, direct_status=direct, error=str(exc))
    if url is None:
        return CrawlRecord(query, "not_found", resolution_score=score, direct_status=direct)
    try:
        lyrics, attempts = fetch_lyrics(url, client, config.site.lyrics_selector)
    except FetchError as exc:
        return CrawlRecord(query, exc.status, url, None, exc.attempts, score, direct, str(exc))
    return CrawlRecord(query, "fetched", url, lyrics, attempts, score, direct)


def default_cache_dir(config: CrawlConfig) -> str | None:
    return os.environ.get(CACHE_ENV) or config.cache_dir


def crawl_batch(queries: Sequence[SongQuery], config: CrawlConfig, transport: Transport,
                cache: CrawlCache | None = None, client: PoliteClient | None = None):
    """Crawl every query; returns ``(records, summary)`` with records in input order.

    Up to ``config.max_in_flight`` queries run concurrently, all sharing one
    per-host throttle. Cached queries are replayed without network access.
    """
    queries = list(queries)
    if not queries:
        raise DataError("crawl_batch needs at least one query")
    client = client or PoliteClient(transport, config.min_interval, config.retry)
    search = SearchClient(client, config.site.base_url, config.site.search_path, config.site.result_selector)

    def work(query: SongQuery) -> CrawlRecord:
        if cache is not None:
            hit = cache.get(query)
            if hit is not None:
                return hit
        record = crawl_one(query, client, search, config)
        if cache is not None:
            cache.put(record)
        return record

    with ThreadPoolExecutor(max_workers=max(1, config.max_in_flight)) as pool:
        records = list(pool.map(work, queries))

    by_status = {s: sum(r.status == s for r in records) for s in STATUSES}
    baseline = None
    if config.measure_baseline:
        baseline = sum(r.direct_status == "fetched" for r in records)
    return records, CoverageSummary(len(records), by_status["fetched"], baseline, by_status)


def load_crawl_config(path: str | Path | None = None, overrides: dict | None = None) -> tuple[CrawlConfig, dict]:
    """Read a JSON crawl config; returns the config and the raw transport section."""
    raw = json.loads(Path(path).read_text(encoding="utf-8")) if path else {}
    raw.update(overrides or {})
    if "site" not in raw or "base_url" not in raw["site"]:
        raise DataError("crawl config needs site.base_url")
    politeness = raw.get("politeness", {})
    retry = raw.get("retry", {})
    config = CrawlConfig(
        site=SiteProfile(**raw["site"]),
        max_in_flight=int(politeness.get("max_in_flight", 4)),
        min_interval=float(politeness.get("min_interval_s", 0.5)),
        retry=RetryPolicy(int(retry.get("max_attempts", 3)), float(retry.get("base_delay_s", 0.5)),
                          float(retry.get("factor", 2.0))),
        cache_dir=raw.get("cache_dir"),
        measure_baseline=bool(raw.get("measure_baseline", True)),
    )
    return config, raw.get("transport", {"kind": "http"})


def write_records(records: Sequence[CrawlRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")


def read_queries(path: str | Path) -> list[SongQuery]:
    """Queries from JSONL: artist, title, url/fallback_url, id; all other fields ride along in ``extra``."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                known = {"artist", "title", "url", "fallback_url", "id"}
                out.append(SongQuery(
                    rec.get("artist", ""), rec.get("title", ""), rec.get("fallback_url") or rec.get("url"),
                    rec.get("id"), {k: v for k, v in rec.items() if k not in known},
                ))
            except (json.JSONDecodeError, ContractError, AttributeError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    return out
