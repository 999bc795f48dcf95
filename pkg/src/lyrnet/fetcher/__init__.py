"""Search-based lyrics crawler with pluggable transport."""

from .crawler import (
    CoverageSummary, CrawlCache, CrawlConfig, CrawlRecord, FetchError, SiteProfile, SongQuery,
    crawl_batch, extract_lyrics, fetch_lyrics, load_crawl_config, read_queries, write_records,
)
from .resolver import SearchClient, osa_distance, resolution_score, resolve, slugify
from .transport import HostThrottle, HttpTransport, PoliteClient, Response, RetryPolicy, TransportError

__all__ = [
    "CoverageSummary", "CrawlCache", "CrawlConfig", "CrawlRecord", "FetchError", "SiteProfile", "SongQuery",
    "crawl_batch", "extract_lyrics", "fetch_lyrics", "load_crawl_config", "read_queries", "write_records",
    "SearchClient", "osa_distance", "resolution_score", "resolve", "slugify",
    "HostThrottle", "HttpTransport", "PoliteClient", "Response", "RetryPolicy", "TransportError",
]
