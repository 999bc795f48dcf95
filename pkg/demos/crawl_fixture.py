"""Lyrics crawling against a local fixture site served over HTTP.

A fifth of the queries carry a misspelled artist, and half of those also
carry a dead dataset URL. Guessing the page URL from the names finds only the
clean songs; searching the site and scoring results by fuzzy token overlap
recovers the rest. Requests to the host stay at least the politeness interval
apart.
"""

from dataclasses import replace

from lyrnet.fetcher import CrawlConfig, HttpTransport, RetryPolicy, SiteProfile, crawl_batch
from lyrnet.fetcher.fixture import FixtureServer, build_fixture

site, queries = build_fixture(n_songs=100, n_misspelled=20, n_broken=10)
interval = 0.01

with FixtureServer(site) as server:
    queries = [replace(q, fallback_url=q.fallback_url.replace("http://lyrics.fixture", server.base_url))
               if q.fallback_url else q for q in queries]
    config = CrawlConfig(SiteProfile(server.base_url), min_interval=interval, retry=RetryPolicy(3, 0.05))
    records, summary = crawl_batch(queries, config, HttpTransport())

print(f"resolver coverage {summary.coverage:.0%}, direct-URL baseline {summary.baseline_coverage:.0%}")
print("status counts:", {k: v for k, v in summary.by_status.items() if v})
example = records[0]
print(f"query {example.query.artist!r} / {example.query.title!r} -> {example.resolved_url} "
      f"(score {example.resolution_score:.2f})")

times = sorted(t for t, _ in site.log)
gaps = [b - a for a, b in zip(times, times[1:])]
print(f"{len(times)} requests, smallest gap {min(gaps) * 1000:.1f} ms (interval {interval * 1000:.0f} ms)")
