import json
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lyrnet.errors import ContractError, DataError
from lyrnet.fetcher import (
    CrawlCache, CrawlConfig, HostThrottle, HttpTransport, PoliteClient, Response, RetryPolicy, SearchClient,
    SiteProfile, SongQuery, TransportError, crawl_batch, extract_lyrics, osa_distance, resolve,
    resolution_score,
)
from lyrnet.fetcher.crawler import CrawlRecord, load_crawl_config, read_queries
from lyrnet.fetcher.fixture import FixtureServer, FixtureSite, FixtureSong, FixtureTransport, build_fixture
from lyrnet.fetcher.resolver import normalize_tokens, slugify

BASE = "http://lyrics.fixture"


def interval_violations(log, interval):
    times = sorted(t for t, _ in log)
    return sum(1 for a, b in zip(times, times[1:]) if b - a < interval)


class FakeClock:
    def __init__(self):
        self.now = 0.0
        self.sleeps = []

    def __call__(self):
        return self.now

    def sleep(self, dt):
        self.sleeps.append(dt)
        self.now += dt


# resolver

@pytest.mark.parametrize("a,b,d", [
    ("", "", 0), ("abc", "abc", 0), ("abc", "acb", 1), ("kitten", "sitting", 3), ("ca", "abc", 3), ("", "xyz", 3),
])
def test_osa_distance_examples(a, b, d):
    assert osa_distance(a, b) == d


@settings(max_examples=100, deadline=None)
@given(st.text(alphabet="abcd", max_size=8), st.text(alphabet="abcd", max_size=8))
def test_osa_distance_is_symmetric_and_bounded(a, b):
    d = osa_distance(a, b)
    assert d == osa_distance(b, a)
    assert abs(len(a) - len(b)) <= d <= max(len(a), len(b))
    assert (d == 0) == (a == b)


def test_normalisation_and_slug():
    assert normalize_tokens("The Beatles feat. Café's Band") == ["beatles", "cafes", "band"]
    assert slugify("Neon Foxes Falling Train lyrics") == "neon-foxes-falling-train-lyrics"


def test_exact_slug_scores_one_and_misspelling_stays_high():
    url = f"{BASE}/neon-foxes-falling-train-lyrics"
    assert resolution_score("Neon Foxes", "Falling Train", url) == 1.0
    assert resolution_score("Neon Fxoes", "Falling Train", url) > 0.8
    assert resolution_score("Quiet Rivers", "Second Season", url) == 0.0


def _site_client(site, interval=0.0):
    return PoliteClient(FixtureTransport(site), min_interval=interval, retry=RetryPolicy(3, 0.0))


def test_resolve_through_search_tolerates_misspelling():
    site = FixtureSite([FixtureSong("Neon Foxes", "Falling Train", "la la"),
                        FixtureSong("Neon Tides", "Falling Rain", "oh oh")])
    search = SearchClient(_site_client(site), BASE)
    url, score = resolve(SongQuery("Noen Foxes", "Falling Train"), search)
    assert url == f"{BASE}/neon-foxes-falling-train-lyrics" and score > 0.8


def test_resolve_falls_back_to_query_url():
    site = FixtureSite([FixtureSong("Neon Foxes", "Falling Train", "la")])
    search = SearchClient(_site_client(site), BASE)
    assert resolve(SongQuery("Nobody", "Nothing", f"{BASE}/x"), search) == (f"{BASE}/x", 0.0)
    assert resolve(SongQuery("Nobody", "Nothing"), search)[0] is None


def test_query_needs_names_or_url():
    with pytest.raises(ContractError):
        SongQuery("only artist")
    assert SongQuery(fallback_url="http://x/y").fallback_url == "http://x/y"


def test_cache_key_normalises_case_and_spacing():
    assert SongQuery("A  B", "Song").cache_key() == SongQuery("a b", " song ").cache_key()


# extraction

def test_extract_lyrics_keeps_line_breaks():
    html = '<div class="lyrics">one  two<br/>three<br>\n<br/>four</div><div class="x">no</div>'
    assert extract_lyrics(html, "div.lyrics") == "one two\nthree\nfour"
    assert extract_lyrics("<p>none</p>", "div.lyrics") is None


# transport

def test_throttle_spaces_requests_with_injected_clock():
    clock = FakeClock()
    throttle = HostThrottle(0.5, clock=clock, sleep=clock.sleep)
    starts = []
    for host in ["a", "a", "b", "a"]:
        with throttle.slot(host):
            starts.append((host, clock.now))
            clock.now += 0.1  # request duration
    a_times = [t for h, t in starts if h == "a"]
    assert a_times == pytest.approx([0.0, 0.6, 1.2])
    assert starts[2] == ("b", pytest.approx(0.7))
    assert clock.sleeps == pytest.approx([0.5, 0.4])


def test_throttle_holds_slot_across_threads():
    throttle = HostThrottle(0.02)
    stamps, lock = [], threading.Lock()

    def worker():
        for _ in range(3):
            with throttle.slot("h"):
                with lock:
                    stamps.append(throttle.clock())

    threads = [threading.Thread(target=worker) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    stamps.sort()
    assert all(b - a >= 0.02 for a, b in zip(stamps, stamps[1:]))


class ScriptedTransport:
    def __init__(self, statuses):
        self.statuses = list(statuses)
        self.calls = 0

    def get(self, url):
        self.calls += 1
        status = self.statuses.pop(0)
        if status is None:
            raise TransportError("connection refused")
        return Response(url, status, "<div class='lyrics'>ok</div>")


def test_retry_backoff_is_exponential():
    clock = FakeClock()
    transport = ScriptedTransport([503, None, 200])
    client = PoliteClient(transport, min_interval=0.0, retry=RetryPolicy(3, 0.5, 2.0), sleep=clock.sleep)
    resp, attempts = client.get("http://h/x")
    assert resp.status == 200 and attempts == 3
    assert clock.sleeps == [0.5, 1.0]


def test_retry_gives_up_and_does_not_retry_404():
    clock = FakeClock()
    client = PoliteClient(ScriptedTransport([503, 503, 503]), 0.0, RetryPolicy(3, 0.1), sleep=clock.sleep)
    with pytest.raises(TransportError) as info:
        client.get("http://h/x")
    assert info.value.attempts == 3
    transport = ScriptedTransport([404])
    resp, attempts = PoliteClient(transport, 0.0, sleep=clock.sleep).get("http://h/x")
    assert resp.status == 404 and attempts == 1 and transport.calls == 1


def test_http_transport_reports_connection_failure():
    with pytest.raises(TransportError):
        HttpTransport(timeout=1.0).get("http://127.0.0.1:9/unreachable")


# crawling

def _config(interval=0.0, **kw):
    return CrawlConfig(SiteProfile(BASE), min_interval=interval, retry=RetryPolicy(3, 0.0), **kw)


def test_fixture_coverage_gap():
    site, queries = build_fixture()
    records, summary = crawl_batch(queries, _config(0.002), FixtureTransport(site))
    assert summary.coverage == 1.0
    assert summary.baseline_coverage == 0.8
    assert [r.query.id for r in records] == [q.id for q in queries]
    assert interval_violations(site.log, 0.002) == 0


def test_statuses_for_unreachable_and_pageless_songs():
    site = FixtureSite([FixtureSong("Neon Foxes", "Falling Train", None)], failures={"/search": 10})
    queries = [SongQuery("Neon Foxes", "Falling Train"), SongQuery("Wild Orchard", "Second Window")]
    records, summary = crawl_batch(queries, _config(max_in_flight=1),
                                   FixtureTransport(site))
    assert [r.status for r in records] == ["transport_error", "transport_error"]
    site.failures.clear()
    records, summary = crawl_batch(queries, _config(), FixtureTransport(site))
    assert [r.status for r in records] == ["parse_failed", "not_found"]
    assert summary.by_status["parse_failed"] == 1


def test_transient_failures_are_retried():
    site = FixtureSite([FixtureSong("Neon Foxes", "Falling Train", "la la")],
                       failures={"/neon-foxes-falling-train-lyrics": 3})
    records, _ = crawl_batch([SongQuery("Neon Foxes", "Falling Train")], _config(), FixtureTransport(site))
    # the baseline probe uses up all three attempts, the resolver's fetch then succeeds
    assert records[0].direct_status == "transport_error"
    assert records[0].status == "fetched" and records[0].lyrics == "la la"


def test_cache_replays_without_network(tmp_path):
    site, queries = build_fixture(n_songs=8, n_misspelled=2, n_broken=1)
    cache = CrawlCache(tmp_path / "cache")
    first, _ = crawl_batch(queries, _config(), FixtureTransport(site), cache)
    transport = FixtureTransport(site)
    second, _ = crawl_batch(queries, _config(), transport, cache)
    assert transport.requests == 0
    assert [r.to_json() for r in first] == [r.to_json() for r in second]


def test_record_json_round_trip():
    rec = CrawlRecord(SongQuery("A", "B", id="x", extra={"quadrant": "Q1"}), "fetched", "http://h/a", "la", 1, 0.9, "not_found")
    assert CrawlRecord.from_json(rec.to_json()).to_json() == rec.to_json()


def test_empty_batch_is_data_error():
    with pytest.raises(DataError):
        crawl_batch([], _config(), FixtureTransport(FixtureSite([])))


def test_crawl_over_real_http_with_default_interval():
    site = FixtureSite([FixtureSong("Neon Foxes", "Falling Train", "la la\nlo lo")])
    with FixtureServer(site) as server:
        config = CrawlConfig(SiteProfile(server.base_url))
        assert config.min_interval == 0.5
        records, summary = crawl_batch([SongQuery("Noen Foxes", "Falling Train")], config, HttpTransport())
    assert records[0].status == "fetched" and records[0].lyrics == "la la\nlo lo"
    assert summary.coverage == 1.0 and summary.baseline_coverage == 0.0
    assert len(site.log) == 3
    assert interval_violations(site.log, 0.5) == 0


def test_crawl_is_deterministic():
    outputs = []
    for _ in range(2):
        site, queries = build_fixture(n_songs=12, n_misspelled=4, n_broken=2)
        records, summary = crawl_batch(queries, _config(), FixtureTransport(site))
        outputs.append(([r.to_json() for r in records], summary.to_dict()))
    assert outputs[0] == outputs[1]


def test_fixture_site_serialises(tmp_path):
    site, _ = build_fixture(n_songs=5, n_misspelled=1, n_broken=1)
    path = tmp_path / "site.json"
    path.write_text(json.dumps(site.to_dict()))
    assert FixtureSite.load(path).to_dict() == site.to_dict()


def test_read_queries_and_config(tmp_path):
    qpath = tmp_path / "q.jsonl"
    qpath.write_text('{"id": "a", "artist": "X", "title": "Y", "quadrant": "Q2"}\n{"url": "http://h/p"}\n')
    queries = read_queries(qpath)
    assert queries[0].extra == {"quadrant": "Q2"} and queries[1].fallback_url == "http://h/p"
    qpath.write_text('{"artist": "X"}\n')
    with pytest.raises(DataError, match=":1"):
        read_queries(qpath)
    cpath = tmp_path / "c.json"
    cpath.write_text(json.dumps({"site": {"base_url": BASE}, "politeness": {"min_interval_s": 1.5},
                                 "transport": {"kind": "fixture"}}))
    config, transport = load_crawl_config(cpath)
    assert config.min_interval == 1.5 and config.max_in_flight == 4 and transport == {"kind": "fixture"}
    with pytest.raises(DataError):
        load_crawl_config(None, {})
