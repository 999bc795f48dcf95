"""A local mock lyrics site for deterministic crawl tests.

The site answers three kinds of path:

* ``/search?q=...``  an HTML list of up to five ``<a class="result">`` links,
  ranked by character-trigram overlap with the query (a stand-in for a
  misspelling-tolerant search engine);
* ``/<artist-title-lyrics slug>``  a lyrics page with a ``div.lyrics`` container;
* ``/legacy/<id>``  pages reachable only through dataset-provided URLs.

It can be served in-process (:class:`FixtureTransport`) or over real HTTP on
localhost (:class:`FixtureServer`). Both log request arrival times.
"""

from __future__ import annotations

import html
import json
import threading
import time
from dataclasses import asdict, dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlsplit

import numpy as np

from ..rng import make_rng
from .crawler import SongQuery
from .resolver import slugify
from .transport import Response


@dataclass
class FixtureSong:
    artist: str
    title: str
    lyrics: str | None
    legacy_id: str | None = None

    @property
    def path(self) -> str:
        return "/" + slugify(f"{self.artist} {self.title} lyrics")


def _trigrams(text: str) -> set[str]:
    s = f"  {' '.join(text.lower().split())} "
    return {s[i:i + 3] for i in range(len(s) - 2)}


def lyrics_page(lyrics: str | None, title: str) -> str:
    body = ""
    if lyrics is not None:
        lines = "<br/>\n".join(html.escape(line) for line in lyrics.split("\n"))
        body = f'<div class="lyrics" data-lyrics-container="true">{lines}</div>'
    return (f"<html><head><title>{html.escape(title)}</title></head><body>"
            f'<div class="header">{html.escape(title)}</div>{body}'
            f'<div class="footer">fixture site</div></body></html>')


@dataclass
class FixtureSite:
    songs: list[FixtureSong]
    failures: dict[str, int] = field(default_factory=dict)
    max_results: int = 5

    def __post_init__(self):
        self._lock = threading.Lock()
        self._pages = {s.path: s for s in self.songs}
        self._legacy = {f"/legacy/{s.legacy_id}": s for s in self.songs if s.legacy_id}
        self.log: list[tuple[float, str]] = []

    def record(self, path: str) -> None:
        with self._lock:
            self.log.append((time.monotonic(), path))

    def handle(self, target: str) -> tuple[int, str]:
        parts = urlsplit(target)
        path = parts.path
        with self._lock:
            remaining = self.failures.get(path, 0)
            if remaining > 0:
                self.failures[path] = remaining - 1
                return 503, "<html><body>temporarily unavailable</body></html>"
        if path == "/search":
            q = parse_qs(parts.query).get("q", [""])[0]
            return 200, self._search_page(q)
        song = self._pages.get(path) or self._legacy.get(path)
        if song is None:
            return 404, "<html><body>not found</body></html>"
        return 200, lyrics_page(song.lyrics, f"{song.artist} - {song.title}")

    def _search_page(self, query: str) -> str:
        q = _trigrams(query.replace("lyrics", ""))
        scored = []
        for song in self.songs:
            t = _trigrams(f"{song.artist} {song.title}")
            sim = len(q & t) / len(q | t) if q | t else 0.0
            if sim > 0:
                scored.append((-sim, song.path, song))
        scored.sort(key=lambda x: (x[0], x[1]))
        items = "".join(
            f'<li><a class="result" href="{s.path}">{html.escape(s.title)} by {html.escape(s.artist)}</a></li>'
            for _, _, s in scored[: self.max_results]
        )
        return f'<html><body><ul class="results">{items}</ul></body></html>'

    def to_dict(self) -> dict:
        return {"songs": [asdict(s) for s in self.songs], "failures": dict(self.failures), "max_results": self.max_results}

    @classmethod
    def from_dict(cls, d: dict) -> "FixtureSite":
        return cls([FixtureSong(**s) for s in d["songs"]], dict(d.get("failures", {})), d.get("max_results", 5))

    @classmethod
    def load(cls, path: str | Path) -> "FixtureSite":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


class FixtureTransport:
    """In-process transport that dispatches straight to a :class:`FixtureSite`."""

    def __init__(self, site: FixtureSite):
        self.site = site
        self.requests = 0

    def get(self, url: str) -> Response:
        parts = urlsplit(url)
        target = parts.path + (f"?{parts.query}" if parts.query else "")
        self.site.record(parts.path)
        self.requests += 1
        status, body = self.site.handle(target)
        return Response(url, status, body)


class FixtureServer:
    """Serve a :class:`FixtureSite` over HTTP on an ephemeral localhost port."""

    def __init__(self, site: FixtureSite):
        self.site = site
        site_ref = site

        class Handler(BaseHTTPRequestHandler):
            def do_GET(self):  # noqa: N802
                site_ref.record(urlsplit(self.path).path)
                status, body = site_ref.handle(self.path)
                data = body.encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "text/html; charset=utf-8")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def __enter__(self) -> "FixtureServer":
        self._thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join()


_ARTIST_A = ["Velvet", "Neon", "Silver", "Crimson", "Hollow", "Golden", "Paper", "Electric", "Wild", "Quiet"]
_ARTIST_B = ["Harbor", "Lanterns", "Foxes", "Orchard", "Pilots", "Tides", "Sparrows", "Engines", "Mirrors", "Rivers"]
_TITLE_A = ["Midnight", "Summer", "Broken", "Distant", "Burning", "Falling", "Endless", "Little", "Northern", "Second"]
_TITLE_B = ["Train", "Letters", "Heartbeat", "Skyline", "Promise", "Garden", "Thunder", "Highway", "Window", "Season"]
_FILLER = ["we", "run", "through", "the", "night", "and", "sing", "under", "open", "sky",
           "hold", "on", "to", "morning", "light", "call", "my", "name", "again", "slow"]


def misspell(word: str, rng: np.random.Generator) -> str:
    """Swap one adjacent pair of differing interior letters."""
    spots = [i for i in range(1, len(word) - 2) if word[i] != word[i + 1]]
    i = int(rng.choice(spots))
    return word[:i] + word[i + 1] + word[i] + word[i + 2:]


def build_fixture(n_songs: int = 100, n_misspelled: int = 20, n_broken: int = 10, seed: int = 0,
                  base_url: str = "http://lyrics.fixture"):
    """A fixture site plus queries mirroring noisy dataset metadata.

    The first ``n_misspelled`` queries carry a misspelled artist name, so the
    exact-name page URL misses. Of those, the first ``n_broken`` also carry a
    dataset URL that no longer resolves (a dead ``/legacy/`` link). Each query's
    ``extra`` holds an assigned quadrant so crawl output can become a corpus.
    """
    if not n_broken <= n_misspelled <= n_songs <= len(_ARTIST_A) * len(_TITLE_A):
        raise ValueError("need n_broken <= n_misspelled <= n_songs <= 100")
    rng = make_rng(seed)
    artists = [f"{a} {b}" for a in _ARTIST_A for b in _ARTIST_B]
    titles = [f"{a} {b}" for a in _TITLE_A for b in _TITLE_B]
    artist_order = rng.permutation(len(artists))
    title_order = rng.permutation(len(titles))

    songs, queries = [], []
    for k in range(n_songs):
        artist = artists[artist_order[k]]
        title = titles[title_order[k]]
        n_lines = int(rng.integers(4, 9))
        lyrics = "\n".join(" ".join(rng.choice(_FILLER, int(rng.integers(4, 8)))) for _ in range(n_lines))
        songs.append(FixtureSong(artist, title, lyrics, legacy_id=None))

        query_artist = artist
        if k < n_misspelled:
            words = artist.split()
            longest = max(range(len(words)), key=lambda i: len(words[i]))
            words[longest] = misspell(words[longest], rng)
            query_artist = " ".join(words)
        fallback = f"{base_url}/legacy/dead-{k:03d}" if k < n_broken else None
        queries.append(SongQuery(query_artist, title, fallback, id=f"song-{k:03d}",
                                 extra={"quadrant": f"Q{k % 4 + 1}"}))
    return FixtureSite(songs), queries
