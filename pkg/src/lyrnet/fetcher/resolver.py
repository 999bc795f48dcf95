"""Resolve a song query to a lyrics-page URL through a search step.

Candidate URLs are scored by soft token overlap between the query's artist
and title and the candidate's path slug. Tokens match with credit
``1 - d / max(len)`` where ``d`` is the optimal-string-alignment edit distance
(so a transposed pair of letters costs one edit); credit below
``MIN_TOKEN_SIMILARITY`` counts as no match. The score averages the
query-side and slug-side mean credits, so an exact slug scores 1.0.
"""

from __future__ import annotations

import re
import unicodedata
from urllib.parse import quote_plus, urljoin, urlsplit

from bs4 import BeautifulSoup

MIN_TOKEN_SIMILARITY = 0.6
RESOLUTION_THRESHOLD = 0.5
STOPWORDS = frozenset({"lyrics", "the", "a", "an", "feat", "ft", "and"})

_TOKEN = re.compile(r"[a-z0-9]+")


def normalize_tokens(text: str) -> list[str]:
    """ASCII-folded, lowercased alphanumeric tokens without stopwords."""
    folded = unicodedata.normalize("NFKD", text).encode("ascii", "ignore").decode("ascii").lower()
    folded = folded.replace("'", "")
    return [t for t in _TOKEN.findall(folded) if t not in STOPWORDS]


def slugify(text: str) -> str:
    folded = unicodedata.normalize("NFKD", text).encode("ascii", "ignore").decode("ascii").lower()
    return "-".join(_TOKEN.findall(folded.replace("'", "")))


def slug_tokens(url: str) -> list[str]:
    path = urlsplit(url).path.rstrip("/")
    return normalize_tokens(path.rsplit("/", 1)[-1].replace("-", " "))


def osa_distance(a: str, b: str) -> int:
    """Optimal string alignment distance (Levenshtein plus adjacent transpositions)."""
    prev2: list[int] = []
    prev = list(range(len(b) + 1))
    for i in range(1, len(a) + 1):
        cur = [i] + [0] * len(b)
        for j in range(1, len(b) + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
            if i > 1 and j > 1 and a[i - 1] == b[j - 2] and a[i - 2] == b[j - 1]:
                cur[j] = min(cur[j], prev2[j - 2] + 1)
        prev2, prev = prev, cur
    return prev[len(b)]


def token_similarity(a: str, b: str) -> float:
    if a == b:
        return 1.0
    sim = 1.0 - osa_distance(a, b) / max(len(a), len(b))
    return sim if sim >= MIN_TOKEN_SIMILARITY else 0.0


def _mean_best(src: list[str], dst: list[str]) -> float:
    return sum(max((token_similarity(s, d) for d in dst), default=0.0) for s in src) / len(src)


def resolution_score(artist: str, title: str, url: str) -> float:
    query = normalize_tokens(f"{artist} {title}")
    slug = slug_tokens(url)
    if not query or not slug:
        return 0.0
    return 0.5 * (_mean_best(query, slug) + _mean_best(slug, query))


class SearchClient:
    """Runs ``artist title lyrics`` searches on a site and lists result links."""

    def __init__(self, client, base_url: str, search_path: str = "/search?q={query}", result_selector: str = "a.result"):
        self.client = client
        self.base_url = base_url
        self.search_path = search_path
        self.result_selector = result_selector

    def search(self, text: str) -> list[str]:
        url = urljoin(self.base_url, self.search_path.format(query=quote_plus(text)))
        resp, _ = self.client.get(url)
        if resp.status != 200:
            return []
        soup = BeautifulSoup(resp.text, "html.parser")
        return [urljoin(url, a["href"]) for a in soup.select(self.result_selector) if a.get("href")]


def resolve(query, search: SearchClient, threshold: float = RESOLUTION_THRESHOLD) -> tuple[str | None, float]:
    """Best-scoring search result for ``query`` if it clears ``threshold``.

    Otherwise falls back to the query's own URL (score 0.0), or ``(None, 0.0)``.
    Transport failures during the search propagate as ``TransportError``.
    """
    best_url, best = None, 0.0
    if query.artist or query.title:
        for url in search.search(f"{query.artist} {query.title} lyrics"):
            score = resolution_score(query.artist, query.title, url)
            if score > best:
                best_url, best = url, score
    if best_url is not None and best >= threshold:
        return best_url, best
    if query.fallback_url:
        return query.fallback_url, 0.0
    return None, best
