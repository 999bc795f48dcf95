"""HTTP transport abstraction, per-host throttling and retry with backoff."""

from __future__ import annotations

import threading
import time
import urllib.error
import urllib.request
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Protocol
from urllib.parse import urlsplit

from ..errors import LyrnetError

TRANSIENT_STATUSES = frozenset({429, 500, 502, 503, 504})


@dataclass(frozen=True)
class Response:
    url: str
    status: int
    text: str


class TransportError(LyrnetError):
    """The request could not be completed (connection failure, timeout, exhausted retries)."""

    def __init__(self, message: str, attempts: int = 1, cause: BaseException | None = None):
        super().__init__(message)
        self.attempts = attempts
        self.cause = cause


class Transport(Protocol):
    def get(self, url: str) -> Response:
        """Fetch ``url``. HTTP error statuses are returned, not raised."""


class HttpTransport:
    """Plain urllib transport."""

    def __init__(self, timeout: float = 10.0, user_agent: str = "lyrnet-crawler/0.1"):
        self.timeout = timeout
        self.user_agent = user_agent

    def get(self, url: str) -> Response:
        request = urllib.request.Request(url, headers={"User-Agent": self.user_agent})
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as resp:
                return Response(url, resp.status, resp.read().decode("utf-8", errors="replace"))
        except urllib.error.HTTPError as exc:
            body = exc.read().decode("utf-8", errors="replace") if exc.fp else ""
            return Response(url, exc.code, body)
        except (urllib.error.URLError, OSError) as exc:
            raise TransportError(f"GET {url} failed: {exc}", cause=exc) from exc


class HostThrottle:
    """Per-host request slots spaced at least ``interval`` seconds apart.

    A slot is held for the whole request and the next one opens ``interval``
    seconds after it is released, so the gap is measured from the end of the
    previous exchange. Whatever moment the server logs a request at, it is
    never closer than ``interval`` to the previous request to the same host.
    """

    def __init__(self, interval: float, clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        self.interval = interval
        self.clock = clock
        self.sleep = sleep
        self._next: dict[str, float] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def _lock(self, host: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(host, threading.Lock())

    @contextmanager
    def slot(self, host: str):
        lock = self._lock(host)
        with lock:
            delay = self._next.get(host, float("-inf")) - self.clock()
            if delay > 0:
                self.sleep(delay)
            try:
                yield
            finally:
                self._next[host] = self.clock() + self.interval


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    base_delay: float = 0.5
    factor: float = 2.0

    def delay(self, attempt: int) -> float:
        """Pause after failed attempt number ``attempt`` (1-based)."""
        return self.base_delay * self.factor ** (attempt - 1)


class PoliteClient:
    """Throttled, retrying wrapper around a :class:`Transport`.

    Connection failures and transient statuses (429, 5xx) are retried with
    exponential backoff; every attempt waits for its per-host slot, and
    backoff pauses happen outside the slot.
    """

    def __init__(self, transport: Transport, min_interval: float = 0.5, retry: RetryPolicy = RetryPolicy(),
                 sleep: Callable[[float], None] = time.sleep):
        self.transport = transport
        self.retry = retry
        self.sleep = sleep
        self.throttle = HostThrottle(min_interval, sleep=sleep)
        self._count_lock = threading.Lock()
        self.requests = 0

    def get(self, url: str) -> tuple[Response, int]:
        """Response of the last attempt and the number of attempts made."""
        host = urlsplit(url).netloc
        last_error: TransportError | None = None
        for attempt in range(1, self.retry.max_attempts + 1):
            try:
                with self.throttle.slot(host):
                    with self._count_lock:
                        self.requests += 1
                    resp = self.transport.get(url)
            except TransportError as exc:
                last_error = exc
            else:
                if resp.status not in TRANSIENT_STATUSES:
                    return resp, attempt
                last_error = TransportError(f"GET {url} returned HTTP {resp.status}")
            if attempt < self.retry.max_attempts:
                self.sleep(self.retry.delay(attempt))
        raise TransportError(
            f"GET {url} failed after {self.retry.max_attempts} attempts: {last_error}",
            attempts=self.retry.max_attempts, cause=last_error,
        )
