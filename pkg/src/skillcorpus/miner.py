"""Open-source SKILL mining through the GitHub search API.

All traffic goes through a client object.  ``LiveClient`` talks to the
network; ``FixtureClient`` replays recorded exchanges and never touches
it, which is what the tests and offline runs use.
"""

from __future__ import annotations

import json
import logging
import os
import random
import re
import threading
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol, Sequence

from .model import Origin, SourceFile, content_hash, write_corpus
from .syntax import IDENTIFIER, lex

log = logging.getLogger(__name__)

API = "https://api.github.com"
DEFAULT_QUERY = "cadence skill"
SKILL_EXTENSIONS = (".il", ".ils")
TOKEN_ENV = "GITHUB_TOKEN"

URL_KEYWORDS = ("dotnet", "-ms", "microsoft", ".net", "solaris", "unity", "logs", "www")
FILE_PATTERNS = (".assembly", ".NET", ".class", ".method", ".string", ".float", ".inline")
_FILE_PATTERN_RES = {p: re.compile(r"\s" + re.escape(p)) for p in FILE_PATTERNS}


class MinerError(RuntimeError):
    pass


class AuthError(MinerError):
    pass


class RateLimitExceeded(MinerError):
    pass


class FixtureMiss(MinerError):
    pass


# -- transport --------------------------------------------------------------


@dataclass(frozen=True)
class Response:
    status: int
    body: str
    headers: Mapping[str, str] = field(default_factory=dict)

    def json(self):
        return json.loads(self.body)


def request_key(url: str, params: Mapping[str, object] | None) -> str:
    return url + "?" + json.dumps(dict(params or {}), sort_keys=True, separators=(",", ":"))


class Client(Protocol):
    def get(self, url: str, params: Mapping[str, object] | None = None) -> Response: ...


class LiveClient:
    """``requests``-backed client; the token comes from ``GITHUB_TOKEN``."""

    def __init__(self, token: str | None = None, timeout: float = 30.0):
        import requests

        self.session = requests.Session()
        self.session.headers["Accept"] = "application/vnd.github+json"
        token = token if token is not None else os.environ.get(TOKEN_ENV)
        if token:
            self.session.headers["Authorization"] = f"Bearer {token}"
        self.timeout = timeout

    def get(self, url, params=None):
        r = self.session.get(url, params=dict(params or {}), timeout=self.timeout)
        return Response(r.status_code, r.text, dict(r.headers))


class FixtureClient:
    """Replays exchanges recorded as JSON: ``[{"request": ..., "response": ...}]``.

    A request recorded several times is answered in recording order, the
    last answer repeating.  Unrecorded requests raise ``FixtureMiss``.
    """

    def __init__(self, exchanges: Iterable[Mapping]):
        self._answers: dict[str, list[Response]] = {}
        self._served: Counter[str] = Counter()
        self._lock = threading.Lock()
        for ex in exchanges:
            req, resp = ex["request"], ex["response"]
            body = resp["text"] if "text" in resp else json.dumps(resp.get("json"), sort_keys=True)
            self._answers.setdefault(request_key(req["url"], req.get("params")), []).append(
                Response(int(resp.get("status", 200)), body, dict(resp.get("headers", {})))
            )
        self.calls: list[str] = []

    @classmethod
    def load(cls, path: str | Path) -> FixtureClient:
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def get(self, url, params=None):
        key = request_key(url, params)
        with self._lock:
            answers = self._answers.get(key)
            if not answers:
                raise FixtureMiss(f"no recorded exchange for {key}")
            i = min(self._served[key], len(answers) - 1)
            self._served[key] += 1
            self.calls.append(key)
        return answers[i]


class RecordingClient:
    """Wraps another client and keeps every exchange for later replay."""

    def __init__(self, inner: Client):
        self.inner = inner
        self.exchanges: list[dict] = []
        self._lock = threading.Lock()

    def get(self, url, params=None):
        resp = self.inner.get(url, params)
        with self._lock:
            self.exchanges.append(
                {
                    "request": {"url": url, "params": dict(params or {})},
                    "response": {"status": resp.status, "text": resp.body, "headers": dict(resp.headers)},
                }
            )
        return resp

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.exchanges, indent=1, sort_keys=True) + "\n", encoding="utf-8")


# -- rate limiting and checkpoints -----------------------------------------


class Checkpoint:
    """Successful responses keyed by request, persisted so a run can resume."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self.done: dict[str, str] = {}
        if self.path and self.path.exists():
            self.done = json.loads(self.path.read_text(encoding="utf-8"))
        self._lock = threading.Lock()

    def get(self, key: str) -> str | None:
        return self.done.get(key)

    def put(self, key: str, body: str) -> None:
        with self._lock:
            self.done[key] = body

    def save(self) -> None:
        if self.path:
            with self._lock:
                self.path.write_text(json.dumps(self.done, sort_keys=True) + "\n", encoding="utf-8")


def _rate_limited(resp: Response) -> bool:
    if resp.status == 429:
        return True
    return resp.status == 403 and (
        str(resp.headers.get("X-RateLimit-Remaining", "")) == "0" or "rate limit" in resp.body.lower()
    )


@dataclass
class Fetcher:
    """Client calls with shared exponential backoff and a response checkpoint."""

    client: Client
    checkpoint: Checkpoint = field(default_factory=Checkpoint)
    sleep: Callable[[float], None] = time.sleep
    max_retries: int = 5
    base_delay: float = 2.0
    max_delay: float = 60.0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def get(self, url: str, params: Mapping[str, object] | None = None) -> Response:
        key = request_key(url, params)
        cached = self.checkpoint.get(key)
        if cached is not None:
            return Response(200, cached)
        for attempt in range(self.max_retries + 1):
            resp = self.client.get(url, params)
            if resp.status == 401:
                raise AuthError(f"authentication failed for {url}; set {TOKEN_ENV} to a valid token")
            if not _rate_limited(resp):
                break
            if attempt == self.max_retries:
                self.checkpoint.save()
                raise RateLimitExceeded(
                    f"rate limited on {url} after {self.max_retries} retries; "
                    f"progress saved, re-run to resume"
                )
            delay = min(self.max_delay, self.base_delay * 2 ** attempt)
            # one thread backs off at a time; the rest queue behind it
            with self._lock:
                self.sleep(delay)
        if not 200 <= resp.status < 300:
            raise MinerError(f"GET {url} returned HTTP {resp.status}")
        self.checkpoint.put(key, resp.body)
        return resp


def _fetcher(client) -> Fetcher:
    return client if isinstance(client, Fetcher) else Fetcher(client)


# -- search -----------------------------------------------------------------


@dataclass(frozen=True)
class RepoRecord:
    full_name: str
    url: str
    license: str | None = None


@dataclass(frozen=True)
class RemoteFileRef:
    url: str
    repo: str
    path: str

    def __post_init__(self) -> None:
        if self.extension not in SKILL_EXTENSIONS:
            raise ValueError(f"{self.path}: not a SKILL file extension")

    @property
    def extension(self) -> str:
        return os.path.splitext(self.path)[1].lower()

    @property
    def raw_url(self) -> str:
        m = re.match(r"https://github\.com/([^/]+/[^/]+)/blob/(.+)$", self.url)
        if m:
            return f"https://raw.githubusercontent.com/{m.group(1)}/{m.group(2)}"
        return self.url

    @classmethod
    def from_item(cls, item: Mapping) -> RemoteFileRef | None:
        """Ref for a code-search item, or None when it is not a SKILL file."""
        path = item.get("path", "")
        if os.path.splitext(path)[1].lower() not in SKILL_EXTENSIONS:
            return None
        return cls(item["html_url"], item["repository"]["full_name"], path)


def _paged(fetch: Fetcher, url: str, params: dict, per_page: int, max_pages: int) -> list[dict]:
    items: list[dict] = []
    for page in range(1, max_pages + 1):
        body = fetch.get(url, {**params, "per_page": per_page, "page": page}).json()
        batch = body.get("items", [])
        items.extend(batch)
        if len(batch) < per_page:
            break
    return items


def repo_search(
    client, query: str = DEFAULT_QUERY, per_page: int = 100, max_pages: int = 10
) -> list[RepoRecord]:
    """Repositories mentioning the exact phrase ``query``, deduplicated by name."""
    fetch = _fetcher(client)
    seen: dict[str, RepoRecord] = {}
    for item in _paged(fetch, f"{API}/search/repositories", {"q": f'"{query}"'}, per_page, max_pages):
        name = item["full_name"]
        if name not in seen:
            lic = item.get("license") or {}
            seen[name] = RepoRecord(name, item.get("html_url", ""), lic.get("spdx_id"))
    return list(seen.values())


def code_search(
    client, token: str, repo: str | None = None, per_page: int = 100, max_pages: int = 10
) -> list[RemoteFileRef]:
    """SKILL files matching ``token``, one query per extension, unique by url."""
    fetch = _fetcher(client)
    refs: dict[str, RemoteFileRef] = {}
    for ext in SKILL_EXTENSIONS:
        q = f"{token} extension:{ext[1:]}" if token else f"extension:{ext[1:]}"
        if repo:
            q += f" repo:{repo}"
        for item in _paged(fetch, f"{API}/search/code", {"q": q}, per_page, max_pages):
            ref = RemoteFileRef.from_item(item)
            if ref is not None and ref.url not in refs:
                refs[ref.url] = ref
    return list(refs.values())


def collect_query_tokens(
    files: Sequence[SourceFile],
    min_count: float = 10,
    fraction: float = 0.2,
    seed: int = 0,
) -> list[str]:
    """Seeded sample of ``fraction`` of the identifiers seen more than ``min_count`` times."""
    counts: Counter[str] = Counter()
    for f in files:
        counts.update(t.text for t in lex(f.text) if t.kind == IDENTIFIER)
    frequent = sorted(tok for tok, n in counts.items() if n > min_count)
    k = min(len(frequent), max(0, round(fraction * len(frequent))))
    return sorted(random.Random(seed).sample(frequent, k))


# -- blacklist filters ------------------------------------------------------


@dataclass(frozen=True)
class Rejection:
    url: str
    stage: str  # "url" | "file" | "fetch"
    keyword: str


def url_keyword(url: str) -> str | None:
    low = url.lower()
    for kw in URL_KEYWORDS:
        if kw in low:
            return kw
    return None


def file_pattern(text: str) -> str | None:
    for p, rx in _FILE_PATTERN_RES.items():
        if rx.search(text):
            return p
    return None


@dataclass
class FilterResult:
    kept: list[tuple[RemoteFileRef, str]] = field(default_factory=list)
    rejections: list[Rejection] = field(default_factory=list)


def url_stage(refs: Sequence[RemoteFileRef]) -> tuple[list[RemoteFileRef], list[Rejection]]:
    kept, rejected = [], []
    for r in refs:
        kw = url_keyword(r.url)
        if kw is None:
            kept.append(r)
        else:
            rejected.append(Rejection(r.url, "url", kw))
    return kept, rejected


def filter_candidates(refs: Sequence[RemoteFileRef], texts: Mapping[str, str]) -> FilterResult:
    """URL blacklist, then file-content blacklist; ``texts`` is keyed by ref url."""
    res = FilterResult()
    survivors, res.rejections = url_stage(refs)
    for r in survivors:
        text = texts.get(r.url)
        if text is None:
            res.rejections.append(Rejection(r.url, "fetch", ""))
            continue
        p = file_pattern(text)
        if p is None:
            res.kept.append((r, text))
        else:
            res.rejections.append(Rejection(r.url, "file", p))
    return res


# -- whole run --------------------------------------------------------------


@dataclass
class MiningResult:
    repos: list[RepoRecord]
    tokens: list[str]
    files: list[SourceFile]
    rejections: list[Rejection]

    def log_record(self) -> dict:
        return {
            "repos": [asdict(r) for r in self.repos],
            "tokens": self.tokens,
            "files": [{"id": f.id, "origin": f.origin.value, "path": f.path} for f in self.files],
            "rejections": [asdict(r) for r in self.rejections],
        }

    def write(self, out_dir: str | Path) -> dict[str, str]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        digests = {"remote_corpus.jsonl": write_corpus(self.files, out / "remote_corpus.jsonl")}
        data = json.dumps(self.log_record(), sort_keys=True, indent=1) + "\n"
        (out / "mining_log.json").write_text(data, encoding="utf-8")
        digests["mining_log.json"] = content_hash(data)
        return digests


def mine_remote(
    client,
    corpus: Sequence[SourceFile] = (),
    query: str = DEFAULT_QUERY,
    seed: int = 0,
    min_count: float = 10,
    fraction: float = 0.2,
    workers: int = 4,
    checkpoint: str | Path | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> MiningResult:
    """Repository search plus token-driven code search, filtered and fetched.

    Results keep a fixed order regardless of ``workers``: the pool maps
    in order and duplicates are resolved first-seen.
    """
    fetch = client if isinstance(client, Fetcher) else Fetcher(client, Checkpoint(checkpoint), sleep)
    try:
        repos = repo_search(fetch, query)
        tokens = collect_query_tokens(corpus, min_count, fraction, seed)
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            by_repo = list(pool.map(lambda r: code_search(fetch, "", repo=r.full_name), repos))
            by_token = list(pool.map(lambda t: code_search(fetch, t), tokens))

            origin: dict[str, Origin] = {}
            refs: list[RemoteFileRef] = []
            for group, org in ((by_repo, Origin.REPO_SEARCH), (by_token, Origin.CODE_SEARCH)):
                for batch in group:
                    for ref in batch:
                        if ref.url not in origin:
                            origin[ref.url] = org
                            refs.append(ref)

            survivors, rejections = url_stage(refs)
            bodies = list(pool.map(lambda r: _fetch_text(fetch, r), survivors))
    finally:
        fetch.checkpoint.save()

    texts = {r.url: t for r, t in zip(survivors, bodies) if t is not None}
    res = filter_candidates(survivors, texts)
    files = [SourceFile.from_text(text, origin[r.url], f"{r.repo}/{r.path}") for r, text in res.kept]
    return MiningResult(repos, tokens, files, rejections + res.rejections)


def _fetch_text(fetch: Fetcher, ref: RemoteFileRef) -> str | None:
    try:
        return fetch.get(ref.raw_url).body
    except (MinerError, OSError) as e:
        if isinstance(e, (AuthError, RateLimitExceeded)):
            raise
        log.warning("could not fetch %s: %s", ref.url, e)
        return None


__all__ = [
    "API",
    "DEFAULT_QUERY",
    "URL_KEYWORDS",
    "FILE_PATTERNS",
    "Response",
    "LiveClient",
    "FixtureClient",
    "RecordingClient",
    "Checkpoint",
    "Fetcher",
    "RepoRecord",
    "RemoteFileRef",
    "repo_search",
    "code_search",
    "collect_query_tokens",
    "filter_candidates",
    "url_stage",
    "mine_remote",
    "MiningResult",
    "MinerError",
    "AuthError",
    "RateLimitExceeded",
    "FixtureMiss",
]
