"""Option grounding: search top results, fetch, extract, inject as context.

The pipeline is deliberately simple: up to three pages per option, main-text
extraction, one truncated context message appended to the stream, and a
source hyperlink attached to the option. Failures degrade to fewer documents
and never abort a turn; the only user-visible effect of total failure is a
missing hyperlink.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from enum import Enum
from html.parser import HTMLParser
from typing import Callable, Protocol

from .session import Message, Session

SEARCH_ENDPOINT_ENV = "COUNCIL_SEARCH_ENDPOINT"
SEARCH_API_KEY_ENV = "COUNCIL_SEARCH_API_KEY"

DEFAULT_BUDGET_CHARS = 4000
MAX_RESULTS = 3

_SKIP_TAGS = {
    "script",
    "style",
    "nav",
    "header",
    "footer",
    "aside",
    "form",
    "noscript",
    "template",
    "iframe",
    "svg",
    "select",
    "button",
}

_VOID_TAGS = {
    "br", "hr", "img", "input", "meta", "link", "area", "base",
    "col", "embed", "source", "track", "wbr", "param",
}


class FetchStatus(str, Enum):
    OK = "ok"
    FETCH_FAILED = "fetch_failed"
    EXTRACT_EMPTY = "extract_empty"


class FetchError(Exception):
    pass


@dataclass
class SourceDoc:
    url: str
    title: str
    extracted_text: str
    fetched_at: float | int
    fetch_status: FetchStatus

    def to_doc(self) -> dict:
        return {
            "url": self.url,
            "title": self.title,
            "extracted_text": self.extracted_text,
            "fetched_at": self.fetched_at,
            "fetch_status": self.fetch_status.value,
        }


@dataclass
class GroundingBundle:
    option_key: str
    docs: list[SourceDoc] = field(default_factory=list)
    context_text: str = ""
    context_message_id: str | None = None
    primary_url: str | None = None

    def to_doc(self) -> dict:
        return {
            "option_key": self.option_key,
            "docs": [d.to_doc() for d in self.docs],
            "context_text": self.context_text,
            "context_message_id": self.context_message_id,
            "primary_url": self.primary_url,
        }


class SearchProvider(Protocol):
    def search(self, query: str, k: int) -> list[str]: ...


class Fetcher(Protocol):
    def fetch(self, url: str) -> str: ...


class FixtureSearch:
    """Query -> URL list from an in-memory mapping (case-insensitive)."""

    def __init__(self, results: dict[str, list[str]]):
        self._results = {q.casefold(): list(urls) for q, urls in results.items()}

    def search(self, query: str, k: int) -> list[str]:
        return self._results.get(query.casefold(), [])[:k]


class FixtureFetcher:
    """URL -> HTML from an in-memory mapping; unknown URLs fail to fetch."""

    def __init__(self, pages: dict[str, str]):
        self._pages = dict(pages)

    def fetch(self, url: str) -> str:
        if url not in self._pages:
            raise FetchError(f"no fixture page for {url}")
        return self._pages[url]


class CountingFetcher:
    """Wraps a fetcher and counts network operations, for cache tests."""

    def __init__(self, inner: Fetcher):
        self.inner = inner
        self.calls = 0

    def fetch(self, url: str) -> str:
        self.calls += 1
        return self.inner.fetch(url)


class HttpFetcher:
    def __init__(self, timeout: float = 10.0):
        self.timeout = timeout

    def fetch(self, url: str) -> str:
        import requests

        try:
            response = requests.get(url, timeout=self.timeout)
            response.raise_for_status()
            return response.text
        except Exception as exc:
            raise FetchError(f"fetch failed for {url}: {exc}") from exc


class HttpSearch:
    """GET {endpoint}?q=...&k=... expecting {"results": [{"url": ...}]} or a URL list."""

    def __init__(self, endpoint: str | None = None, api_key: str | None = None, timeout: float = 10.0):
        self.endpoint = endpoint or os.environ.get(SEARCH_ENDPOINT_ENV)
        self.api_key = api_key or os.environ.get(SEARCH_API_KEY_ENV)
        self.timeout = timeout
        if not self.endpoint:
            raise FetchError(f"live search needs {SEARCH_ENDPOINT_ENV} set")

    def search(self, query: str, k: int) -> list[str]:
        import requests

        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            response = requests.get(
                self.endpoint, params={"q": query, "k": k}, headers=headers, timeout=self.timeout
            )
            response.raise_for_status()
            body = response.json()
        except Exception:
            return []
        if isinstance(body, dict):
            results = body.get("results", [])
            return [r["url"] if isinstance(r, dict) else str(r) for r in results][:k]
        if isinstance(body, list):
            return [str(u) for u in body][:k]
        return []


class _MainTextParser(HTMLParser):
    """Collects paragraph text per container and all visible text as fallback."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self._skip_depth = 0
        self._element_stack: list[int] = []
        self._next_id = 0
        self._p_depth = 0
        self._p_container = 0
        self._p_buffer: list[str] = []
        self.paragraphs: list[tuple[int, str]] = []
        self.all_text: list[str] = []
        self.title = ""
        self._in_title = False

    def handle_starttag(self, tag, attrs):
        if tag in _VOID_TAGS:
            return
        if tag == "title":
            self._in_title = True
        if tag in _SKIP_TAGS or self._skip_depth:
            self._skip_depth += 1
            return
        self._next_id += 1
        self._element_stack.append(self._next_id)
        if tag == "p":
            self._flush_paragraph()
            self._p_depth = len(self._element_stack)
            self._p_container = (
                self._element_stack[-2] if len(self._element_stack) > 1 else 0
            )

    def handle_endtag(self, tag):
        if tag in _VOID_TAGS:
            return
        if tag == "title":
            self._in_title = False
        if self._skip_depth:
            self._skip_depth -= 1
            return
        if tag == "p" and self._p_depth:
            self._flush_paragraph()
            self._p_depth = 0
        if self._element_stack:
            self._element_stack.pop()

    def handle_data(self, data):
        if self._in_title:
            self.title += data
            return
        if self._skip_depth:
            return
        if self._p_depth:
            self._p_buffer.append(data)
        self.all_text.append(data)

    def _flush_paragraph(self):
        if self._p_buffer:
            text = " ".join("".join(self._p_buffer).split())
            if text:
                self.paragraphs.append((self._p_container, text))
            self._p_buffer = []

    def close(self):
        self._flush_paragraph()
        super().close()


def extract_main_text(html: str) -> str:
    """Main article text of a page: paragraphs of the densest container.

    Script/style/nav/boilerplate subtrees are dropped. Pages without <p>
    elements fall back to all visible text. Unparseable input yields "".
    """
    if not html or not html.strip():
        return ""
    parser = _MainTextParser()
    try:
        parser.feed(html)
        parser.close()
    except Exception:
        return ""
    if parser.paragraphs:
        totals: dict[int, int] = {}
        for container, text in parser.paragraphs:
            totals[container] = totals.get(container, 0) + len(text)
        best = max(totals, key=lambda c: (totals[c], -c))
        return "\n\n".join(text for container, text in parser.paragraphs if container == best)
    return " ".join("".join(parser.all_text).split())


def extract_title(html: str) -> str:
    parser = _MainTextParser()
    try:
        parser.feed(html)
        parser.close()
    except Exception:
        return ""
    return " ".join(parser.title.split())


def truncate_at_whitespace(text: str, budget_chars: int) -> str:
    """Longest prefix within budget that ends on a whitespace boundary."""
    if len(text) <= budget_chars:
        return text
    cut = budget_chars
    while cut > 0 and not text[cut].isspace():
        cut -= 1
    if cut == 0:
        return text[:budget_chars]
    return text[:cut].rstrip()


def ground_option(
    option_key: str,
    display_name: str,
    search: SearchProvider,
    fetcher: Fetcher,
    extractor: Callable[[str], str] = extract_main_text,
    budget_chars: int = DEFAULT_BUDGET_CHARS,
    clock=None,
) -> GroundingBundle:
    """Search the option, fetch up to three pages, extract, and truncate.

    Every failure degrades to fewer documents; a bundle with no usable docs
    simply has no primary_url and injects nothing.
    """
    now = clock.now if clock else (lambda: 0)
    bundle = GroundingBundle(option_key=option_key)
    try:
        urls = search.search(display_name, MAX_RESULTS)[:MAX_RESULTS]
    except Exception:
        urls = []
    texts: list[str] = []
    for url in urls:
        try:
            html = fetcher.fetch(url)
        except FetchError as exc:
            bundle.docs.append(
                SourceDoc(
                    url=url,
                    title="",
                    extracted_text="",
                    fetched_at=now(),
                    fetch_status=FetchStatus.FETCH_FAILED,
                )
            )
            continue
        text = extractor(html)
        status = FetchStatus.OK if text else FetchStatus.EXTRACT_EMPTY
        bundle.docs.append(
            SourceDoc(
                url=url,
                title=extract_title(html),
                extracted_text=text,
                fetched_at=now(),
                fetch_status=status,
            )
        )
        if text:
            texts.append(text)
            if bundle.primary_url is None:
                bundle.primary_url = url
    bundle.context_text = truncate_at_whitespace("\n\n".join(texts), budget_chars)
    return bundle


def inject_grounding(session: Session, bundle: GroundingBundle, display_name: str) -> str | None:
    """Append the bundle as a non-display context message and set hyperlinks.

    Idempotent per option: re-grounding an option that already carries a
    context message returns the existing message id. Empty bundles inject
    nothing.
    """
    existing = session.grounding.get(bundle.option_key)
    if existing and existing.get("context_message_id"):
        return existing["context_message_id"]
    if bundle.option_key not in session.index:
        raise KeyError(bundle.option_key)
    if not bundle.context_text or bundle.primary_url is None:
        session.grounding[bundle.option_key] = bundle.to_doc()
        return None

    source_urls = [d.url for d in bundle.docs if d.fetch_status is FetchStatus.OK]
    content = (
        f"Background information about {display_name} gathered from the web. "
        "Use it as context for your responses; do not present it as an agent message.\n"
        f"Sources: {', '.join(source_urls)}\n\n{bundle.context_text}"
    )
    message = Message(
        message_id=session.next_message_id(),
        turn=session.turn_count,
        role="context",
        content=content,
        display=False,
        option_key=bundle.option_key,
    )
    session.messages.append(message)
    bundle.context_message_id = message.message_id

    entry = session.index.get(bundle.option_key)
    entry.source_url = bundle.primary_url
    for agent in session.registry:
        if agent.chosen_option == bundle.option_key:
            agent.source_url = bundle.primary_url
    session.grounding[bundle.option_key] = bundle.to_doc()
    session.log_event(
        "grounding_injected",
        {
            "option_key": bundle.option_key,
            "message_id": message.message_id,
            "primary_url": bundle.primary_url,
            "urls": source_urls,
        },
    )
    return message.message_id


class Grounder:
    """Session-facing wrapper: per-option cache in front of the pipeline."""

    def __init__(
        self,
        search: SearchProvider,
        fetcher: Fetcher,
        budget_chars: int = DEFAULT_BUDGET_CHARS,
    ):
        self.search = search
        self.fetcher = fetcher
        self.budget_chars = budget_chars

    def ground(self, session: Session, option_key: str, display_name: str) -> str | None:
        cached = session.grounding.get(option_key)
        if cached is not None:
            # Agents that adopted the option after the original grounding
            # still get the hyperlink.
            primary_url = cached.get("primary_url")
            if primary_url:
                for agent in session.registry:
                    if agent.chosen_option == option_key and not agent.source_url:
                        agent.source_url = primary_url
            return cached.get("context_message_id")
        bundle = ground_option(
            option_key,
            display_name,
            self.search,
            self.fetcher,
            budget_chars=self.budget_chars,
            clock=session.clock,
        )
        return inject_grounding(session, bundle, display_name)
