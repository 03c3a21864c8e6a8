"""Knowledge sources: a TSV-backed graph, a wiki sentence index, and search.

Retrievers are pure lookups over committed fixtures; swapping in live clients
is a configuration concern, not a code change elsewhere.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass

from .errors import ConfigurationError, NotFoundError, ValidationError
from .model import GraphPath


@dataclass(frozen=True)
class RetrievedKnowledge:
    source: str  # wiki | search | kg
    text: str
    provenance: str


def first_sentence(paragraph: str) -> str:
    """First sentence of a paragraph; boundary is the first '. ' or the end."""
    paragraph = paragraph.strip()
    cut = paragraph.find(". ")
    return paragraph[: cut + 1] if cut != -1 else paragraph


def _canon(text: str) -> str:
    return unicodedata.normalize("NFC", text).strip()


class KnowledgeGraph:
    """Directed multigraph with string relations; duplicates collapse on load."""

    def __init__(self):
        self._adjacency: dict[str, list[tuple[str, str]]] = {}
        self._triples: set[tuple[str, str, str]] = set()

    def add(self, subject: str, relation: str, obj: str) -> None:
        for part in (subject, relation, obj):
            if not part or "\t" in part or "\n" in part:
                raise ValidationError(f"bad triple field: {part!r}")
        if (subject, relation, obj) in self._triples:
            return
        self._triples.add((subject, relation, obj))
        self._adjacency.setdefault(subject, []).append((relation, obj))

    @classmethod
    def from_tsv(cls, path: str) -> "KnowledgeGraph":
        graph = cls()
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                fields = line.split("\t")
                if len(fields) != 3:
                    raise ValidationError(
                        f"{path}:{lineno}: expected 3 tab-separated fields, got {len(fields)}"
                    )
                graph.add(*fields)
        return graph

    def to_tsv_text(self) -> str:
        """Sorted, deduplicated serialization; load/serialize round-trips."""
        return "".join(f"{s}\t{r}\t{o}\n" for s, r, o in sorted(self._triples))

    def neighbors(self, node: str) -> list[tuple[str, str]]:
        """(relation, object) pairs leaving node, in insertion order."""
        return list(self._adjacency.get(node, []))

    def objects(self, subject: str, relation: str) -> list[str]:
        """Objects reachable via an exact relation match."""
        return [o for r, o in self._adjacency.get(subject, []) if r == relation]

    def has_triple(self, subject: str, relation: str, obj: str) -> bool:
        return (subject, relation, obj) in self._triples

    def contains_path(self, path: GraphPath) -> bool:
        return all(self.has_triple(*hop) for hop in path.hops)

    def nodes(self) -> list[str]:
        seen = dict.fromkeys(self._adjacency)
        for _, _, o in sorted(self._triples):
            seen.setdefault(o)
        return list(seen)

    def __len__(self) -> int:
        return len(self._triples)


class WikiIndex:
    """Exact-title lookup over {title, first_sentence} JSONL."""

    def __init__(self, entries: dict[str, str]):
        self._entries = entries

    @classmethod
    def from_jsonl(cls, path: str) -> "WikiIndex":
        entries: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                title = _canon(record["title"])
                if title in entries:
                    raise ConfigurationError(f"{path}:{lineno}: duplicate title {title!r}")
                sentence = record["first_sentence"]
                if "\n" in sentence:
                    raise ValidationError(f"{path}:{lineno}: sentence must be a single line")
                entries[title] = sentence
        return cls(entries)

    def wiki_first_sentence(self, title: str) -> RetrievedKnowledge:
        if not title.strip():
            raise ValidationError("wiki lookup needs a non-empty title")
        key = _canon(title)
        if key not in self._entries:
            raise NotFoundError(f"no wiki entry titled {title!r}")
        return RetrievedKnowledge(source="wiki", text=self._entries[key], provenance=key)


class FixtureSearchClient:
    """Search stub over {query, first_sentence, url} JSONL."""

    def __init__(self, entries: dict[str, tuple[str, str]]):
        self._entries = entries

    @classmethod
    def from_jsonl(cls, path: str) -> "FixtureSearchClient":
        entries: dict[str, tuple[str, str]] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                query = _canon(record["query"])
                if query in entries:
                    raise ConfigurationError(f"{path}:{lineno}: duplicate query {query!r}")
                entries[query] = (record["first_sentence"], record.get("url", ""))
        return cls(entries)

    def search_first_sentence(self, query: str) -> RetrievedKnowledge:
        if not query.strip():
            raise ValidationError("search needs a non-empty query")
        key = _canon(query)
        if key not in self._entries:
            raise NotFoundError(f"no search result for {query!r}")
        paragraph, url = self._entries[key]
        return RetrievedKnowledge(
            source="search", text=first_sentence(paragraph), provenance=url or key
        )
