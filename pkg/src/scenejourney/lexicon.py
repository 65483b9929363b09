"""Lexical category filter: keep nouns (entities) and adjectives
(attributes) from free text, backed by a bundled word list."""

from __future__ import annotations

import json
import re
from functools import lru_cache
from importlib import resources

_TOKEN = re.compile(r"[A-Za-z']+")


@lru_cache(maxsize=1)
def _load() -> tuple[frozenset, frozenset]:
    data = json.loads(
        resources.files("scenejourney").joinpath("data/lexicon.json").read_text()
    )
    return frozenset(data["nouns"]), frozenset(data["adjectives"])


def _lookup(word: str, table: frozenset) -> bool:
    if word in table:
        return True
    # naive plural handling
    if word.endswith("ies") and word[:-3] + "y" in table:
        return True
    if word.endswith("es") and word[:-2] in table:
        return True
    if word.endswith("s") and word[:-1] in table:
        return True
    return False


def filter_words(text: str, passthrough: bool = False) -> list[str]:
    """Nouns and adjectives from the text, original order, deduplicated."""
    tokens = [t.lower().strip("'") for t in _TOKEN.findall(text)]
    if passthrough:
        kept = tokens
    else:
        nouns, adjectives = _load()
        kept = [t for t in tokens if _lookup(t, nouns) or _lookup(t, adjectives)]
    out = []
    seen = set()
    for t in kept:
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


def filter_entities(words: list[str], passthrough: bool = False) -> list[str]:
    """Entity nouns (with their adjectives dropped) from raw object phrases."""
    if passthrough:
        return [w.strip().lower() for w in words if w.strip()]
    nouns, _ = _load()
    out = []
    for phrase in words:
        tokens = [t.lower().strip("'") for t in _TOKEN.findall(phrase)]
        noun_tokens = [t for t in tokens if _lookup(t, nouns)]
        if noun_tokens:
            out.append(" ".join(noun_tokens))
    return out
