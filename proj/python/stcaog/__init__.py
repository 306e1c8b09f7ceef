"""Grammar induction, fusion, parsing and logic views for network traces.

Traces are dicts with ``id``, ``path`` and optional ``op`` and ``features``.
Grammars, composites and parse graphs are the same JSON documents the
``stcaog`` command-line tool reads and writes.
"""

from __future__ import annotations

import json
from typing import Any, Iterable, Optional, Sequence

from . import _stcaog
from ._stcaog import StcaogError, __version__

__all__ = [
    "StcaogError",
    "__version__",
    "build_caog",
    "default_config",
    "describe",
    "evaluate",
    "export_dot",
    "fuse",
    "induce",
    "parse",
    "relevance",
    "sample",
    "simulate",
]


def _jsonl(traces: Iterable[dict]) -> str:
    return "".join(json.dumps(t) + "\n" for t in traces)


def _doc(value: Any) -> str:
    return value if isinstance(value, str) else json.dumps(value)


def default_config() -> dict:
    return json.loads(_stcaog.default_config())


def simulate(config: Optional[dict] = None, **overrides: Any) -> list[dict]:
    """Run the offloading scenario; keys override the default configuration."""
    merged = dict(config or {}, **overrides)
    text = _stcaog.simulate(json.dumps(merged) if merged else "")
    return [json.loads(line) for line in text.splitlines() if line]


def induce(
    traces: Iterable[dict],
    layer: str = "S",
    spatial: Optional[dict] = None,
    alpha: float = 1.0,
    max_iterations: int = 100,
    origin_len: int = 1,
    seed: int = 0,
) -> dict:
    """Return ``{"grammar", "log", "fragment_count"}``; layer T needs ``spatial``."""
    out = _stcaog.induce(
        _jsonl(traces), layer, _doc(spatial) if spatial is not None else "", alpha, max_iterations, origin_len, seed
    )
    return json.loads(out)


def relevance(
    traces: Iterable[dict], intent: str = "F0", estimator: str = "mutual-information"
) -> list[tuple[str, float]]:
    """Features ranked by decreasing relevance to ``intent``."""
    return _stcaog.relevance(_jsonl(traces), intent, estimator)


def build_caog(
    traces: Iterable[dict],
    intent: str = "F0",
    estimator: str = "mutual-information",
    top_k: int = 2,
    bins: int = 4,
    depth: int = 1,
) -> dict:
    return json.loads(_stcaog.build_caog(_jsonl(traces), intent, estimator, top_k, bins, depth))


def fuse(s: dict, t: dict, c: dict, traces: Iterable[dict], origin_len: int = 1, soft: bool = False) -> dict:
    return json.loads(_stcaog.fuse(_doc(s), _doc(t), _doc(c), _jsonl(traces), origin_len, soft))


def parse(aog: dict, trace: dict) -> dict:
    """Most probable parse graph of one trace."""
    return json.loads(_stcaog.parse(_doc(aog), _doc(trace)))


def describe(aog: dict, pg: Optional[dict] = None) -> str:
    """Numbered logic sentences for a composite, or for one of its parse graphs."""
    return _stcaog.describe(_doc(aog), _doc(pg) if pg is not None else "")


def export_dot(doc: dict) -> str:
    """Graphviz text for a layer grammar or a composite."""
    return _stcaog.export_dot(_doc(doc))


def sample(grammar: dict, seed: int = 0) -> list[str]:
    return _stcaog.sample(_doc(grammar), seed)


def evaluate(
    config: Optional[dict] = None,
    policies: Sequence[str] = ("stochastic", "human-prior", "intent-feature"),
    episodes: int = 5000,
    window: int = 500,
) -> dict:
    """Return ``{"summary", "rows"}`` with per-window failure rates."""
    return json.loads(_stcaog.evaluate(json.dumps(config) if config else "", list(policies), episodes, window))
