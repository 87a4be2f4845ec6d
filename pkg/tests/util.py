"""Shared helpers for the test suite."""

from pathlib import Path

from btt import (
    ExpandedTree,
    NodeDef,
    builtin_templates,
    expand_document,
    parse_document,
    with_leaf_defaults,
)

TESTS = Path(__file__).resolve().parent
REPO = TESTS.parent
EXAMPLES = REPO / "examples"
CORPUS = TESTS / "corpus"
GOLDEN = TESTS / "golden"

CORPUS_DOCS = sorted(CORPUS.glob("*.yaml")) + [
    EXAMPLES / "latch.yaml",
    EXAMPLES / "sequence_star.yaml",
    EXAMPLES / "patrol.yaml",
]


def expand_path(path):
    doc = parse_document(Path(path).read_text(encoding="utf-8"))
    return expand_document(doc, builtins=builtin_templates())


def expand_text(text, builtins=True):
    doc = parse_document(text)
    return expand_document(doc, builtins=builtin_templates() if builtins else None)


def action(name, **kw):
    return with_leaf_defaults(NodeDef(name=name, type="action", **kw))


def condition(name, if_, **kw):
    return with_leaf_defaults(NodeDef(name=name, type="condition", if_=if_, **kw))


def control(name, type_, children):
    return NodeDef(name=name, type=type_, children=tuple(children))


def tree(*nodes, root=None):
    return ExpandedTree(tuple(nodes), root if root is not None else nodes[0].name)
