"""Document object model for the behavior-tree description language.

Holds the parsed document (templates plus user nodes), the fully expanded
tree of primary nodes, and the structural validation that every expanded
tree must pass before it may be serialized or executed.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field, replace
from typing import Union

# Node names, memory keys and expression identifiers share one alphabet;
# "/" doubles as the qualification separator used by the expander and by
# the engine's __STATE__/<node> keys.
NAME_RE = re.compile(r"[A-Za-z0-9_/.\-]+")
# Template-body keys may additionally carry substitution markers.
PATTERN_NAME_RE = re.compile(r"[A-Za-z0-9_/.\-$~]+")


class ReturnState(enum.Enum):
    """Four-valued tick result. EMPTY means "no decision produced"."""

    SUCCESS = "SUCCESS"
    FAILURE = "FAILURE"
    RUNNING = "RUNNING"
    EMPTY = "EMPTY"

    def __repr__(self):
        return self.value


RETURN_STATES = {s.value: s for s in ReturnState}


class NodeKind(enum.Enum):
    SEQUENCE = "sequence"
    SELECTOR = "selector"
    SKIPPER = "skipper"
    PARALLEL = "parallel"
    ACTION = "action"
    CONDITION = "condition"

    @property
    def is_control(self):
        return self in _CONTROL_KINDS

    @property
    def is_leaf(self):
        return not self.is_control


_CONTROL_KINDS = frozenset(
    {NodeKind.SEQUENCE, NodeKind.SELECTOR, NodeKind.SKIPPER, NodeKind.PARALLEL}
)

PRIMARY_KINDS = {k.value: k for k in NodeKind}
CONTROL_KIND_NAMES = frozenset(k.value for k in _CONTROL_KINDS)
LEAF_KIND_NAMES = frozenset(k.value for k in NodeKind if k.is_leaf)

# A scalar blackboard value. bool must be tested before int everywhere:
# Python's bool is an int subclass but the two are distinct tags here.
Value = Union[bool, int, float, str, ReturnState]


def value_tag(v: Value) -> str:
    if isinstance(v, bool):
        return "boolean"
    if isinstance(v, int):
        return "integer"
    if isinstance(v, float):
        return "float"
    if isinstance(v, ReturnState):
        return "state"
    if isinstance(v, str):
        return "text"
    raise TypeError(f"not a scalar value: {v!r}")


def values_equal(a: Value, b: Value) -> bool:
    """Equality within one tag; any cross-tag comparison is False, never an error."""
    if value_tag(a) != value_tag(b):
        return False
    return a == b


def value_text(v: Value) -> str:
    """Canonical textual form: true/false, base-10 integers, shortest
    round-trip floats, state names, text verbatim."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, ReturnState):
        return v.value
    if isinstance(v, (int, float)):
        return repr(v) if isinstance(v, float) else str(v)
    return v


@dataclass(frozen=True)
class NodeDef:
    """One node definition.

    ``type`` is kept as text: it may name a primary kind or a template;
    resolution happens in the expander. Leaf payload fields are None/empty
    when they do not apply. ``args`` carries scalar arguments for template
    instantiation only; expanded primary nodes have no args.
    """

    name: str
    type: str
    children: tuple[str, ...] = ()
    args: dict = field(default_factory=dict)
    if_: str | None = None
    then: str | None = None
    else_: str | None = None
    script: tuple[str, ...] = ()
    result: str | None = None
    span: "SourceSpan | None" = field(default=None, compare=False, repr=False)


def with_leaf_defaults(node: NodeDef) -> NodeDef:
    """Fill Condition then/else and Action result defaults for primary leaves."""
    if node.type == NodeKind.CONDITION.value:
        return replace(
            node,
            then=node.then if node.then is not None else "SUCCESS",
            else_=node.else_ if node.else_ is not None else "FAILURE",
        )
    if node.type == NodeKind.ACTION.value:
        return replace(node, result=node.result if node.result is not None else "SUCCESS")
    return node


@dataclass(frozen=True)
class ParamDecl:
    name: str
    kind: str  # "scalar" | "scalar-list" | "node" | "nodes"
    default: object = None  # scalar kinds only; Value or tuple of Values

    PARAM_KINDS = ("scalar", "scalar-list", "node", "nodes")


@dataclass(frozen=True)
class ForeachBlock:
    """Replicates a node fragment once per element of a list argument.

    ``list_ref`` is a ``$param`` reference; ``var`` binds the element and
    ``index`` the 0-based position. ``emit`` names the per-iteration node
    exported for splicing into a children list.
    """

    list_ref: str
    var: str
    emit: str
    nodes: dict  # local-name pattern -> NodeDef pattern or nested ForeachBlock
    index: str = "i"
    span: "SourceSpan | None" = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class TemplateDef:
    name: str
    params: tuple[ParamDecl, ...]
    body: dict  # local-name pattern -> NodeDef pattern | block-name -> ForeachBlock
    root: str
    span: "SourceSpan | None" = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Document:
    templates: dict  # name -> TemplateDef, source order
    nodes: dict  # name -> NodeDef, source order
    root: str


@dataclass
class ExpandedTree:
    """Flat collection of primary nodes plus the root name.

    Nodes are kept as an ordered sequence (not a mapping) so that
    validation can still report duplicated names.
    """

    nodes: tuple[NodeDef, ...]
    root: str
    _index: dict = field(default=None, compare=False, repr=False)

    def by_name(self) -> dict:
        """Name -> NodeDef for the first occurrence of each name."""
        if self._index is None:
            index = {}
            for nd in self.nodes:
                index.setdefault(nd.name, nd)
            self._index = index
        return self._index

    def node(self, name: str) -> NodeDef:
        return self.by_name()[name]


@dataclass(frozen=True)
class Diagnostic:
    code: str
    node: str
    message: str


def diagnostic_render(d: Diagnostic) -> str:
    return f"{d.code}: {d.node}: {d.message}"


def _texts_with_placeholder(nd: NodeDef):
    # "$" is residue anywhere; "~" only counts in name positions, since
    # quoted expression text may legitimately contain a tilde.
    dollar_fields = [nd.name, nd.type, *nd.children, nd.if_, nd.then, nd.else_,
                     *nd.script, nd.result]
    if any(t is not None and "$" in t for t in dollar_fields):
        return True
    name_fields = [nd.name, nd.type, *nd.children]
    return any("~" in t for t in name_fields)


def validate_expanded(tree: ExpandedTree) -> list[Diagnostic]:
    """Check all structural invariants; return one Diagnostic per violation.

    Pure and deterministic: the same tree always yields the same list in
    the same order. An empty list means the tree is valid.
    """
    diags = []
    defined = {}
    order = []
    for nd in tree.nodes:
        if nd.name in defined:
            diags.append(
                Diagnostic("DUPLICATE_NAME", nd.name, "node name defined more than once")
            )
        else:
            defined[nd.name] = nd
            order.append(nd)

    for nd in order:
        kind = PRIMARY_KINDS.get(nd.type)
        if kind is None:
            diags.append(
                Diagnostic("UNKNOWN_TYPE", nd.name,
                           f"type '{nd.type}' is not a primary node kind")
            )
        elif kind.is_leaf and nd.children:
            diags.append(
                Diagnostic("LEAF_WITH_CHILDREN", nd.name,
                           f"{nd.type} node must not have children")
            )
        elif kind.is_control and not nd.children:
            diags.append(
                Diagnostic("CONTROL_WITHOUT_CHILDREN", nd.name,
                           f"{nd.type} node requires at least one child")
            )
        if _texts_with_placeholder(nd):
            diags.append(
                Diagnostic("UNSUBSTITUTED_PLACEHOLDER", nd.name,
                           "node carries an unsubstituted '$' or '~'")
            )
        for child in nd.children:
            if child not in defined:
                diags.append(
                    Diagnostic("UNRESOLVED_CHILD", nd.name,
                               f"child '{child}' is not defined")
                )

    parents = {}
    for nd in order:
        for child in nd.children:
            if child in defined:
                parents.setdefault(child, []).append(nd.name)
    for nd in order:
        ps = parents.get(nd.name, ())
        if len(ps) > 1:
            diags.append(
                Diagnostic("MULTIPLE_PARENTS", nd.name,
                           f"listed as child of multiple nodes: {', '.join(ps)}")
            )

    if tree.root not in defined:
        diags.append(
            Diagnostic("BAD_ROOT", tree.root, "root does not name a defined node")
        )
        return diags

    # Iterative DFS from the root: flags back edges (cycles) and, afterwards,
    # nodes the traversal never reached.
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {name: WHITE for name in defined}
    cycle_hits = []
    stack = [(tree.root, iter(defined[tree.root].children))]
    color[tree.root] = GRAY
    while stack:
        name, children = stack[-1]
        advanced = False
        for child in children:
            if child not in defined:
                continue
            if color[child] == GRAY:
                if child not in cycle_hits:
                    cycle_hits.append(child)
            elif color[child] == WHITE:
                color[child] = GRAY
                stack.append((child, iter(defined[child].children)))
                advanced = True
                break
        if not advanced:
            color[name] = BLACK
            stack.pop()
    for hit in cycle_hits:
        diags.append(
            Diagnostic("CYCLE", hit, "node participates in a reference cycle")
        )
    for nd in order:
        if color[nd.name] == WHITE:
            diags.append(
                Diagnostic("UNREACHABLE", nd.name, "node is not reachable from the root")
            )
    return diags


def dfs_preorder(tree: ExpandedTree) -> list[str]:
    """Depth-first pre-order from the root, children in listed order.

    Intended for valid trees; repeated or missing references are skipped
    defensively rather than visited twice.
    """
    index = tree.by_name()
    out = []
    seen = set()
    stack = [tree.root]
    while stack:
        name = stack.pop()
        if name in seen or name not in index:
            continue
        seen.add(name)
        out.append(name)
        stack.extend(reversed(index[name].children))
    return out
