"""Reading the YAML description format and writing canonical expanded trees.

Parsing is built on PyYAML's composer so every definition carries a source
span. Values that the schema treats as text (names, types, patterns,
expressions) are taken verbatim from the scalar, so quoting never changes
meaning; only scalar *arguments* (template args, defaults, scenario memory
seeds) get YAML's boolean/integer/float typing.

The canonical writer is hand-rolled: output must be byte-identical across
runs and platforms, which rules out yaml.dump.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

import yaml

from .engine import Scenario
from .errors import CanonicalizeError, ParseError, SchemaError
from .model import (
    CONTROL_KIND_NAMES,
    NAME_RE,
    PATTERN_NAME_RE,
    PRIMARY_KINDS,
    RETURN_STATES,
    Document,
    ExpandedTree,
    ForeachBlock,
    NodeDef,
    ParamDecl,
    TemplateDef,
    dfs_preorder,
    validate_expanded,
    with_leaf_defaults,
)


@dataclass(frozen=True)
class SourceSpan:
    line: int  # 1-based
    column: int  # 1-based


_PARAM_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_TEMPLATE_NAME_RE = re.compile(r"[A-Za-z0-9_.\-]+")
_CHILD_PATTERN_RE = re.compile(r"[A-Za-z0-9_/.\-$~@]+")

_NODE_KEYS = {
    "control": ("type", "children"),
    "action": ("type", "children", "script", "result"),
    "condition": ("type", "children", "if", "then", "else"),
    "open": ("type", "children", "args", "if", "then", "else", "script", "result"),
}

_constructor = yaml.constructor.SafeConstructor()


def _span(node) -> SourceSpan:
    return SourceSpan(node.start_mark.line + 1, node.start_mark.column + 1)


def _compose(text, what):
    try:
        events = list(yaml.parse(text, Loader=yaml.SafeLoader))
    except RecursionError:
        raise ParseError("PARSE_ERROR", f"{what} is nested too deeply") from None
    except yaml.YAMLError as exc:
        raise _parse_error(exc, what) from None
    starts = 0
    for ev in events:
        if isinstance(ev, yaml.events.AliasEvent):
            raise SchemaError("SCHEMA_ERROR", "YAML aliases are not supported")
        if getattr(ev, "anchor", None) is not None:
            raise SchemaError("SCHEMA_ERROR", "YAML anchors are not supported")
        if isinstance(ev, yaml.events.DocumentStartEvent):
            starts += 1
            if starts > 1:
                raise SchemaError("SCHEMA_ERROR", "multi-document streams are not supported")
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except RecursionError:
        raise ParseError("PARSE_ERROR", f"{what} is nested too deeply") from None
    except yaml.YAMLError as exc:  # pragma: no cover - events pass already caught most
        raise _parse_error(exc, what) from None
    return node


def _parse_error(exc, what):
    span = None
    mark = getattr(exc, "problem_mark", None)
    if mark is not None:
        span = SourceSpan(mark.line + 1, mark.column + 1)
    problem = getattr(exc, "problem", None) or str(exc)
    return ParseError("PARSE_ERROR", f"{what}: {problem}", span=span)


def _mapping_items(node, what):
    if not isinstance(node, yaml.nodes.MappingNode):
        raise SchemaError("SCHEMA_ERROR", f"{what} must be a mapping",
                          span=_span(node) if node is not None else None)
    items = []
    seen = set()
    for key_node, value_node in node.value:
        if not isinstance(key_node, yaml.nodes.ScalarNode):
            raise SchemaError("SCHEMA_ERROR", f"{what} keys must be scalars",
                              span=_span(key_node))
        key = key_node.value
        if key == "<<":
            raise SchemaError("SCHEMA_ERROR", "YAML merge keys are not supported",
                              span=_span(key_node))
        if key in seen:
            raise SchemaError("SCHEMA_ERROR", f"duplicate key '{key}' in {what}",
                              span=_span(key_node), subject=key)
        seen.add(key)
        items.append((key, value_node, key_node))
    return items


def _text(node, what):
    if not isinstance(node, yaml.nodes.ScalarNode):
        raise SchemaError("SCHEMA_ERROR", f"{what} must be a scalar", span=_span(node))
    return node.value


def _text_list(node, what):
    if not isinstance(node, yaml.nodes.SequenceNode):
        raise SchemaError("SCHEMA_ERROR", f"{what} must be a list", span=_span(node))
    return [_text(item, f"{what} entry") for item in node.value]


def _typed_scalar(node, what):
    """Plain scalars get YAML bool/int/float typing; anything quoted is text."""
    if not isinstance(node, yaml.nodes.ScalarNode):
        raise SchemaError("SCHEMA_ERROR", f"{what} must be a scalar", span=_span(node))
    if node.style is not None:
        return node.value
    if node.tag == "tag:yaml.org,2002:bool":
        return _constructor.construct_yaml_bool(node)
    if node.tag == "tag:yaml.org,2002:int":
        return _constructor.construct_yaml_int(node)
    if node.tag == "tag:yaml.org,2002:float":
        return _constructor.construct_yaml_float(node)
    return node.value


def _scalar_or_list(node, what):
    if isinstance(node, yaml.nodes.SequenceNode):
        return tuple(_typed_scalar(item, f"{what} entry") for item in node.value)
    return _typed_scalar(node, what)


def _check_name(name, what, span, pattern=False):
    rx = PATTERN_NAME_RE if pattern else NAME_RE
    if not rx.fullmatch(name):
        raise SchemaError("SCHEMA_ERROR", f"invalid {what} '{name}'",
                          span=span, subject=name)


def _parse_node(name, node, pattern):
    items = _mapping_items(node, f"node '{name}'")
    keys = {k: v for k, v, _ in items}
    if "type" not in keys:
        raise SchemaError("SCHEMA_ERROR", f"node '{name}' is missing 'type'",
                          span=_span(node), subject=name)
    type_ = _text(keys["type"], "type")

    if type_ in CONTROL_KIND_NAMES:
        allowed = _NODE_KEYS["control"]
    elif type_ in ("action", "condition"):
        allowed = _NODE_KEYS[type_]
    else:
        # may be a template name or a substituted type; resolved by the expander
        allowed = _NODE_KEYS["open"]
    for key, value_node, key_node in items:
        if key not in allowed:
            raise SchemaError("SCHEMA_ERROR",
                              f"unknown key '{key}' for node '{name}' of type '{type_}'",
                              span=_span(key_node), subject=name)

    children = ()
    if "children" in keys:
        entries = _text_list(keys["children"], "children")
        for entry in entries:
            rx = _CHILD_PATTERN_RE if pattern else NAME_RE
            if not rx.fullmatch(entry):
                raise SchemaError("SCHEMA_ERROR", f"invalid child reference '{entry}'",
                                  span=_span(keys["children"]), subject=name)
        children = tuple(entries)

    args = {}
    if "args" in keys:
        for pname, pvalue, pkey in _mapping_items(keys["args"], "args"):
            if not _PARAM_NAME_RE.fullmatch(pname):
                raise SchemaError("SCHEMA_ERROR", f"invalid argument name '{pname}'",
                                  span=_span(pkey), subject=name)
            args[pname] = _scalar_or_list(pvalue, f"argument '{pname}'")

    if type_ == "condition" and "if" not in keys:
        raise SchemaError("SCHEMA_ERROR", f"condition node '{name}' is missing 'if'",
                          span=_span(node), subject=name)

    nd = NodeDef(
        name=name,
        type=type_,
        children=children,
        args=args,
        if_=_text(keys["if"], "if") if "if" in keys else None,
        then=_text(keys["then"], "then") if "then" in keys else None,
        else_=_text(keys["else"], "else") if "else" in keys else None,
        script=tuple(_text_list(keys["script"], "script")) if "script" in keys else (),
        result=_text(keys["result"], "result") if "result" in keys else None,
        span=_span(node),
    )
    return with_leaf_defaults(nd)


def _parse_body(node, owner):
    """Template body: node patterns and foreach blocks, in source order."""
    body = {}
    for key, value_node, key_node in _mapping_items(node, f"nodes of {owner}"):
        items = _mapping_items(value_node, f"entry '{key}'")
        entry_keys = {k for k, _, _ in items}
        if "foreach" in entry_keys:
            body[key] = _parse_foreach(key, value_node, items, key_node)
        else:
            _check_name(key, "node name pattern", _span(key_node), pattern=True)
            body[key] = _parse_node(key, value_node, pattern=True)
    return body


def _parse_foreach(key, node, items, key_node):
    if not _TEMPLATE_NAME_RE.fullmatch(key):
        raise SchemaError("SCHEMA_ERROR", f"invalid foreach block name '{key}'",
                          span=_span(key_node), subject=key)
    keys = {k: v for k, v, _ in items}
    for k, _, kn in items:
        if k not in ("foreach", "emit", "nodes"):
            raise SchemaError("SCHEMA_ERROR", f"unknown key '{k}' in foreach block '{key}'",
                              span=_span(kn), subject=key)
    for required in ("emit", "nodes"):
        if required not in keys:
            raise SchemaError("SCHEMA_ERROR", f"foreach block '{key}' is missing '{required}'",
                              span=_span(node), subject=key)

    spec = {}
    for k, v, kn in _mapping_items(keys["foreach"], "foreach"):
        if k not in ("list", "var", "index"):
            raise SchemaError("SCHEMA_ERROR", f"unknown key '{k}' in foreach", span=_span(kn))
        spec[k] = _text(v, k)
    for required in ("list", "var"):
        if required not in spec:
            raise SchemaError("SCHEMA_ERROR", f"foreach is missing '{required}'",
                              span=_span(keys["foreach"]), subject=key)
    if not re.fullmatch(r"\$[A-Za-z_][A-Za-z0-9_]*", spec["list"]):
        raise SchemaError("SCHEMA_ERROR",
                          f"foreach 'list' must be a $param reference, got '{spec['list']}'",
                          span=_span(keys["foreach"]), subject=key)
    var = spec["var"]
    index = spec.get("index", "i")
    for label, token in (("var", var), ("index", index)):
        if not _PARAM_NAME_RE.fullmatch(token) or token == "name":
            raise SchemaError("SCHEMA_ERROR", f"invalid foreach {label} '{token}'",
                              span=_span(keys["foreach"]), subject=key)
    if var == index:
        raise SchemaError("SCHEMA_ERROR", "foreach var and index must differ",
                          span=_span(keys["foreach"]), subject=key)

    return ForeachBlock(
        list_ref=spec["list"],
        var=var,
        index=index,
        emit=_text(keys["emit"], "emit"),
        nodes=_parse_body(keys["nodes"], f"foreach block '{key}'"),
        span=_span(node),
    )


def _parse_template(name, node):
    items = _mapping_items(node, f"template '{name}'")
    keys = {k: v for k, v, _ in items}
    for k, _, kn in items:
        if k not in ("args", "root", "nodes"):
            raise SchemaError("SCHEMA_ERROR", f"unknown key '{k}' in template '{name}'",
                              span=_span(kn), subject=name)
    for required in ("root", "nodes"):
        if required not in keys:
            raise SchemaError("SCHEMA_ERROR", f"template '{name}' is missing '{required}'",
                              span=_span(node), subject=name)

    params = []
    if "args" in keys:
        if not isinstance(keys["args"], yaml.nodes.SequenceNode):
            raise SchemaError("SCHEMA_ERROR", "template args must be a list",
                              span=_span(keys["args"]), subject=name)
        seen = set()
        for item in keys["args"].value:
            decl = {k: v for k, v, _ in _mapping_items(item, "arg declaration")}
            for k in decl:
                if k not in ("name", "kind", "default"):
                    raise SchemaError("SCHEMA_ERROR", f"unknown key '{k}' in arg declaration",
                                      span=_span(item), subject=name)
            if "name" not in decl or "kind" not in decl:
                raise SchemaError("SCHEMA_ERROR", "arg declaration needs 'name' and 'kind'",
                                  span=_span(item), subject=name)
            pname = _text(decl["name"], "arg name")
            kind = _text(decl["kind"], "arg kind")
            if not _PARAM_NAME_RE.fullmatch(pname) or pname == "name":
                raise SchemaError("SCHEMA_ERROR", f"invalid arg name '{pname}'",
                                  span=_span(item), subject=name)
            if pname in seen:
                raise SchemaError("SCHEMA_ERROR", f"duplicate arg '{pname}'",
                                  span=_span(item), subject=name)
            seen.add(pname)
            if kind not in ParamDecl.PARAM_KINDS:
                raise SchemaError("SCHEMA_ERROR",
                                  f"arg kind must be one of {', '.join(ParamDecl.PARAM_KINDS)}, "
                                  f"got '{kind}'",
                                  span=_span(item), subject=name)
            default = None
            if "default" in decl:
                if kind in ("node", "nodes"):
                    raise SchemaError("SCHEMA_ERROR",
                                      "defaults are only allowed for scalar kinds",
                                      span=_span(item), subject=name)
                default = _scalar_or_list(decl["default"], "default")
                if kind == "scalar-list" and not isinstance(default, tuple):
                    raise SchemaError("SCHEMA_ERROR", "scalar-list default must be a list",
                                      span=_span(item), subject=name)
                if kind == "scalar" and isinstance(default, tuple):
                    raise SchemaError("SCHEMA_ERROR", "scalar default must not be a list",
                                      span=_span(item), subject=name)
            params.append(ParamDecl(pname, kind, default))

    node_kinds = [p for p in params if p.kind in ("node", "nodes")]
    variadic = [p for p in node_kinds if p.kind == "nodes"]
    if len(variadic) > 1:
        raise SchemaError("SCHEMA_ERROR", "at most one arg of kind 'nodes' is allowed",
                          span=_span(node), subject=name)
    if variadic and node_kinds[-1].kind != "nodes":
        raise SchemaError("SCHEMA_ERROR", "the 'nodes' arg must be the last node-kind arg",
                          span=_span(node), subject=name)

    body = _parse_body(keys["nodes"], f"template '{name}'")
    if not body:
        raise SchemaError("SCHEMA_ERROR", f"template '{name}' must define at least one node",
                          span=_span(keys["nodes"]), subject=name)
    return TemplateDef(
        name=name,
        params=tuple(params),
        body=body,
        root=_text(keys["root"], "template root"),
        span=_span(node),
    )


def _parse_templates_map(node):
    templates = {}
    for name, value_node, key_node in _mapping_items(node, "templates"):
        if not _TEMPLATE_NAME_RE.fullmatch(name):
            raise SchemaError("SCHEMA_ERROR", f"invalid template name '{name}'",
                              span=_span(key_node), subject=name)
        if name in PRIMARY_KINDS:
            raise SchemaError("SCHEMA_ERROR",
                              f"template name '{name}' collides with a primary node kind",
                              span=_span(key_node), subject=name)
        templates[name] = _parse_template(name, value_node)
    return templates


def parse_document(text: str) -> Document:
    """Parse a document. Type names are carried verbatim; whether a type is
    a primary kind, a template, or a typo is decided by the expander."""
    root_node = _compose(text, "document")
    if root_node is None:
        raise ParseError("PARSE_ERROR", "document is empty")
    templates = {}
    nodes = {}
    root = None
    for key, value_node, key_node in _mapping_items(root_node, "document"):
        if key == "templates":
            templates = _parse_templates_map(value_node)
        elif key == "nodes":
            for name, nd_node, nd_key in _mapping_items(value_node, "nodes"):
                _check_name(name, "node name", _span(nd_key))
                nodes[name] = _parse_node(name, nd_node, pattern=False)
        elif key == "root":
            root = _text(value_node, "root")
        else:
            raise SchemaError("SCHEMA_ERROR", f"unknown document key '{key}'",
                              span=_span(key_node), subject=key)
    if root is None:
        raise SchemaError("SCHEMA_ERROR", "document is missing 'root'")
    if root not in nodes:
        raise SchemaError("SCHEMA_ERROR", f"root '{root}' does not name a defined node",
                          subject=root)
    return Document(templates=templates, nodes=nodes, root=root)


def parse_templates(text: str) -> dict:
    """Parse a templates-only fragment (used for the builtin definitions)."""
    root_node = _compose(text, "templates")
    if root_node is None:
        raise ParseError("PARSE_ERROR", "templates document is empty")
    templates = {}
    for key, value_node, _ in _mapping_items(root_node, "templates document"):
        if key != "templates":
            raise SchemaError("SCHEMA_ERROR", f"unknown key '{key}' in templates document",
                              subject=key)
        templates = _parse_templates_map(value_node)
    return templates


def parse_scenario(text: str) -> Scenario:
    """Parse a scenario: optional memory seeds plus per-action result scripts."""
    root_node = _compose(text, "scenario")
    if root_node is None:
        return Scenario()
    memory = {}
    actions = {}
    for key, value_node, key_node in _mapping_items(root_node, "scenario"):
        if key == "memory":
            for mkey, mvalue, mkey_node in _mapping_items(value_node, "memory"):
                _check_name(mkey, "memory key", _span(mkey_node))
                memory[mkey] = _typed_scalar(mvalue, f"memory value for '{mkey}'")
        elif key == "actions":
            for aname, avalue, akey_node in _mapping_items(value_node, "actions"):
                _check_name(aname, "action name", _span(akey_node))
                states = []
                for entry in _text_list(avalue, f"results for '{aname}'"):
                    if entry not in RETURN_STATES:
                        raise SchemaError("UNKNOWN_STATE",
                                          f"'{entry}' is not a return state",
                                          span=_span(avalue), subject=aname)
                    states.append(RETURN_STATES[entry])
                if not states:
                    raise SchemaError("SCHEMA_ERROR",
                                      f"action '{aname}' needs at least one result",
                                      span=_span(avalue), subject=aname)
                actions[aname] = tuple(states)
        else:
            raise SchemaError("SCHEMA_ERROR", f"unknown scenario key '{key}'",
                              span=_span(key_node), subject=key)
    return Scenario(memory=memory, actions=actions)


# --- canonical writer ---------------------------------------------------

_PLAIN_NAME_RE = re.compile(r"[A-Za-z0-9_][A-Za-z0-9_/.\-]*")
_PLAIN_BLOCK_RE = re.compile(r"[A-Za-z0-9_][A-Za-z0-9_/.\-=!<>&|+*()' :]*")


def _quote(s):
    if any(ord(c) < 0x20 or c == "\x7f" for c in s):
        return json.dumps(s)
    return "'" + s.replace("'", "''") + "'"


def _block_scalar(s):
    if (_PLAIN_BLOCK_RE.fullmatch(s) and ": " not in s and " #" not in s
            and not s.endswith(":") and not s.endswith(" ")):
        return s
    return _quote(s)


def _flow_scalar(s):
    if _PLAIN_NAME_RE.fullmatch(s):
        return s
    return _quote(s)


def _flow_list(items):
    return "[" + ", ".join(_flow_scalar(i) for i in items) + "]"


def serialize_expanded(tree: ExpandedTree) -> str:
    """Canonical YAML form of an expanded tree.

    Nodes appear in depth-first pre-order from the root; per-node keys are
    in fixed order (type, if, then, else, script, result, children) with
    defaulted fields omitted. Two-space indent, LF endings, byte-identical
    across runs for equal trees.
    """
    diags = validate_expanded(tree)
    if diags:
        raise CanonicalizeError("CANONICALIZE_ERROR",
                                f"tree fails validation: {diags[0].code} on '{diags[0].node}'")
    index = tree.by_name()
    lines = [f"root: {_flow_scalar(tree.root)}", "nodes:"]
    for name in dfs_preorder(tree):
        nd = index[name]
        lines.append(f"  {_flow_scalar(name)}:")
        lines.append(f"    type: {_block_scalar(nd.type)}")
        if nd.type == "condition":
            if nd.if_ is None:
                raise CanonicalizeError("CANONICALIZE_ERROR",
                                        f"condition '{name}' has no 'if' expression")
            lines.append(f"    if: {_block_scalar(nd.if_)}")
            if nd.then != "SUCCESS":
                lines.append(f"    then: {_block_scalar(nd.then)}")
            if nd.else_ != "FAILURE":
                lines.append(f"    else: {_block_scalar(nd.else_)}")
        elif nd.type == "action":
            if nd.script:
                lines.append(f"    script: {_flow_list(nd.script)}")
            if nd.result != "SUCCESS":
                lines.append(f"    result: {_block_scalar(nd.result)}")
        if nd.children:
            lines.append(f"    children: {_flow_list(nd.children)}")
    return "\n".join(lines) + "\n"
