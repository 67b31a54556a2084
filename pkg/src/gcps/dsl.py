"""Line-oriented text format for GCPS models, plus the JSON format for ODE systems.

Model files hold one declaration per line; ``#`` starts a comment::

    @name Lotka-Volterra
    @alphabet tok
    @env tok
    @cells 2 prey=1 pred=2
    @output 1
    @init prey: tok=1000
    rule r1: (tok,0)(tok,prey) -> (tok,prey)(tok,prey) @ 0.5

Cells are referenced by index or by a label declared in ``@cells``. The rule
constant defaults to 1.0.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .model import (
    ENVIRONMENT,
    IDENT,
    Configuration,
    GcpsModel,
    ModelError,
    Rule,
    validate_model,
)
from .odelimit import OdeSystem

_ID = r"[A-Za-z_][A-Za-z0-9_\-]*"
_REF = r"[A-Za-z0-9_\-]+"
_SLOT = rf"\(\s*({_ID})\s*,\s*({_REF})\s*\)"
_RULE = re.compile(
    rf"rule\s+(?:({_ID})\s*:\s*)?{_SLOT}\s*{_SLOT}\s*->\s*{_SLOT}\s*{_SLOT}"
    r"\s*(?:@\s*(\S+))?\s*$")
_INIT = re.compile(rf"@init\s+({_REF})\s*:\s*(.*)$")
_PAIR = re.compile(rf"({_ID})\s*=\s*(\S+)")
_LABEL = re.compile(rf"({_ID})=(\d+)")
_DIRECTIVES = ("@name", "@description", "@alphabet", "@env", "@cells", "@output", "@init")


class ParseError(ModelError):
    def __init__(self, line: int, column: int, message: str):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
        self.message = message


@dataclass
class _Line:
    number: int
    text: str      # comment-stripped, with original leading whitespace removed
    offset: int    # 0-based column where ``text`` starts

    def err(self, message: str, at: int = 0) -> ParseError:
        return ParseError(self.number, self.offset + at + 1, message)


def _lines(text: str) -> list[_Line]:
    out = []
    for number, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.lstrip()
        offset = len(raw) - len(stripped)
        if stripped.startswith(("@name", "@description")):
            body = stripped.rstrip()
        else:
            body = stripped.split("#", 1)[0].rstrip()
        if body:
            out.append(_Line(number, body, offset))
    return out


def _single(lines: list[_Line], key: str) -> _Line | None:
    found = [ln for ln in lines if ln.text.split(None, 1)[0] == key]
    if len(found) > 1:
        raise found[1].err(f"duplicate {key} declaration")
    return found[0] if found else None


def parse_model(text: str) -> GcpsModel:
    """Parse a model document; the result is validated and its initial configuration is ``.initial``."""
    lines = _lines(text)
    for ln in lines:
        head = ln.text.split(None, 1)[0]
        if head.startswith("@") and head not in _DIRECTIVES:
            raise ln.err(f"unknown directive {head}")
        if not head.startswith("@") and head != "rule":
            raise ln.err(f"expected a directive or a rule, found {head!r}")

    def rest(ln: _Line) -> str:
        parts = ln.text.split(None, 1)
        return parts[1].strip() if len(parts) > 1 else ""

    name_ln = _single(lines, "@name")
    desc_ln = _single(lines, "@description")
    alpha_ln = _single(lines, "@alphabet")
    env_ln = _single(lines, "@env")
    cells_ln = _single(lines, "@cells")
    out_ln = _single(lines, "@output")
    if alpha_ln is None:
        raise ParseError(lines[0].number if lines else 1, 1, "missing @alphabet declaration")
    if cells_ln is None:
        raise ParseError(alpha_ln.number, 1, "missing @cells declaration")

    alphabet = rest(alpha_ln).split()
    if not alphabet:
        raise alpha_ln.err("@alphabet needs at least one object")
    for obj in alphabet:
        if not IDENT.fullmatch(obj):
            raise alpha_ln.err(f"bad object name {obj!r}", alpha_ln.text.find(obj))
    if len(set(alphabet)) != len(alphabet):
        raise alpha_ln.err("duplicate object in @alphabet")
    env = rest(env_ln).split() if env_ln else []
    for obj in env:
        if obj not in alphabet:
            raise env_ln.err(f"undeclared object {obj!r}", env_ln.text.find(obj))

    cell_parts = rest(cells_ln).split()
    if not cell_parts or not cell_parts[0].isdigit() or int(cell_parts[0]) < 1:
        raise cells_ln.err("@cells needs a positive cell count")
    n_cells = int(cell_parts[0])
    labels: dict[str, int] = {}
    for part in cell_parts[1:]:
        m = _LABEL.fullmatch(part)
        col = cells_ln.text.find(part)
        if not m:
            raise cells_ln.err(f"bad cell label {part!r} (expected label=index)", col)
        label, index = m.group(1), int(m.group(2))
        if index > n_cells:
            raise cells_ln.err(f"label {label!r} refers to cell {index} > {n_cells}", col)
        if label in labels or index in labels.values():
            raise cells_ln.err(f"duplicate label or index in {part!r}", col)
        labels[label] = index

    def cell(ref: str, ln: _Line, allow_env: bool = True) -> int:
        at = ln.text.find(ref)
        if ref.isdigit():
            q = int(ref)
            if q > n_cells:
                raise ln.err(f"cell {q} outside 0..{n_cells}", at)
        elif ref in labels:
            q = labels[ref]
        else:
            raise ln.err(f"undeclared cell label {ref!r}", at)
        if q == ENVIRONMENT and not allow_env:
            raise ln.err("the environment cannot be initialised", at)
        return q

    output = 1
    if out_ln is not None:
        output = cell(rest(out_ln), out_ln)

    initial: list[dict[str, int]] = [{} for _ in range(n_cells)]
    rules: list[Rule] = []
    rule_lines: list[_Line] = []
    for ln in lines:
        if ln.text.startswith("@init"):
            m = _INIT.match(ln.text)
            if not m:
                raise ln.err("expected '@init <cell>: <obj>=<count> ...'")
            q = cell(m.group(1), ln, allow_env=False)
            body = m.group(2)
            pos = m.start(2)
            for item in body.split():
                pm = _PAIR.fullmatch(item)
                at = pos + body.find(item)
                if not pm:
                    raise ln.err(f"bad multiplicity {item!r} (expected obj=count)", at)
                obj, count = pm.groups()
                if obj not in alphabet:
                    raise ln.err(f"undeclared object {obj!r}", at)
                if not count.isdigit():
                    raise ln.err(f"count must be a non-negative integer, got {count!r}", at)
                if obj in initial[q - 1]:
                    raise ln.err(f"object {obj!r} initialised twice in cell {q}", at)
                initial[q - 1][obj] = int(count)
        elif ln.text.startswith("rule"):
            m = _RULE.match(ln.text)
            if not m:
                raise ln.err("expected 'rule [id:] (a,i)(b,j) -> (a,k)(b,l) [@ c]'")
            label, a, i, b, j, a2, k, b2, l, const = m.groups()  # noqa: E741
            for obj, g in ((a, 2), (b, 4), (a2, 6), (b2, 8)):
                if obj not in alphabet:
                    raise ln.err(f"undeclared object {obj!r}", m.start(g))
            if a2 != a or b2 != b:
                raise ln.err("objects must keep their identity: right-hand side must read "
                             f"({a},.)({b},.)", m.start(6))
            constant = 1.0
            if const is not None:
                try:
                    constant = float(const)
                except ValueError:
                    raise ln.err(f"bad rule constant {const!r}", m.start(10)) from None
            rules.append(Rule(a, cell(i, ln), cell(k, ln), b, cell(j, ln), cell(l, ln),
                              constant, label))
            rule_lines.append(ln)

    model = GcpsModel(
        alphabet=tuple(alphabet),
        env_objects=frozenset(env),
        n_cells=n_cells,
        initial=Configuration.from_counts(initial),
        rules=tuple(rules),
        output_cell=output,
        name=rest(name_ln) or None if name_ln else None,
        description=rest(desc_ln) or None if desc_ln else None,
        cell_labels=tuple(sorted((q, lab) for lab, q in labels.items())),
    )
    for v in validate_model(model):
        if v.rule is not None:
            raise rule_lines[v.rule].err(v.reason)
        where = out_ln if (out_ln and "output" in v.reason) else cells_ln
        raise where.err(v.reason)
    return model


def serialize_model(m: GcpsModel, init: Configuration | None = None) -> str:
    """Canonical text for ``m``; ``init`` replaces the model's initial configuration.

    Rules keep their order, since trajectories refer to them by index.
    """
    init = m.initial if init is None else init
    labels = dict(m.cell_labels)

    def ref(q: int) -> str:
        return labels.get(q, str(q))

    out = []
    if m.name:
        out.append(f"@name {m.name}")
    if m.description:
        out.append(f"@description {m.description}")
    out.append("@alphabet " + " ".join(m.alphabet))
    env = [o for o in m.alphabet if o in m.env_objects]
    out.append("@env" + "".join(" " + o for o in env))
    out.append(f"@cells {m.n_cells}" + "".join(f" {lab}={q}" for q, lab in sorted(labels.items())))
    out.append(f"@output {ref(m.output_cell)}")
    if init.env_finite:
        raise ModelError("the text format cannot express a non-empty environment")
    for q, ms in enumerate(init.cells, start=1):
        if ms:
            out.append(f"@init {ref(q)}: " + " ".join(f"{o}={n}" for o, n in ms))
    for r in m.rules:
        head = f"rule {r.label}: " if r.label else "rule "
        out.append(f"{head}({r.a},{ref(r.i)})({r.b},{ref(r.j)}) -> "
                   f"({r.a},{ref(r.k)})({r.b},{ref(r.l)}) @ {float(r.constant)!r}")
    return "\n".join(out) + "\n"


def _entry_line(text: str, entry: object) -> int:
    for m in re.finditer(r"\{[^{}]*\}", text):
        try:
            if json.loads(m.group(0)) == entry:
                return text.count("\n", 0, m.start()) + 1
        except ValueError:
            continue
    return 1


def parse_ode_system(text: str) -> OdeSystem:
    """Parse ``{"n": N, "a": [{i,j,k,value}], "b": [{i,j,value}], "linear": [{i,j,value}]}``.

    Indices are 1-based; ``a`` and ``b`` must be non-negative. ``linear``
    is optional and holds environment-induced first-order terms.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.lineno, exc.colno, exc.msg) from None
    if not isinstance(doc, dict):
        raise ParseError(1, 1, "ODE system must be a JSON object")
    n = doc.get("n")
    if not isinstance(n, int) or isinstance(n, bool) or n < 0:
        raise ParseError(_entry_line(text, doc), 1, "field 'n' must be a non-negative integer")
    unknown = set(doc) - {"n", "a", "b", "linear"}
    if unknown:
        raise ParseError(1, 1, f"unknown fields {sorted(unknown)}")

    def collect(key: str, idx: tuple[str, ...], non_negative: bool) -> dict:
        out: dict = {}
        entries = doc.get(key, [])
        if not isinstance(entries, list):
            raise ParseError(1, 1, f"field {key!r} must be a list")
        for e in entries:
            line = _entry_line(text, e)
            if not isinstance(e, dict) or set(e) != set(idx) | {"value"}:
                raise ParseError(line, 1, f"{key} entries need fields {list(idx) + ['value']}")
            ids = tuple(e[x] for x in idx)
            if not all(isinstance(x, int) and not isinstance(x, bool) and 1 <= x <= n
                       for x in ids):
                raise ParseError(line, 1, f"{key} index {ids} outside 1..{n}")
            v = e["value"]
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ParseError(line, 1, f"{key} value must be a number")
            if non_negative and v < 0:
                raise ParseError(line, 1, f"condition 1 violated: {key}{ids} = {v} < 0")
            if ids in out:
                raise ParseError(line, 1, f"duplicate {key} entry {ids}")
            out[ids] = float(v)
        return out

    return OdeSystem(n, collect("a", ("i", "j", "k"), True), collect("b", ("i", "j"), True),
                     collect("linear", ("i", "j"), False))


def serialize_ode_system(s: OdeSystem) -> str:
    doc: dict = {
        "n": s.n_vars,
        "a": [{"i": i, "j": j, "k": k, "value": v} for (i, j, k), v in s.a_coeffs.items()],
        "b": [{"i": i, "j": j, "value": v} for (i, j), v in s.b_coeffs.items()],
    }
    if s.linear_terms:
        doc["linear"] = [{"i": i, "j": j, "value": v} for (i, j), v in s.linear_terms.items()]
    return json.dumps(doc, indent=1) + "\n"
