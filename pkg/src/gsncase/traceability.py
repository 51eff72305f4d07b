"""Hazard -> requirement -> ML requirement -> evidence chains.

Coverage rules:

* a hazard is *mitigated* when some requirement names it;
* an ML requirement is covered by at least one valid evidence item;
* a requirement is covered by valid direct evidence, or through a covered ML
  requirement derived from it;
* a hazard is *evidenced* when at least one of its mitigating requirements is
  covered.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from decimal import Decimal
from pathlib import Path
from typing import Iterable

from . import lexer
from .composer import CaseArchive, compose
from .diagnostics import Diagnostic, DiagnosticError, error, has_errors, sort_diagnostics, warning
from .lexer import IDENT, NUMBER, STRING, TokenStream
from .model import CONTEXT_KINDS, ArgumentGraph, EdgeKind, NodeKind, ancestors, split_qualified


class TraceError(DiagnosticError):
    pass


class UnknownEntityError(LookupError):
    pass


class KindMismatchError(ValueError):
    pass


class Direction(enum.Enum):
    AT_LEAST = "at_least"
    AT_MOST = "at_most"
    EQUAL = "equal"

    @property
    def symbol(self) -> str:
        return {"at_least": ">=", "at_most": "<=", "equal": "="}[self.value]


_OPS = {">=": Direction.AT_LEAST, "<=": Direction.AT_MOST, "=": Direction.EQUAL}


@dataclass(frozen=True)
class Quantity:
    name: str
    value: Decimal
    unit: str = ""
    direction: Direction = Direction.EQUAL

    def __str__(self) -> str:
        unit = f" {self.unit}" if self.unit else ""
        return f"{self.name}{self.direction.symbol}{self.value}{unit}"


@dataclass(frozen=True)
class Measurement:
    name: str
    value: Decimal
    unit: str = ""


@dataclass(frozen=True)
class Hazard:
    id: str
    description: str
    severity_note: str = ""


@dataclass(frozen=True)
class SafetyRequirement:
    id: str
    text: str
    mitigates: tuple[str, ...]
    quantities: tuple[Quantity, ...] = ()


@dataclass(frozen=True)
class MlSafetyRequirement:
    id: str
    text: str
    derived_from: tuple[str, ...]
    metric: Quantity | None = None


@dataclass(frozen=True)
class EvidenceItem:
    id: str
    kind: str
    supports: tuple[str, ...]
    measured: tuple[Measurement, ...] = ()
    valid: bool = True


@dataclass(frozen=True)
class TraceModel:
    hazards: tuple[Hazard, ...] = ()
    requirements: tuple[SafetyRequirement, ...] = ()
    ml_requirements: tuple[MlSafetyRequirement, ...] = ()
    evidence: tuple[EvidenceItem, ...] = ()
    gsn_bindings: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        diags = check_model(self)
        if has_errors(diags):
            raise TraceError(diags)

    def entity(self, entity_id: str):
        for group in (self.hazards, self.requirements, self.ml_requirements, self.evidence):
            for e in group:
                if e.id == entity_id:
                    return e
        raise UnknownEntityError(f"no trace entity {entity_id}")

    def evidence_item(self, evidence_id: str) -> EvidenceItem:
        for e in self.evidence:
            if e.id == evidence_id:
                return e
        raise UnknownEntityError(f"no evidence item {evidence_id}")

    def bindings(self) -> dict[str, str]:
        return dict(self.gsn_bindings)

    def invalidate(self, evidence_id: str) -> "TraceModel":
        self.evidence_item(evidence_id)
        items = tuple(replace(e, valid=False) if e.id == evidence_id else e for e in self.evidence)
        return replace(self, evidence=items)


def check_model(m: TraceModel) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    seen: set[str] = set()
    for group in (m.hazards, m.requirements, m.ml_requirements, m.evidence):
        for e in group:
            if e.id in seen:
                diags.append(error("T002", f"duplicate trace id {e.id}"))
            seen.add(e.id)
    hz = {h.id for h in m.hazards}
    rq = {r.id for r in m.requirements}
    ml = {x.id for x in m.ml_requirements}

    def refs(owner: str, field_name: str, ids, allowed: set[str]) -> None:
        if not ids:
            diags.append(error("T004", f"{owner} has an empty {field_name} list"))
        for i in ids:
            if i not in allowed:
                diags.append(error("T003", f"{owner} {field_name} {i}, which is not defined"))

    for r in m.requirements:
        refs(r.id, "mitigates", r.mitigates, hz)
    for x in m.ml_requirements:
        refs(x.id, "derives from", x.derived_from, rq)
    for ev in m.evidence:
        refs(ev.id, "supports", ev.supports, rq | ml)
    bound: set[str] = set()
    for entity, _node in m.gsn_bindings:
        if entity not in seen:
            diags.append(error("T003", f"binding names unknown entity {entity}"))
        if entity in bound:
            diags.append(error("T002", f"entity {entity} is bound twice"))
        bound.add(entity)
    return diags


# -- strict comparison ------------------------------------------------------------


def _comparable(q: Quantity, m: Measurement) -> tuple[Decimal, Decimal] | None:
    if q.unit == m.unit:
        return q.value, m.value
    # A percentage compares against a unitless fraction.
    if q.unit == "%" and not m.unit:
        return q.value / 100, m.value
    if m.unit == "%" and not q.unit:
        return q.value, m.value / 100
    return None


def meets(q: Quantity, m: Measurement) -> bool | None:
    """Whether ``m`` satisfies threshold ``q``; None if they are not comparable."""
    if q.name != m.name:
        return None
    pair = _comparable(q, m)
    if pair is None:
        return None
    target, actual = pair
    if q.direction is Direction.AT_LEAST:
        return actual >= target
    if q.direction is Direction.AT_MOST:
        return actual <= target
    return actual == target


def thresholds(entity) -> tuple[Quantity, ...]:
    if isinstance(entity, MlSafetyRequirement):
        return (entity.metric,) if entity.metric else ()
    if isinstance(entity, SafetyRequirement):
        return entity.quantities
    return ()


def evidence_satisfies(item: EvidenceItem, entity) -> bool:
    """Strict-mode acceptance: some threshold is met and none is violated."""
    limits = thresholds(entity)
    if not limits:
        return True
    verdicts = [meets(q, m) for q in limits for m in item.measured]
    verdicts = [v for v in verdicts if v is not None]
    return bool(verdicts) and all(verdicts)


# -- coverage ----------------------------------------------------------------------


@dataclass(frozen=True)
class LayerCount:
    covered: int
    total: int

    def __str__(self) -> str:
        return f"{self.covered}/{self.total}"


@dataclass(frozen=True)
class CoverageReport:
    hazards: LayerCount
    requirements: LayerCount
    ml_requirements: LayerCount
    evidenced_hazards: LayerCount
    unmitigated_hazards: tuple[str, ...] = ()
    uncovered_requirements: tuple[str, ...] = ()
    uncovered_ml_requirements: tuple[str, ...] = ()
    unevidenced_hazards: tuple[str, ...] = ()
    covered: frozenset[str] = field(default=frozenset(), repr=False)

    @property
    def fully_covered(self) -> bool:
        return not (
            self.unmitigated_hazards
            or self.uncovered_requirements
            or self.uncovered_ml_requirements
            or self.unevidenced_hazards
        )

    def to_json(self) -> dict:
        return {
            "hazards": {"covered": self.hazards.covered, "total": self.hazards.total},
            "requirements": {"covered": self.requirements.covered, "total": self.requirements.total},
            "ml_requirements": {"covered": self.ml_requirements.covered, "total": self.ml_requirements.total},
            "evidenced_hazards": {"covered": self.evidenced_hazards.covered, "total": self.evidenced_hazards.total},
            "unmitigated_hazards": list(self.unmitigated_hazards),
            "uncovered_requirements": list(self.uncovered_requirements),
            "uncovered_ml_requirements": list(self.uncovered_ml_requirements),
            "unevidenced_hazards": list(self.unevidenced_hazards),
            "fully_covered": self.fully_covered,
        }

    def render(self) -> str:
        lines = [
            f"hazards {self.hazards}, requirements {self.requirements}, "
            f"ml_requirements {self.ml_requirements}, evidenced_hazards {self.evidenced_hazards}"
        ]
        for label, ids in (
            ("unmitigated hazards", self.unmitigated_hazards),
            ("uncovered requirements", self.uncovered_requirements),
            ("uncovered ml_requirements", self.uncovered_ml_requirements),
            ("unevidenced hazards", self.unevidenced_hazards),
        ):
            if ids:
                lines.append(f"{label}: {', '.join(ids)}")
        lines.append(f"fully covered: {'yes' if self.fully_covered else 'no'}")
        return "\n".join(lines) + "\n"


def coverage(model: TraceModel, *, strict: bool = False) -> CoverageReport:
    def counts(item: EvidenceItem, entity) -> bool:
        return item.valid and (not strict or evidence_satisfies(item, entity))

    ml_ok = {
        x.id
        for x in model.ml_requirements
        if any(x.id in ev.supports and counts(ev, x) for ev in model.evidence)
    }
    req_ok = set()
    for r in model.requirements:
        direct = any(r.id in ev.supports and counts(ev, r) for ev in model.evidence)
        via = any(r.id in x.derived_from for x in model.ml_requirements if x.id in ml_ok)
        if direct or via:
            req_ok.add(r.id)
    mitigated = {h for r in model.requirements for h in r.mitigates}
    evidenced = {h for r in model.requirements if r.id in req_ok for h in r.mitigates}

    hz = [h.id for h in model.hazards]
    rq = [r.id for r in model.requirements]
    ml = [x.id for x in model.ml_requirements]
    return CoverageReport(
        LayerCount(sum(h in mitigated for h in hz), len(hz)),
        LayerCount(len(req_ok), len(rq)),
        LayerCount(len(ml_ok), len(ml)),
        LayerCount(sum(h in evidenced for h in hz), len(hz)),
        tuple(h for h in hz if h not in mitigated),
        tuple(r for r in rq if r not in req_ok),
        tuple(x for x in ml if x not in ml_ok),
        tuple(h for h in hz if h not in evidenced),
        frozenset(req_ok | ml_ok | (evidenced & set(hz))),
    )


# -- impact ------------------------------------------------------------------------


@dataclass(frozen=True)
class ImpactReport:
    invalidated: str
    affected_requirements: tuple[str, ...]
    affected_ml_requirements: tuple[str, ...]
    affected_hazards: tuple[str, ...]
    challenged_claims: tuple[str, ...]
    model: TraceModel = field(repr=False, compare=False)

    def to_json(self) -> dict:
        return {
            "invalidated": self.invalidated,
            "affected_requirements": list(self.affected_requirements),
            "affected_ml_requirements": list(self.affected_ml_requirements),
            "affected_hazards": list(self.affected_hazards),
            "challenged_claims": list(self.challenged_claims),
        }

    def render(self) -> str:
        rows = self.to_json()
        return "".join(
            f"{k.replace('_', ' ')}: {(', '.join(v) or '(none)') if isinstance(v, list) else v}\n"
            for k, v in rows.items()
        )


def claim_anchors(graph: ArgumentGraph, node_id: str) -> set[str]:
    """Nodes whose claims rest on ``node_id``: the node itself when it is a
    Goal, or the elements it is a context for when it is a context kind."""
    node = graph.get(node_id)
    if node is None:
        return set()
    if node.kind in CONTEXT_KINDS:
        return {e.source for e in graph.in_edges(node_id, EdgeKind.IN_CONTEXT_OF)}
    return {node_id} if node.kind is NodeKind.GOAL else set()


def challenged_claims(graph: ArgumentGraph, node_ids: Iterable[str]) -> set[str]:
    """Anchors of each bound node plus everything above them via SupportedBy."""
    out: set[str] = set()
    for nid in node_ids:
        if nid not in graph:
            continue
        for anchor in claim_anchors(graph, nid):
            out.add(anchor)
            out |= ancestors(graph, anchor)
        out |= ancestors(graph, nid)
    return out


def impact(
    model: TraceModel,
    archive: CaseArchive | ArgumentGraph | None,
    invalidated: str,
    *,
    strict: bool = False,
) -> ImpactReport:
    """Effect of marking evidence ``invalidated`` as no longer valid."""
    after = model.invalidate(invalidated)
    before_cov = coverage(model, strict=strict)
    after_cov = coverage(after, strict=strict)
    lost = before_cov.covered - after_cov.covered

    def ordered(items) -> tuple[str, ...]:
        return tuple(i.id for i in items if i.id in lost)

    reqs = ordered(model.requirements)
    mls = ordered(model.ml_requirements)
    hazards = ordered(model.hazards)

    claims: tuple[str, ...] = ()
    if archive is not None:
        graph = archive if isinstance(archive, ArgumentGraph) else compose(archive).graph
        bound = model.bindings()
        entities = [invalidated, *reqs, *mls, *hazards]
        nodes = [bound[e] for e in entities if e in bound]
        hit = challenged_claims(graph, nodes)
        claims = tuple(n for n in graph.node_ids() if n in hit)
    return ImpactReport(invalidated, reqs, mls, hazards, claims, after)


# -- binding to the argument ------------------------------------------------------------


_ALLOWED = {
    EvidenceItem: (NodeKind.SOLUTION,),
    Hazard: (NodeKind.GOAL, NodeKind.CONTEXT),
    SafetyRequirement: (NodeKind.GOAL, NodeKind.CONTEXT),
    MlSafetyRequirement: (NodeKind.GOAL, NodeKind.CONTEXT),
}


def check_binding(model: TraceModel, archive: CaseArchive, entity_id: str, node: str) -> None:
    entity = model.entity(entity_id)
    mod, local = split_qualified(node)
    graph = archive.modules.get(mod)
    if graph is None or not local or local not in graph:
        raise UnknownEntityError(f"binding target {node} does not exist")
    kind = graph.node(local).kind
    if kind not in _ALLOWED[type(entity)]:
        label = type(entity).__name__
        allowed = ", ".join(k.value for k in _ALLOWED[type(entity)])
        raise KindMismatchError(f"{label} {entity_id} cannot bind to {kind.value} {node} (allowed: {allowed})")


def link_to_case(model: TraceModel, archive: CaseArchive, bindings: Iterable[tuple[str, str]]) -> TraceModel:
    """Record ``(entity id, module::node)`` bindings after checking node kinds."""
    merged = dict(model.gsn_bindings)
    for entity_id, node in bindings:
        check_binding(model, archive, entity_id, node)
        merged[entity_id] = node
    return replace(model, gsn_bindings=tuple(merged.items()))


def check_bindings(model: TraceModel, archive: CaseArchive) -> list[Diagnostic]:
    diags = []
    for entity_id, node in model.gsn_bindings:
        try:
            check_binding(model, archive, entity_id, node)
        except (UnknownEntityError, KindMismatchError) as exc:
            diags.append(error("T006", str(exc)))
    return diags


# -- .trc reader -----------------------------------------------------------------------


_TRC_WORDS = {
    "hazard", "req", "mlreq", "evidence", "bind",
    "severity", "mitigates", "from", "metric", "supports", "qty", "measured", "invalid", "at_least", "at_most",
}
_HEADS = ("hazard", "req", "mlreq", "evidence", "bind")


def parse_trace(text: str, file: str = "<trace>") -> tuple[TraceModel, list[Diagnostic]]:
    """Parse ``.trc`` text; raises :class:`TraceError` on errors."""
    tokens, diags = lexer.tokenize(text, file, "T001")
    ts = TokenStream(tokens)
    hazards, reqs, mls, evidence, binds = [], [], [], [], []

    class _Bad(Exception):
        pass

    def fail(tok, msg):
        diags.append(error("T001", f"{msg}, found {tok}", tok.span(file)))
        raise _Bad

    def ident(what):
        tok = ts.next()
        if tok.kind != IDENT:
            fail(tok, f"expected {what}")
        return tok

    def string(what):
        tok = ts.next()
        if tok.kind != STRING:
            fail(tok, f"expected quoted {what}")
        return tok.value

    def id_list(what):
        ids = [ident(what).value]
        while ts.peek().is_symbol(","):
            ts.next()
            ids.append(ident(what).value)
        return tuple(ids)

    def unit(line: int) -> str:
        tok = ts.peek()
        if tok.line != line:
            return ""
        if tok.is_symbol("%"):
            ts.next()
            return "%"
        if tok.kind == STRING or (tok.kind == IDENT and tok.value not in _TRC_WORDS):
            ts.next()
            return tok.value
        return ""

    def quantity(ops) -> Quantity:
        name = ident("quantity name")
        op = ts.next()
        if op.is_word("at_least", "at_most"):
            direction = Direction(op.value)
        elif op.kind == lexer.SYMBOL and op.value in ops:
            direction = _OPS[op.value]
        else:
            fail(op, "expected " + " or ".join(ops))
        num = ts.next()
        if num.kind != NUMBER:
            fail(num, "expected a number")
        return Quantity(name.value, Decimal(num.value), unit(num.line), direction)

    while not ts.at_eof():
        head = ts.next()
        try:
            if head.is_word("hazard"):
                hid = ident("hazard id").value
                desc = string("description")
                note = ""
                if ts.peek().is_word("severity"):
                    ts.next()
                    note = string("severity note")
                hazards.append(Hazard(hid, desc, note))
            elif head.is_word("req"):
                rid_tok = ident("requirement id")
                text_ = string("requirement text")
                if not ts.next().is_word("mitigates"):
                    fail(ts.last, "expected 'mitigates'")
                hz = id_list("hazard id")
                qs = []
                while ts.peek().is_word("qty"):
                    ts.next()
                    q = quantity(("=", "<=", ">="))
                    if str(q.value) not in text_ and f"{q.value:f}" not in text_:
                        diags.append(
                            warning("T005", f"{rid_tok.value}: quantity {q.name} value {q.value} does not appear in the text", rid_tok.span(file))
                        )
                    qs.append(q)
                reqs.append(SafetyRequirement(rid_tok.value, text_, hz, tuple(qs)))
            elif head.is_word("mlreq"):
                mid = ident("ML requirement id").value
                text_ = string("ML requirement text")
                if not ts.next().is_word("from"):
                    fail(ts.last, "expected 'from'")
                src = id_list("requirement id")
                metric = None
                if ts.peek().is_word("metric"):
                    ts.next()
                    metric = quantity(("<=", ">="))
                mls.append(MlSafetyRequirement(mid, text_, src, metric))
            elif head.is_word("evidence"):
                eid = ident("evidence id").value
                kind = ident("evidence kind").value
                if not ts.next().is_word("supports"):
                    fail(ts.last, "expected 'supports'")
                sup = id_list("requirement id")
                measured = []
                valid = True
                while ts.peek().is_word("measured", "invalid"):
                    if ts.next().value == "invalid":
                        valid = False
                        continue
                    name = ident("measurement name")
                    if not ts.next().is_symbol("="):
                        fail(ts.last, "expected '='")
                    num = ts.next()
                    if num.kind != NUMBER:
                        fail(num, "expected a number")
                    measured.append(Measurement(name.value, Decimal(num.value), unit(num.line)))
                evidence.append(EvidenceItem(eid, kind, sup, tuple(measured), valid))
            elif head.is_word("bind"):
                ent = ident("entity id").value
                if not ts.next().is_symbol("->"):
                    fail(ts.last, "expected '->'")
                mod = ident("module name").value
                if not ts.next().is_symbol("::"):
                    fail(ts.last, "expected '::'")
                node = ident("node id").value
                binds.append((ent, f"{mod}::{node}"))
            else:
                fail(head, "expected " + ", ".join(_HEADS))
        except _Bad:
            while not ts.at_eof() and not ts.peek().is_word(*_HEADS):
                ts.next()
    if has_errors(diags):
        raise TraceError(sort_diagnostics(diags))
    try:
        model = TraceModel(tuple(hazards), tuple(reqs), tuple(mls), tuple(evidence), tuple(binds))
    except TraceError as exc:
        for d in exc.diagnostics:
            diags.append(replace(d, span=None))
        raise TraceError(sort_diagnostics(diags)) from None
    return model, sort_diagnostics(diags)


def load_trace(path) -> tuple[TraceModel, list[Diagnostic]]:
    p = Path(path)
    return parse_trace(p.read_bytes().decode("utf-8"), str(path))


__all__ = [
    "CoverageReport",
    "Direction",
    "EvidenceItem",
    "Hazard",
    "ImpactReport",
    "KindMismatchError",
    "LayerCount",
    "Measurement",
    "MlSafetyRequirement",
    "Quantity",
    "SafetyRequirement",
    "TraceError",
    "TraceModel",
    "UnknownEntityError",
    "challenged_claims",
    "check_bindings",
    "coverage",
    "evidence_satisfies",
    "impact",
    "link_to_case",
    "load_trace",
    "meets",
    "parse_trace",
]
