import random

import pytest

from gsncase.diagnostics import Severity
from gsncase.dsl import parse
from gsncase.model import ArgumentGraph, Edge, EdgeKind, Node, NodeKind
from gsncase.validator import CONSEQUENTIAL_CODES, RULES, check_acyclic, validate, validate_graph

from generators import brute_force_cycles
from mutants import consequential_mutants, single_rule_mutants, system

SB = EdgeKind.SUPPORTED_BY
IC = EdgeKind.IN_CONTEXT_OF


def graph(text: str) -> ArgumentGraph:
    doc, diags = parse(text)
    assert not diags
    return doc.modules[0]


def codes(g) -> list[str]:
    return [d.code for d in validate_graph(g)]


def test_rule_table_complete():
    assert sorted(RULES) == [f"V{i:03d}" for i in range(1, 13)]


def test_system_pattern_is_clean():
    assert validate_graph(system()) == []


def test_solution_supporting_goal():
    g = graph('module m {\n  goal G "g"\n  solution Sn "s"\n  goal H "h"\n  G -> Sn : supported_by\n  Sn -> H : supported_by\n}')
    assert codes(g) == ["V005"]


@pytest.mark.parametrize("rule", sorted(RULES))
def test_single_rule_mutant(rule):
    found = validate_graph(single_rule_mutants(system())[rule])
    assert [d.code for d in found].count(rule) == 1
    assert {d.code for d in found} - {rule} <= CONSEQUENTIAL_CODES.get(rule, frozenset())


@pytest.mark.parametrize("rule", sorted(CONSEQUENTIAL_CODES))
def test_consequential_pairs(rule):
    found = {d.code for d in validate_graph(consequential_mutants(system())[rule])}
    assert found == {rule} | CONSEQUENTIAL_CODES[rule]


def test_cycle_through_root_is_error_then_warning_for_extra_roots():
    g = consequential_mutants(system())["V012"]
    v011 = [d for d in validate_graph(g) if d.code == "V011"]
    assert [d.severity for d in v011] == [Severity.WARNING]


def test_multiple_roots_are_a_warning():
    g = graph('module m {\n  goal A "a"\n  goal B "b"\n}')
    (d,) = validate_graph(g)
    assert (d.code, d.severity) == ("V011", Severity.WARNING)


def test_empty_module_is_clean():
    assert validate_graph(ArgumentGraph("m")) == []


def test_cross_module_targets_are_warnings():
    g = graph('module m {\n  goal A "a"\n  A -> other::G : supported_by\n  A -> other::C : in_context_of\n}')
    found = validate_graph(g)
    assert [(d.code, d.severity) for d in found] == [("V002", Severity.WARNING), ("V003", Severity.WARNING)]


def test_undeveloped_and_uninstantiated_may_coexist():
    g = graph('pattern m {\n  goal A "{X} holds" undeveloped uninstantiated\n}')
    assert validate_graph(g) == []


def test_moduleref_may_be_uninstantiated_without_placeholder():
    g = graph('pattern m {\n  goal A "a"\n  moduleref M "m" uninstantiated\n  A -> M : supported_by\n}')
    assert validate_graph(g) == []


def test_moduleref_heads_a_module_view():
    g = graph('pattern m {\n  moduleref M "top" ref x\n  moduleref N "sub" ref y\n  M -> N : supported_by\n}')
    assert validate_graph(g) == []


@pytest.mark.parametrize(
    "group, expect",
    [("choice g at A pick 1..2", []), ("choice g at A pick 1..3", ["V009"]), ("choice g at A pick 3..3", ["V009"])],
)
def test_choice_cardinality(group, expect):
    text = (
        'pattern m {\n  goal A "a"\n  goal B "b"\n  goal C "c"\n'
        f"  A -> B : supported_by choice g\n  A -> C : supported_by choice g\n  {group}\n}}"
    )
    assert codes(graph(text)) == expect


def test_undeclared_choice_group():
    g = graph('pattern m {\n  goal A "a"\n  goal B "b"\n  A -> B : supported_by choice nope\n}')
    assert codes(g) == ["V009"]


def test_diagnostics_are_deterministic_and_ordered():
    g = single_rule_mutants(system())["V005"]
    first = validate_graph(g)
    assert first == validate_graph(g)
    keys = [d.sort_key() for d in first]
    assert keys == sorted(keys)


def test_validate_document():
    doc, _ = parse('module a {\n  goal A "a"\n}\nmodule b {\n  strategy S "s"\n}\n')
    assert [d.code for d in validate(doc)] == ["V011", "V012"]


def test_spans_point_at_the_culprit():
    text = 'module m {\n  goal G "g"\n  solution Sn "s"\n  goal H "h"\n  G -> Sn : supported_by\n  Sn -> H : supported_by\n}'
    doc, _ = parse(text, "x.gsn")
    (d,) = validate(doc)
    assert d.span.slice(text).startswith("Sn -> H")


def test_check_acyclic_examples():
    assert check_acyclic(system()) == []
    g = ArgumentGraph("m", (Node("A", NodeKind.GOAL, ""), Node("B", NodeKind.GOAL, "")), (Edge("A", "B", SB), Edge("B", "A", SB)))
    assert check_acyclic(g) == [["A", "B", "A"]]


@pytest.mark.parametrize("seed", range(40))
def test_injected_back_edge_gives_one_cycle(seed):
    rng = random.Random(seed)
    n = rng.randint(2, 20)
    ids = [f"N{i}" for i in range(n)]
    edges = {(f"N{rng.randrange(i)}", f"N{i}") for i in range(1, n)}
    for _ in range(rng.randint(0, n)):
        a, b = sorted(rng.sample(range(n), 2))
        edges.add((f"N{a}", f"N{b}"))
    # back edge from a descendant to an ancestor on a tree path
    child = rng.randrange(1, n)
    path = [child]
    parent = {b: a for a, b in sorted(edges) if int(a[1:]) < int(b[1:])}
    while f"N{path[-1]}" in parent and path[-1] != 0:
        path.append(int(parent[f"N{path[-1]}"][1:]))
    top = path[-1] if len(path) > 1 else None
    if top is None:
        return
    back = (f"N{child}", f"N{top}")
    edges.add(back)
    g = ArgumentGraph(
        "m", tuple(Node(i, NodeKind.GOAL, "") for i in ids), tuple(Edge(a, b, SB) for a, b in sorted(edges))
    )
    oracle = brute_force_cycles(g)
    assert oracle and all(back in c for c in oracle)
    (cycle,) = check_acyclic(g)
    pairs = frozenset(zip(cycle, cycle[1:]))
    assert pairs in oracle
    assert len(cycle) - 1 == min(len(c) for c in oracle)
    assert len(set(cycle[:-1])) == len(cycle) - 1


@pytest.mark.parametrize("seed", range(30))
def test_check_acyclic_agrees_with_brute_force(seed):
    rng = random.Random(1000 + seed)
    n = rng.randint(1, 12)
    ids = [f"N{i}" for i in range(n)]
    edges = set()
    for _ in range(rng.randint(0, 2 * n)):
        if n > 1:
            edges.add(tuple(rng.sample(ids, 2)))
    g = ArgumentGraph("m", tuple(Node(i, NodeKind.GOAL, "") for i in ids), tuple(Edge(a, b, SB) for a, b in sorted(edges)))
    oracle = brute_force_cycles(g)
    found = check_acyclic(g)
    assert bool(found) == bool(oracle)
    for cycle in found:
        assert frozenset(zip(cycle, cycle[1:])) in oracle
