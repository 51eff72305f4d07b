import random
from pathlib import Path

import pytest

from gsncase.composer import (
    ArchTag,
    CaseArchive,
    CompositionError,
    CompositionLink,
    LinkKind,
    ManifestError,
    archive_from_graphs,
    check_architecture,
    compose,
    load_archive,
    merge_archives,
    module_links,
    parse_manifest,
)
from gsncase.dsl import parse
from gsncase.library import SAMPLES
from gsncase.model import ArgumentGraph, EdgeKind, Node, NodeKind, structurally_equal

from generators import random_gsn_module

SB = EdgeKind.SUPPORTED_BY
WILDFIRE = SAMPLES / "wildfire" / "case.manifest"


def mod(text: str) -> ArgumentGraph:
    doc, diags = parse(text)
    assert not diags
    return doc.modules[0]


def codes(diags) -> list[str]:
    return [d.code for d in diags]


A = mod('module a {\n  goal G "top"\n  awaygoal X "b holds" ref b::H\n  G -> X : supported_by\n  public G\n}')
B = mod('module b {\n  goal H "b holds"\n  solution E "evidence"\n  H -> E : supported_by\n  public H\n}')


def test_single_module_is_qualified_copy():
    g = random_gsn_module(random.Random(3), "solo")
    out = compose(archive_from_graphs([g]))
    assert out.ok and out.diagnostics == []
    assert out.graph.node_ids() == [f"solo::{n}" for n in g.node_ids()]
    assert sorted((e.source, e.target) for e in out.graph.edges) == sorted(
        (f"solo::{e.source}", f"solo::{e.target}") for e in g.edges
    )


def test_away_goal_is_replaced():
    out = compose(archive_from_graphs([A, B]))
    assert out.ok
    assert "a::X" not in out.graph
    assert out.graph.edge(("a::G", "b::H", SB)) is not None


def test_non_public_target_names_both_modules():
    hidden = B.replace(public_ids=())
    out = compose(archive_from_graphs([A, hidden]))
    (d,) = [d for d in out.diagnostics if d.is_error]
    assert d.code == "C002"
    assert "a::X" in d.message and "module b" in d.message


@pytest.mark.parametrize(
    "graphs, code",
    [
        ([A], "C001"),
        ([A, mod('module b {\n  goal Q "q"\n  public Q\n}')], "C005"),
        ([mod('module a {\n  goal G "g"\n  moduleref M "m" ref zzz\n  G -> M : supported_by\n}')], "C001"),
        (
            [
                mod('module a {\n  goal G "g"\n  moduleref M "m" ref b\n  G -> M : supported_by\n}'),
                mod('module b {\n  goal P "p"\n  goal Q "q"\n}'),
            ],
            "C006",
        ),
        (
            [
                mod(
                    'module a {\n  goal G "g"\n  context C "c"\n  G -> C : in_context_of\n'
                    "  acp P on (G -> C : in_context_of) confidence nowhere\n}"
                )
            ],
            "C004",
        ),
    ],
)
def test_composition_errors(graphs, code):
    out = compose(archive_from_graphs(graphs))
    assert code in codes(out.diagnostics)
    assert not out.ok


def test_moduleref_points_at_root():
    a = mod('module a {\n  goal G "g"\n  moduleref M "m" ref b\n  G -> M : supported_by\n}')
    out = compose(archive_from_graphs([a, B]))
    assert out.ok
    assert out.graph.edge(("a::G", "b::H", SB)) is not None
    assert "a::M" not in out.graph


def test_links_and_acps():
    archive = load_archive(WILDFIRE)
    out = compose(archive)
    assert out.ok, [d.render() for d in out.diagnostics]
    g = out.graph
    assert g.edge(("ethics::EA", "system::G0", SB)) is not None
    assert g.edge(("system::G10", "ml::G3.1", SB)) is not None
    assert {a.id for a in g.acps} == {"system::ACP1", "system::ACP2"}
    assert all(a.confidence_module in archive.modules for a in g.acps)


def test_every_non_reference_node_once():
    archive = load_archive(WILDFIRE)
    g = compose(archive).graph
    expected = sorted(
        f"{m}::{n.id}"
        for m, graph in archive.modules.items()
        for n in graph.nodes
        if not (n.kind is NodeKind.AWAY_GOAL or (n.kind is NodeKind.MODULE_REF and n.ref in archive.modules))
    )
    assert sorted(g.node_ids()) == expected


def test_composition_is_associative():
    archive = load_archive(WILDFIRE)
    names = archive.names()
    parts = [
        CaseArchive(
            {n: archive.modules[n] for n in chunk},
            tuple(l for l in archive.links if l.source_module in chunk),
            {n: archive.tag(n) for n in chunk},
        )
        for chunk in (names[:2], names[2:4], names[4:])
    ]
    left = merge_archives(merge_archives(parts[0], parts[1]), parts[2])
    right = merge_archives(parts[0], merge_archives(parts[1], parts[2]))
    assert structurally_equal(compose(left).graph, compose(right).graph)
    assert structurally_equal(compose(left).graph, compose(archive).graph)


def test_merge_conflict():
    other = B.replace(nodes=B.nodes[:1], edges=())
    with pytest.raises(CompositionError) as info:
        merge_archives(archive_from_graphs([B]), archive_from_graphs([other]))
    assert codes(info.value.diagnostics) == ["C003"]


def test_duplicate_edges_merge():
    link = CompositionLink("a::G", "b::H", LinkKind.SUPPORTED_BY)
    out = compose(archive_from_graphs([A, B], links=[link]))
    assert out.ok
    assert [(e.source, e.target) for e in out.graph.edges].count(("a::G", "b::H")) == 1


def test_wildfire_architecture():
    archive = load_archive(WILDFIRE)
    report = check_architecture(archive)
    assert report.shape_ok and report.findings == ()


def test_without_system_gives_a2():
    report = check_architecture(load_archive(WILDFIRE).without("system"))
    assert report.codes == ["A2"]


def test_second_ethics_module_gives_a1():
    archive = load_archive(WILDFIRE)
    twin = archive.modules["ethics"].replace(module_name="ethics2")
    doubled = CaseArchive(
        {**archive.modules, "ethics2": twin},
        archive.links + (CompositionLink("ethics2::EA", "system::G0", LinkKind.SUPPORTED_BY),),
        {**archive.tags, "ethics2": ArchTag.ETHICS},
    )
    assert check_architecture(doubled).codes == ["A1"]


def _shape(tags, links):
    graphs = [ArgumentGraph(n, (Node("R", NodeKind.GOAL, n),), public_ids=("R",)) for n in tags]
    return check_architecture(archive_from_graphs(graphs, tags, [CompositionLink(f"{a}::R", f"{b}::R", k) for a, b, k in links]))


E, S, P, G = ArchTag.ETHICS, ArchTag.SYSTEM, ArchTag.PURPOSE_SPECIFIC_MODEL, ArchTag.GENERAL_PURPOSE_MODEL
SBL, OPT = LinkKind.SUPPORTED_BY, LinkKind.OPTIONAL


@pytest.mark.parametrize(
    "tags, links, expect",
    [
        ({"e": E, "s": S, "p": P}, [("e", "s", SBL), ("s", "p", SBL)], []),
        ({"e": E, "s": S, "p": P, "g": G}, [("e", "s", SBL), ("s", "p", SBL), ("s", "g", SBL), ("p", "g", OPT)], []),
        ({"e": E, "s": S, "t": S, "g": G}, [("e", "s", SBL), ("e", "t", SBL), ("s", "g", SBL), ("t", "g", SBL)], []),
        ({"s": S, "p": P}, [("s", "p", SBL)], ["A1"]),
        ({"e": E, "p": P}, [], ["A2"]),
        ({"e": E, "s": S}, [("e", "s", SBL)], ["A3"]),
        ({"e": E, "s": S, "p": P, "g": G}, [("e", "s", SBL), ("s", "p", SBL), ("p", "g", SBL)], ["A4"]),
        ({"e": E, "s": S, "p": P}, [("e", "s", SBL), ("s", "p", OPT)], ["A4"]),
        ({"e": E, "s": S, "p": P}, [("e", "s", SBL), ("s", "p", SBL), ("s", "e", SBL)], ["A1"]),
    ],
)
def test_architecture_rules(tags, links, expect):
    assert sorted(_shape(tags, links).codes) == expect


def test_confidence_modules_are_ignored():
    report = _shape({"e": E, "s": S, "p": P, "c": ArchTag.CONFIDENCE}, [("e", "s", SBL), ("s", "p", SBL), ("c", "p", SBL)])
    assert report.shape_ok


def test_a5_missing_principle():
    ethics = mod(
        'module e {\n  moduleref EA "ethics"\n  moduleref J "justice"\n  moduleref B "beneficence"\n'
        "  EA -> J : supported_by\n  EA -> B : supported_by\n}"
    )
    tags = {"e": E, "s": S, "p": P}
    graphs = [ethics] + [ArgumentGraph(n, (Node("R", NodeKind.GOAL, n),), public_ids=("R",)) for n in ("s", "p")]
    links = [CompositionLink("e::EA", "s::R", SBL), CompositionLink("s::R", "p::R", SBL)]
    report = check_architecture(archive_from_graphs(graphs, tags, links))
    assert report.codes == ["A5"]
    assert "non-maleficence" in report.findings[0].message and "autonomy" in report.findings[0].message


def test_module_links_from_references():
    links = module_links(archive_from_graphs([A, B]))
    assert [(l.supported, l.supporter, l.optional) for l in links] == [("a", "b", False)]


def test_manifest_parse():
    text = 'module a = "a.gsn" tag ethics\nmodule b = "b.gsn"\nlink a::G -> b : optional\ntrace "t.trc"\n'
    entries, links, trace, diags = parse_manifest(text)
    assert diags == []
    assert [(n, p, t) for n, p, t, _ in entries] == [("a", "a.gsn", E), ("b", "b.gsn", ArchTag.OTHER)]
    assert links[0].kind is OPT and links[0].target == "b"
    assert trace == "t.trc"


@pytest.mark.parametrize(
    "text, code",
    [
        ('module a = "a.gsn" tag nope\n', "M001"),
        ("bogus\n", "M001"),
        ('module a = "missing.gsn"\n', "M002"),
        ('module zz = "a.gsn"\n', "M003"),
        ('module a = "a.gsn"\nmodule a = "a.gsn"\n', "M004"),
    ],
)
def test_manifest_errors(tmp_path: Path, text, code):
    (tmp_path / "a.gsn").write_text('module a {\n  goal G "g"\n}\n', encoding="utf-8")
    (tmp_path / "case.manifest").write_text(text, encoding="utf-8")
    with pytest.raises(ManifestError) as info:
        load_archive(tmp_path / "case.manifest")
    assert code in codes(info.value.diagnostics)


def test_manifest_reports_parse_errors(tmp_path: Path):
    (tmp_path / "a.gsn").write_text('module a {\n  goal G "g" $\n}\n', encoding="utf-8")
    (tmp_path / "case.manifest").write_text('module a = "a.gsn"\n', encoding="utf-8")
    with pytest.raises(ManifestError) as info:
        load_archive(tmp_path / "case.manifest")
    assert codes(info.value.diagnostics) == ["P001"]
