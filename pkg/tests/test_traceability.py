import random
from decimal import Decimal

import pytest

from gsncase.composer import archive_from_graphs, load_archive
from gsncase.library import SAMPLES
from gsncase.model import ArgumentGraph, Edge, EdgeKind, Node, NodeKind
from gsncase.traceability import (
    Direction,
    EvidenceItem,
    Hazard,
    KindMismatchError,
    Measurement,
    MlSafetyRequirement,
    Quantity,
    SafetyRequirement,
    TraceError,
    TraceModel,
    UnknownEntityError,
    challenged_claims,
    check_bindings,
    coverage,
    evidence_satisfies,
    impact,
    link_to_case,
    load_trace,
    meets,
    parse_trace,
)

from generators import composed, coverage_oracle, impact_oracle, random_gsn_module, random_trace_model

WILDFIRE = SAMPLES / "wildfire"
SEPSIS = SAMPLES / "sepsis"


def wildfire():
    model, warnings = load_trace(WILDFIRE / "wildfire.trc")
    assert warnings == []
    return model


def sepsis():
    model, warnings = load_trace(SEPSIS / "sepsis.trc")
    assert warnings == []
    return model


def test_wildfire_quantities_are_structured():
    got = {r.id: [(q.name, q.direction, q.value, q.unit) for q in r.quantities] for r in wildfire().requirements}
    assert got == {
        "REQ-SAFE-ER-1": [("location_error", Direction.AT_MOST, Decimal(200), "m")],
        "REQ-SAFE-ER-2": [("alert_delay", Direction.AT_MOST, Decimal(3), "h")],
        "REQ-SAFE-ER-3": [("detection_rate", Direction.AT_LEAST, Decimal(95), "%")],
        "REQ-SAFE-ER-4": [("false_alarm_rate", Direction.AT_MOST, Decimal(52), "per month")],
    }


def test_wildfire_full_coverage():
    report = coverage(wildfire())
    assert (str(report.hazards), str(report.requirements)) == ("2/2", "4/4")
    assert report.fully_covered
    assert report.render().splitlines()[0] == "hazards 2/2, requirements 4/4, ml_requirements 0/0, evidenced_hazards 2/2"


def test_sole_evidence_invalidated():
    r = impact(wildfire(), None, "EV-ER2")
    assert r.affected_requirements == ("REQ-SAFE-ER-2",)
    assert r.affected_hazards == ()
    after = coverage(r.model)
    assert "H1" not in after.unevidenced_hazards
    assert after.uncovered_requirements == ("REQ-SAFE-ER-2",)


def test_invalid_er4_evidence():
    report = coverage(wildfire().invalidate("EV-ER4"))
    assert str(report.requirements) == "3/4"
    assert report.unevidenced_hazards == ("H2",)
    assert not report.fully_covered


def test_empty_model_is_vacuously_covered():
    report = coverage(TraceModel())
    assert report.fully_covered
    assert all(str(c) == "0/0" for c in (report.hazards, report.requirements, report.ml_requirements))


def test_redundant_evidence():
    m = TraceModel(
        (Hazard("H", "h"),),
        (SafetyRequirement("R", "r", ("H",)),),
        (),
        (EvidenceItem("E1", "t", ("R",)), EvidenceItem("E2", "t", ("R",))),
    )
    r = impact(m, None, "E1")
    assert (r.affected_requirements, r.affected_hazards) == ((), ())


def test_ml_requirement_propagates():
    m = TraceModel(
        (Hazard("H", "h"),),
        (SafetyRequirement("R", "r", ("H",)),),
        (MlSafetyRequirement("M", "m", ("R",)),),
        (EvidenceItem("E", "t", ("M",)),),
    )
    assert coverage(m).fully_covered
    r = impact(m, None, "E")
    assert (r.affected_requirements, r.affected_ml_requirements, r.affected_hazards) == (("R",), ("M",), ("H",))


def test_impact_is_pure():
    m = wildfire()
    impact(m, None, "EV-ER1")
    assert all(e.valid for e in m.evidence)


def test_unknown_evidence():
    with pytest.raises(UnknownEntityError):
        impact(wildfire(), None, "EV-NOPE")


def test_wildfire_challenged_claims():
    archive = load_archive(WILDFIRE / "case.manifest")
    r = impact(wildfire(), archive, "EV-ER2")
    assert r.challenged_claims == (
        "ethics::EA",
        "system::G0",
        "system::S1",
        "system::G1",
        "system::G3",
        "system::G9",
    )


@pytest.mark.parametrize(
    "qty, value, unit, verdict",
    [
        (Quantity("x", Decimal(10), "%", Direction.AT_MOST), Decimal(8), "%", True),
        (Quantity("x", Decimal(10), "%", Direction.AT_MOST), Decimal(35), "%", False),
        (Quantity("x", Decimal(10), "%", Direction.AT_MOST), Decimal("0.08"), "", True),
        (Quantity("x", Decimal(95), "%", Direction.AT_LEAST), Decimal(95), "%", True),
        (Quantity("x", Decimal(3), "h", Direction.EQUAL), Decimal(3), "h", True),
        (Quantity("x", Decimal(3), "h", Direction.AT_MOST), Decimal(3), "min", None),
    ],
)
def test_meets(qty, value, unit, verdict):
    assert meets(qty, Measurement("x", value, unit)) is verdict


def test_meets_requires_matching_name():
    assert meets(Quantity("x", Decimal(1)), Measurement("y", Decimal(1))) is None


def test_sepsis_measurements():
    m = sepsis()
    measured = {e.id: {x.name: (x.value, x.unit) for x in e.measured} for e in m.evidence}
    pct = lambda v: (Decimal(v), "%")  # noqa: E731
    assert measured == {
        "EV-CLIN": {"small_medium_dose_change": pct(97), "large_dose_change": pct(3)},
        "EV-ORIG": {"small_medium_dose_change": pct(65), "large_dose_change": pct(35)},
        "EV-MOD": {"small_medium_dose_change": pct(92), "large_dose_change": pct(8)},
    }


@pytest.mark.parametrize("small, large, name", [(2100, 60, "EV-CLIN"), (1404, 756, "EV-ORIG"), (1990, 170, "EV-MOD")])
def test_sepsis_percentages_follow_from_counts(small, large, name):
    item = sepsis().evidence_item(name)
    values = {x.name: x.value for x in item.measured}
    total = small + large
    assert values["small_medium_dose_change"] == round(Decimal(100 * small) / total)
    assert values["large_dose_change"] == round(Decimal(100 * large) / total)


def test_sepsis_strict_mode():
    m = sepsis()
    metric = m.ml_requirements[0]
    assert metric.metric == Quantity("large_dose_change", Decimal(10), "%", Direction.AT_MOST)
    verdicts = {e.id: evidence_satisfies(e, metric) for e in m.evidence}
    assert verdicts == {"EV-CLIN": True, "EV-ORIG": False, "EV-MOD": True}


def test_strict_coverage_drops_failing_evidence():
    m = sepsis()
    only_orig = TraceModel(m.hazards, m.requirements, m.ml_requirements, (m.evidence_item("EV-ORIG"),))
    assert coverage(only_orig).fully_covered
    assert not coverage(only_orig, strict=True).fully_covered
    only_mod = TraceModel(m.hazards, m.requirements, m.ml_requirements, (m.evidence_item("EV-MOD"),))
    assert coverage(only_mod, strict=True).fully_covered


@pytest.mark.parametrize(
    "kwargs, code",
    [
        ({"hazards": (Hazard("H", "a"), Hazard("H", "b"))}, "T002"),
        ({"requirements": (SafetyRequirement("R", "r", ("H9",)),)}, "T003"),
        ({"hazards": (Hazard("H", "h"),), "requirements": (SafetyRequirement("R", "r", ()),)}, "T004"),
        ({"gsn_bindings": (("X", "m::N"),)}, "T003"),
    ],
)
def test_model_checks(kwargs, code):
    with pytest.raises(TraceError) as info:
        TraceModel(**kwargs)
    assert code in [d.code for d in info.value.diagnostics]


def _case():
    g = ArgumentGraph(
        "system",
        (
            Node("G", NodeKind.GOAL, "g"),
            Node("S", NodeKind.STRATEGY, "s"),
            Node("Sn", NodeKind.SOLUTION, "sn"),
            Node("C", NodeKind.CONTEXT, "c"),
            Node("G2", NodeKind.GOAL, "g2"),
        ),
        (
            Edge("G", "S", EdgeKind.SUPPORTED_BY),
            Edge("S", "G2", EdgeKind.SUPPORTED_BY),
            Edge("G2", "Sn", EdgeKind.SUPPORTED_BY),
            Edge("G2", "C", EdgeKind.IN_CONTEXT_OF),
        ),
    )
    model = TraceModel(
        (Hazard("H", "h"),),
        (SafetyRequirement("R", "r", ("H",)),),
        (),
        (EvidenceItem("E", "t", ("R",)),),
    )
    return model, archive_from_graphs([g])


@pytest.mark.parametrize(
    "entity, node, error",
    [
        ("R", "system::C", None),
        ("E", "system::Sn", None),
        ("H", "system::G2", None),
        ("H", "system::Sn", KindMismatchError),
        ("E", "system::S", KindMismatchError),
        ("R", "system::S", KindMismatchError),
        ("R", "system::Nope", UnknownEntityError),
        ("Nope", "system::G", UnknownEntityError),
    ],
)
def test_link_to_case(entity, node, error):
    model, archive = _case()
    if error is None:
        assert link_to_case(model, archive, [(entity, node)]).bindings()[entity] == node
    else:
        with pytest.raises(error):
            link_to_case(model, archive, [(entity, node)])


def test_check_bindings_reports_t006():
    model, archive = _case()
    bad = TraceModel(model.hazards, model.requirements, (), model.evidence, (("E", "system::G"),))
    assert [d.code for d in check_bindings(bad, archive)] == ["T006"]


def test_challenged_claims_from_context():
    model, archive = _case()
    g = archive.modules["system"]
    assert challenged_claims(g, ["C"]) == {"G2", "S", "G"}
    assert challenged_claims(g, ["Sn"]) == {"G2", "S", "G"}
    assert challenged_claims(g, ["G"]) == {"G"}


def test_trace_parse_errors():
    with pytest.raises(TraceError) as info:
        parse_trace('hazard H1 "x"\nreq R "r" mitigates H9\n', "t.trc")
    assert info.value.diagnostics[0].code == "T003"
    with pytest.raises(TraceError) as info:
        parse_trace("hazard $\n", "t.trc")
    assert info.value.diagnostics[0].code == "T001"


def test_quantity_absent_from_text_warns():
    _, warnings = parse_trace('hazard H "h"\nreq R "within 5 m" mitigates H qty d<=7 m\n')
    assert [w.code for w in warnings] == ["T005"]


@pytest.mark.parametrize("seed", range(40))
def test_impact_matches_oracle(seed):
    rng = random.Random(seed)
    graph = random_gsn_module(rng)
    model = random_trace_model(rng, graph)
    case = composed(graph)
    for ev in model.evidence:
        r = impact(model, case, ev.id)
        assert [list(r.affected_requirements), list(r.affected_ml_requirements), list(r.affected_hazards), list(r.challenged_claims)] == list(
            impact_oracle(model, case, ev.id)
        )


@pytest.mark.parametrize("seed", range(20))
def test_coverage_matches_oracle(seed):
    rng = random.Random(seed)
    model = random_trace_model(rng, random_gsn_module(rng))
    assert coverage(model).covered == frozenset(coverage_oracle(model))


@pytest.mark.parametrize("seed", range(20))
def test_invalidation_is_monotone(seed):
    rng = random.Random(seed)
    model = random_trace_model(rng, random_gsn_module(rng))
    before = coverage(model).covered
    current = model
    lost = set()
    for ev in rng.sample([e.id for e in model.evidence], len(model.evidence)):
        current = current.invalidate(ev)
        now = before - coverage(current).covered
        assert lost <= now
        lost = now
