import copy
import json

import pytest

from fraisse_kit import documents as docs
from fraisse_kit.builder import (
    boolean_schedule,
    build_dense_orbit_approx,
    build_generic_approx,
    get_build_driver,
    metric_schedule,
    replay,
    trace_from_doc,
    trace_to_doc,
    tree_schedule,
)
from fraisse_kit.core import DomainError, PartialIsoSystem, trivial_system


def test_schedule_sizes():
    assert len(boolean_schedule(2, 2)) == 99
    assert len(boolean_schedule(1, None)) == 3
    assert len(metric_schedule()) == 16
    assert len(tree_schedule(2, 2, 3)) == 23


def test_identity_only_schedule():
    driver = get_build_driver("boolean")
    trace = build_dense_orbit_approx(driver, [trivial_system()], 10)
    assert trace.complete and len(trace.stages) == 1
    assert trace.final == trivial_system()
    assert replay(driver, trace) == []


@pytest.fixture(scope="module")
def boolean_dense():
    driver = get_build_driver("boolean")
    return driver, build_dense_orbit_approx(driver, boolean_schedule(2, 2), 1000)


@pytest.fixture(scope="module")
def boolean_generic():
    driver = get_build_driver("boolean")
    return driver, build_generic_approx(driver, boolean_schedule(2, 2)[:12], 1000)


def test_boolean_dense_trace_replays(boolean_dense):
    driver, trace = boolean_dense
    assert trace.complete and len(trace.stages) == 99
    assert replay(driver, trace) == []


def test_boolean_generic_trace_replays(boolean_generic):
    driver, trace = boolean_generic
    kinds = [st.kind for st in trace.stages]
    assert kinds.count("hat") == 12
    assert kinds.count("extension") == 24
    assert replay(driver, trace) == []


def test_local_stages_point_at_their_hat(boolean_generic):
    _, trace = boolean_generic
    for st in trace.stages:
        if st.kind == "extension":
            assert trace.stages[st.parent].kind == "hat"


def test_conditions_form_a_chain(boolean_dense):
    driver, trace = boolean_dense
    for k, link in enumerate(trace.links):
        assert driver.extends(trace.conditions[k], trace.conditions[k + 1], link) == []


def test_tampered_requirement_fails_replay(boolean_dense):
    driver, trace = boolean_dense
    bad = copy.copy(trace)
    bad.stages = list(trace.stages)
    st = copy.copy(bad.stages[5])
    st.requirement = bad.stages[6].requirement
    bad.stages[5] = st
    assert any(p.startswith("stage 5") for p in replay(driver, bad))


def test_tampered_extension_witness_fails_replay(boolean_generic):
    driver, trace = boolean_generic
    i = next(k for k, st in enumerate(trace.stages) if st.kind == "extension")
    bad = copy.copy(trace)
    bad.stages = list(trace.stages)
    st = copy.copy(bad.stages[i])
    st.parent = next(k for k, s in enumerate(trace.stages) if s.kind == "hat" and k != st.parent)
    bad.stages[i] = st
    assert replay(driver, bad)


def test_budget_exhaustion_flags_the_trace():
    driver = get_build_driver("boolean")
    trace = build_dense_orbit_approx(driver, boolean_schedule(2, 2), 5)
    assert not trace.complete and len(trace.stages) == 5
    assert replay(driver, trace) == []
    trace = build_generic_approx(driver, boolean_schedule(2, 2), 5)
    assert not trace.complete


def test_empty_extension_schedule_is_dense_through_witnesses():
    driver = get_build_driver("boolean")
    trace = build_generic_approx(driver, boolean_schedule(1, None), 100, extensions=0)
    assert [st.kind for st in trace.stages] == ["hat"] * 3
    assert replay(driver, trace) == []


def test_metric_dense_trace_replays():
    driver = get_build_driver("metric")
    trace = build_dense_orbit_approx(driver, metric_schedule(), 100)
    assert trace.complete and replay(driver, trace) == []


def test_metric_driver_has_no_wap_witness():
    driver = get_build_driver("metric")
    with pytest.raises(DomainError):
        build_generic_approx(driver, metric_schedule(), 100)


def test_tree_generic_trace_replays():
    driver = get_build_driver("tree")
    trace = build_generic_approx(driver, tree_schedule(2, 2, 3), 1000)
    assert trace.complete and replay(driver, trace) == []


def test_unknown_builder_is_refused():
    with pytest.raises(DomainError):
        get_build_driver("graph")


@pytest.mark.parametrize("name,schedule", [("boolean", boolean_schedule(1, None)),
                                           ("metric", metric_schedule()),
                                           ("tree", tree_schedule(2, 2, 2))])
def test_traces_round_trip_through_documents(name, schedule):
    driver = get_build_driver(name)
    if name == "metric":
        trace = build_dense_orbit_approx(driver, schedule, 100)
    else:
        trace = build_generic_approx(driver, schedule, 100)
    doc = trace_to_doc(driver, trace)
    text = docs.dumps(doc)
    driver2, back = trace_from_doc(json.loads(text))
    assert trace_to_doc(driver2, back) == doc
    assert replay(driver2, back) == []
