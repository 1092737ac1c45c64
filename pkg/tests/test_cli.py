import json
import subprocess
import sys
from fractions import Fraction

import pytest

from fraisse_kit import documents as docs
from fraisse_kit.cli import main
from fraisse_kit.core import AlgebraEmbedding, PartialIsoSystem, SystemEmbedding, split_system
from fraisse_kit.measured import MeasuredSystem, RationalMeasure

from helpers import iso, system


def _write(path, doc):
    docs.write(path, doc)
    return str(path)


def _run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def _extension_doc(S, atom, mapping):
    T, f = split_system(S, atom, 2)
    T2 = PartialIsoSystem.single(iso(T.ambient.atoms, mapping))
    return docs.wrap("boolean-extension", {"system": docs.system_to_payload(T2),
                                           "embedding": docs.embedding_to_payload(f.base)})


def test_normalize_writes_a_refined_system_and_witness(tmp_path, capsys):
    src = _write(tmp_path / "s.json", docs.save(system("012", {"0": "2", "12": "01"})))
    wit = tmp_path / "w.json"
    code, out, _ = _run(["normalize", "--in", src, "--witness", str(wit)], capsys)
    assert code == 0
    assert docs.load(json.loads(out)) == system("012", {"0": "2", "2": "1", "1": "0"})
    assert json.loads(wit.read_text())["kind"] == "boolean-embedding"


def test_decompose_reports_chains_or_violation(tmp_path, capsys):
    src = _write(tmp_path / "s.json", docs.save(system("012", {"0": "01", "12": "2"})))
    code, out, _ = _run(["decompose", "--in", src], capsys)
    payload = json.loads(out)["payload"]
    assert code == 0 and payload["normal"] and len(payload["stable"]) == 2
    src = _write(tmp_path / "t.json", docs.save(system("012", {"0": "2", "12": "01"})))
    _, out, _ = _run(["decompose", "--in", src], capsys)
    assert not json.loads(out)["payload"]["normal"]


def test_boolean_amalgam(tmp_path, capsys):
    S = system("0", {"0": "0"})
    base = _write(tmp_path / "s.json", docs.save(S))
    left = _write(tmp_path / "l.json", _extension_doc(S, "0", {("0.a",): ("0.a",), ("0.b",): ("0.b",)}))
    right = _write(tmp_path / "r.json", _extension_doc(S, "0", {("0.a",): ("0.b",), ("0.b",): ("0.a",)}))
    wit = tmp_path / "w.json"
    code, out, _ = _run(["amalgamate", "--in", base, "--left", left, "--right", right,
                         "--witness", str(wit)], capsys)
    assert code == 0
    assert docs.load(json.loads(out)) == system("0123", {"0": "1", "1": "0", "2": "3", "3": "2"})
    assert len(json.loads(wit.read_text())["payload"]["cells"]) == 4


def test_measured_amalgam(tmp_path, capsys):
    mu = RationalMeasure.of({"0": 1})
    base = _write(tmp_path / "m.json", docs.save(MeasuredSystem(system("0", {"0": "0"}), mu)))

    def ext(name, weights):
        nu = RationalMeasure.of({f"0.{i}": w for i, w in enumerate(weights)})
        e = AlgebraEmbedding.from_map(mu.ambient, nu.ambient, {"0": nu.ambient.atoms})
        return _write(tmp_path / name, docs.wrap("measured-extension", {
            "measure": docs.measure_to_payload(nu), "embedding": docs.embedding_to_payload(e)}))

    left = ext("l.json", [Fraction(1, 4), Fraction(3, 4)])
    right = ext("r.json", [Fraction(1, 3), Fraction(2, 3)])
    code, out, _ = _run(["amalgamate", "--in", base, "--left", left, "--right", right], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["kind"] == "measure"
    masses = sorted(Fraction(q) for q in docs.measure_from_payload(doc["payload"])._m.values())
    assert masses == [Fraction(1, 12), Fraction(1, 6), Fraction(1, 4), Fraction(1, 2)]


def test_amalgam_over_non_normal_base_is_a_domain_error(tmp_path, capsys):
    S = system("012", {"0": "2", "12": "01"})
    base = _write(tmp_path / "s.json", docs.save(S))
    ident = docs.wrap("boolean-extension", {"system": docs.system_to_payload(S),
                                            "embedding": docs.embedding_to_payload(
                                                SystemEmbedding.identity(S).base)})
    side = _write(tmp_path / "e.json", ident)
    code, _, err = _run(["amalgamate", "--in", base, "--left", side, "--right", side], capsys)
    assert code == 1 and "normalize" in err


def test_joint_embedding(tmp_path, capsys):
    a = _write(tmp_path / "a.json", docs.save(system("01", {"0": "1", "1": "0"})))
    b = _write(tmp_path / "b.json", docs.save(system("01", {"0": "0", "1": "1"})))
    code, out, _ = _run(["jep", "--in", a, "--with", b], capsys)
    assert code == 0
    assert docs.load(json.loads(out)) == system("0123", {"0": "2", "1": "3", "2": "0", "3": "1"})


def test_check_class_counterexample_exits_zero(capsys):
    code, out, err = _run(["check-class", "--class", "equiv2", "--property", "jep",
                           "--n", "1", "--bound", "4"], capsys)
    report = json.loads(out)["payload"]
    assert code == 0
    assert report["verdict"] == "counterexample" and report["bound_independent"]
    assert "counterexample" in err


def test_check_class_pinned(capsys):
    code, out, _ = _run(["check-class", "--class", "boolean", "--property", "cjep",
                         "--bound", "2"], capsys)
    assert code == 0 and json.loads(out)["payload"]["property"] == "CJEP"


def test_factor_grid_identity(capsys):
    code, out, _ = _run(["factor-grid", "--n", "2", "--m", "2", "--perm", "0,1,2,3"], capsys)
    p = json.loads(out)["payload"]
    assert code == 0 and p["f1"] == p["h"] == p["f2"] == p["input"]


def test_tree_extend(tmp_path, capsys):
    from fraisse_kit.trees import TreeIso
    src = _write(tmp_path / "t.json", docs.save(TreeIso.from_map({(): (), (0,): (1,)})))
    code, out, _ = _run(["tree-extend", "--in", src, "--m", "2"], capsys)
    g = docs.load(json.loads(out)).as_dict()
    assert code == 0 and g[(0, 1)] == (1, 1) and g[(1,)] == (0,)


def test_shift_certificate(capsys):
    code, out, _ = _run(["shift-independence", "--k", "1"], capsys)
    p = json.loads(out)["payload"]
    assert code == 0 and p["power"] == 3 and p["depth"] == 8 and p["product_atoms"] == 64


def test_trace_round_trip_and_replay(tmp_path, capsys):
    trace = tmp_path / "trace.json"
    code, _, err = _run(["build-generic", "--class", "tree", "--max-nodes", "2",
                         "--out", str(trace)], capsys)
    assert code == 0 and "complete" in err
    code, _, err = _run(["build-generic", "--replay", str(trace)], capsys)
    assert code == 0 and "every stage replays" in err


def _dense_trace(tmp_path, capsys):
    trace = tmp_path / "trace.json"
    _run(["build-generic", "--class", "boolean", "--mode", "dense", "--depth", "1",
          "--max-blocks", "2", "--out", str(trace)], capsys)
    return trace, json.loads(trace.read_text())


def test_tampered_origin_fails_replay(tmp_path, capsys):
    trace, doc = _dense_trace(tmp_path, capsys)
    stages = doc["payload"]["stages"]
    stages[0]["origin"] = stages[1]["origin"]
    trace.write_text(json.dumps(doc))
    code, _, err = _run(["build-generic", "--replay", str(trace)], capsys)
    assert code == 1
    assert "stage 0: requirement is not the reduced scheduled condition" in err


def test_inconsistent_trace_is_malformed(tmp_path, capsys):
    trace, doc = _dense_trace(tmp_path, capsys)
    stages = doc["payload"]["stages"]
    stages[0]["requirement"], stages[1]["requirement"] = stages[1]["requirement"], stages[0]["requirement"]
    trace.write_text(json.dumps(doc))
    code, _, err = _run(["build-generic", "--replay", str(trace)], capsys)
    assert code == 2 and "malformed" in err


def test_metric_generic_build_is_a_domain_error(capsys):
    code, _, err = _run(["build-generic", "--class", "metric"], capsys)
    assert code == 1 and "WAP" in err


def test_outputs_are_byte_identical_across_runs(tmp_path, capsys):
    paths = []
    for i in range(2):
        p = tmp_path / f"run{i}.json"
        main(["--seed", "7", "build-generic", "--class", "boolean", "--depth", "1",
              "--max-blocks", "2", "--out", str(p)])
        paths.append(p.read_bytes())
    capsys.readouterr()
    assert paths[0] == paths[1]


@pytest.mark.parametrize("argv", [["normalize", "--in", "/nonexistent.json"],
                                  ["factor-grid", "--n", "2", "--m", "2", "--perm", "0,0,1,2"],
                                  ["factor-grid", "--n", "2"]])
def test_bad_input_exits_two(argv, capsys):
    assert main(argv) == 2


def test_bad_json_exits_two(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("[1,")
    assert main(["decompose", "--in", str(p)]) == 2


def test_usage_errors_exit_two():
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 2


def test_console_script_runs():
    out = subprocess.run([sys.executable, "-m", "fraisse_kit.cli", "shift-independence", "--k", "0"],
                         capture_output=True, text=True, check=True)
    assert json.loads(out.stdout)["payload"]["power"] == 1
