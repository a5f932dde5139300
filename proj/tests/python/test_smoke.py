import json
from pathlib import Path

import pytest

import georep

SCENARIOS = Path(__file__).resolve().parents[2] / "scenarios"


def short(name, **changes):
    cfg = json.loads((SCENARIOS / f"{name}.json").read_text())
    cfg.update(changes)
    return json.dumps(cfg)


def test_kv_store_round_trip():
    kv = georep.KvStore()
    assert kv.execute(georep.put_op("a", "1")) == "ok"
    assert kv.execute(georep.append_op("a", "2")) == "ok"
    assert kv.read(georep.get_op("a")) == "12"
    assert kv.read(georep.get_op("missing")) == "<absent>"
    copy = georep.KvStore()
    copy.restore(kv.snapshot())
    assert copy.data == {"a": "12"}


def test_restore_rejects_garbage():
    with pytest.raises(ValueError):
        georep.KvStore().restore(b"\xff\xff")


def test_scenario_canonical_form_is_stable():
    text = georep.load_scenario(SCENARIOS / "four-regions-writes.json")
    assert georep.parse_scenario(text) == text
    assert json.loads(text)["name"] == "four-regions-writes"


def test_invalid_scenario_raises():
    with pytest.raises(georep.ConfigError):
        georep.parse_scenario(short("four-regions-writes", f_a=0, agreement_region="nowhere"))
    with pytest.raises(ValueError):
        georep.parse_scenario("{not json")


def test_run_audits_clean_and_is_deterministic():
    text = short("four-regions-reads", duration_ms=600)
    a = georep.run_scenario(text, seed=3)
    b = georep.run_scenario(text, seed=3)
    assert a.ok and a.outstanding == 0
    assert a.digest == b.digest
    assert all(v.passed for v in a.verdicts)
    assert {row.region for row in a.latency} == {"V", "O", "I", "T"}
    assert json.loads(a.report_json)["seed"] == 3


def test_trace_text_audits_the_same():
    res = georep.run_scenario(short("leader-crash", duration_ms=2500))
    verdicts = georep.audit(res.trace)
    assert [v.name for v in verdicts] == [v.name for v in res.verdicts]
    assert all(v.passed for v in verdicts)


def test_tampered_trace_fails_audit():
    res = georep.run_scenario(short("four-regions-writes", duration_ms=500))
    lines = res.trace.splitlines()
    # change one reply the client accepted
    i = next(i for i, l in enumerate(lines) if "|c_accept|" in l and "reply=6f6b" in l)
    lines[i] = lines[i].replace("reply=6f6b", "reply=6f6c")
    verdicts = {v.name: v.passed for v in georep.audit("\n".join(lines) + "\n")}
    assert not verdicts["replay_replies"]


def test_flat_mode_is_slower_for_remote_clients():
    text = short("four-regions-writes", duration_ms=1500)
    spider = {(r.region, r.op): r.p50_ms for r in georep.run_scenario(text).latency}
    flat = {(r.region, r.op): r.p50_ms for r in georep.run_scenario(text, mode="flat-bft").latency}
    for region in "OIT":
        assert flat[(region, "write")] > spider[(region, "write")]


def test_channel_variants_differ_in_wide_area_traffic():
    text = (SCENARIOS / "rc-vs-sc.json").read_text()
    rc = georep.run_scenario(text, irmc="rc").wan
    sc = georep.run_scenario(text, irmc="sc").wan
    assert rc["Send@commit"] == 4 * sc["Certificate@commit"]
    assert "Certificate@commit" not in rc


@pytest.mark.parametrize("variant", ["rc", "sc"])
def test_channel_conformance(variant):
    rep = georep.irmc_conformance(variant, f=1, schedules=50, seed=5)
    assert rep["passed"], rep["examples"]
    assert rep["schedules"] == 50 and rep["deliveries"] > 0
