import random

import pytest

from sailstate.backend import load_backend
from sailstate.errors import MissingEntryFunction
from sailstate.footprint import (
    EMPTY_FOOTPRINT,
    TAG_EXPLICIT,
    TAG_IMPLICIT,
    Footprint,
    baseline_footprint,
    function_footprints,
    instruction_insights,
    propagate,
)
from sailstate.isa_model import StateRef, natural_key
from sailstate.parser import parse_corpus

from conftest import FIXTURES


def _fp(reads=(), writes=()):
    return Footprint(
        reads=frozenset((StateRef.parse(l), t) for l, t in reads),
        writes=frozenset((StateRef.parse(l), t) for l, t in writes),
    )


def _labels(entries, tag=None):
    return sorted(
        (r.label for r, t in entries if tag is None or t == tag), key=natural_key
    )


# -- fixpoint propagation (independent brute-force oracle) ---------------------

def _brute_force(direct):
    """Transitive closure by per-node graph walk; no worklist, no sharing."""
    out = {}
    for start in direct:
        seen = set()
        stack = [start]
        fp = EMPTY_FOOTPRINT
        while stack:
            node = stack.pop()
            if node in seen or node not in direct:
                continue
            seen.add(node)
            own, callees = direct[node]
            fp = fp.union(own)
            stack.extend(callees)
        out[start] = fp
    return out


def _random_graph(rng):
    n = rng.randint(1, 30)
    names = [f"n{i}" for i in range(n)]
    direct = {}
    for name in names:
        own = _fp(
            reads=[(f"s{rng.randint(0, 9)}", rng.choice((TAG_EXPLICIT, TAG_IMPLICIT)))
                   for _ in range(rng.randint(0, 3))],
            writes=[(f"s{rng.randint(0, 9)}", rng.choice((TAG_EXPLICIT, TAG_IMPLICIT)))
                    for _ in range(rng.randint(0, 3))],
        )
        # allow self loops, cycles, and dangling callees
        callees = [rng.choice(names) for _ in range(rng.randint(0, 4))]
        if rng.random() < 0.15:
            callees.append("undefined_external")
        direct[name] = (own, tuple(callees))
    return direct


def test_propagate_matches_brute_force_closure():
    for seed in range(100):
        direct = _random_graph(random.Random(seed))
        got = propagate(direct)
        want = _brute_force(direct)
        assert got == want, f"seed {seed}"


def test_propagate_idempotent_and_monotone():
    for seed in (3, 17, 40):
        direct = _random_graph(random.Random(seed))
        resolved = propagate(direct)
        again = propagate({k: (resolved[k], cs) for k, (_, cs) in direct.items()})
        for name in direct:
            own = direct[name][0]
            assert own.reads <= resolved[name].reads
            assert own.writes <= resolved[name].writes
            assert again[name] == resolved[name]


def test_cycle_members_share_footprint():
    direct = {
        "a": (_fp(reads=[("r1", TAG_IMPLICIT)]), ("b",)),
        "b": (_fp(writes=[("w1", TAG_IMPLICIT)]), ("c",)),
        "c": (_fp(), ("a",)),
    }
    resolved = propagate(direct)
    assert resolved["a"] == resolved["b"] == resolved["c"]
    assert _labels(resolved["a"].reads) == ["r1"]
    assert _labels(resolved["a"].writes) == ["w1"]


# -- direct footprints on the bundled corpus ------------------------------------

def test_csr_helper_bodies_are_explicit(model, backend):
    fps = function_footprints(model, backend)
    read_csr = fps["readCSR"]
    assert "mepc" in _labels(read_csr.reads, TAG_EXPLICIT)
    assert "cycle" in _labels(read_csr.reads, TAG_EXPLICIT)
    write_csr = fps["writeCSR"]
    assert "satp" in _labels(write_csr.writes, TAG_EXPLICIT)
    # the permission check itself reads nothing architectural
    assert fps["csr_access_ok"] == EMPTY_FOOTPRINT


def test_trap_handler_state_is_implicit(model, backend):
    fps = function_footprints(model, backend)
    th = fps["trap_handler"]
    assert "mepc" in _labels(th.writes, TAG_IMPLICIT)
    assert "mstatus.MPIE" in _labels(th.writes, TAG_IMPLICIT)
    assert _labels(th.writes, TAG_EXPLICIT) == []


def test_bank_accessor_calls_expand(model, backend):
    insights = instruction_insights(model, backend, include_baseline=False)
    add = insights["ADD"].footprint
    reads = _labels(add.reads, TAG_EXPLICIT)
    assert [f"x{i}" for i in range(32)] == reads
    writes = _labels(add.writes, TAG_EXPLICIT)
    assert "x0" not in writes  # hardwired zero never written
    assert writes == [f"x{i}" for i in range(1, 32)]


def test_instruction_insights_mret(insights):
    mret = insights["MRET"]
    assert mret.privileges == frozenset({"Machine"})
    reads = set(_labels(mret.footprint.reads))
    assert {"mstatus.MPIE", "mstatus.MPP", "cur_privilege"} <= reads
    writes = set(_labels(mret.footprint.writes))
    assert {
        "mstatus.MIE", "mstatus.MPIE", "mstatus.MPP", "mstatus.MPRV",
        "cur_privilege",
    } <= writes


def test_nop_without_baseline_is_empty(model, backend):
    insights = instruction_insights(model, backend, include_baseline=False)
    assert insights["NOP"].footprint == EMPTY_FOOTPRINT


def test_baseline_union_reaches_every_insight(model, backend, insights):
    base = baseline_footprint(model, backend)
    assert "cur_privilege" in _labels(base.reads)
    assert "mepc" in _labels(base.writes)  # interrupt entry path
    for ins in insights.values():
        assert base.reads <= ins.footprint.reads
        assert base.writes <= ins.footprint.writes


def test_baseline_entries_carry_via_marker(insights):
    nop = insights["NOP"]
    assert nop.via  # every entry accounted for
    assert all(path == "baseline" for _, _, _, path in nop.via)
    mret = insights["MRET"]
    callee_paths = {path for _, _, _, path in mret.via if path != "baseline"}
    assert any(">" in p for p in callee_paths)  # reached through a callee chain


def test_externals_surface(insights):
    assert "phys_mem_write" in insights["SW"].externals


def test_missing_entry_function_raises(model, tmp_path):
    ini = tmp_path / "backend.ini"
    ini.write_text(
        "[modes]\norder = User, Supervisor, Machine\n"
        "[state]\ncurrent_privilege_register = cur_privilege\n"
        "[dispatch]\nentry_functions = not_there\n"
    )
    bad = load_backend(str(ini))
    with pytest.raises(MissingEntryFunction):
        baseline_footprint(model, bad)


def test_store_side_effect_tagged_implicit(insights):
    sw = insights["SW"].footprint
    assert "mip.MTIP" in _labels(sw.writes, TAG_IMPLICIT)
    assert "mip.MTIP" not in _labels(sw.writes, TAG_EXPLICIT)


def test_injected_bug_corpus_loses_the_side_effect(backend):
    d = FIXTURES / "corpora" / "bug_mem"
    model = parse_corpus(sorted(d.glob("*.sail")))
    insights = instruction_insights(model, backend)
    for name in ("SW", "SD", "SC"):
        assert "mip.MTIP" not in _labels(insights[name].footprint.writes)
