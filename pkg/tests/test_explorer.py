"""State-space exploration: counting oracles, dedup soundness, defects.

Counting oracles used below, derived by hand before any run:

* Priority queue, one replica: the request pool is five fixed requests
  and every one of them is always valid, so the schedule tree is a
  complete 5-ary tree of depth q — 5**q terminal schedules and
  (5**(q+1) - 1) / 4 nodes in total.

* Priority queue, two replicas, two slots: after the first client event
  there are exactly three ways to interleave the second client event
  with the two deliveries (the reply cannot be delivered before it is
  issued): C1 D1 D0', C1 D0' D1, D1 C1 D0'.  Five request choices per
  client event gives 5 * 3 * 5 = 75 schedules.

* List, one replica, two slots: slot 0 offers insert e1 at the head
  with one of two attrs (2 choices); slot 1 then offers insert e2
  (head or anchored at e1, two attrs — 4), update e1 (2), remove e1
  (1), re-add e1 (1): 8 choices.  2 * 8 = 16 schedules.

* List, two replicas, two slots: same three interleavings as above.
  When the second client event fires before the delivery, replica 1
  offers only the two fresh inserts; after the delivery it offers all
  8.  2 * (2 + 2 + 8) = 24 schedules.
"""

from __future__ import annotations

import pytest

from crdtcheck.dots import EMPTY_CONTEXT, Dot
from crdtcheck.errors import BadConfig, BudgetExceeded, NotEnabled
from crdtcheck.explorer import (
    ClientEvent,
    DeliverEvent,
    ExplorationConfig,
    config_fingerprint,
    enabled_events,
    enumerate_traces,
    event_from_wire,
    event_wire,
    explore,
    initial_state,
    is_terminal,
    replay_schedule,
    schedule_has_causal_inversion,
    state_violations,
    step,
)
from crdtcheck.operations import OperationRequest
from crdtcheck.replica import fresh_replica


def cfg_of(**kw) -> ExplorationConfig:
    base = dict(data_type="rpq", n=1, q=2)
    base.update(kw)
    return ExplorationConfig(**base)


# -- configuration validation ---------------------------------------------


def test_bad_configs_are_rejected():
    with pytest.raises(BadConfig):
        cfg_of(q=0)
    with pytest.raises(BadConfig):
        cfg_of(n=3, q=2)  # fewer slots than replicas
    with pytest.raises(BadConfig):
        cfg_of(data_type="set")
    with pytest.raises(BadConfig):
        cfg_of(channel="fifo")
    with pytest.raises(BadConfig):
        cfg_of(strategy="optimistic")
    with pytest.raises(BadConfig):
        cfg_of(state_cap=0)


def test_server_only_defects_cannot_run_in_the_model():
    with pytest.raises(BadConfig):
        cfg_of(data_type="list", bug_flags=frozenset(["bug4-dummy-position"]))
    # the two model-level defects are accepted
    cfg_of(data_type="list", bug_flags=frozenset(["bug1-readd-accept"]))
    cfg_of(bug_flags=frozenset(["bug2-assume-causal"]))


def test_fingerprint_tracks_semantics_not_budgets():
    a = config_fingerprint(cfg_of())
    assert a == config_fingerprint(cfg_of(state_cap=10_000))
    assert a != config_fingerprint(cfg_of(q=3))
    assert a != config_fingerprint(cfg_of(channel="causal"))
    assert a != config_fingerprint(cfg_of(strategy="causal-assuming"))
    assert a != config_fingerprint(
        cfg_of(bug_flags=frozenset(["bug2-assume-causal"]))
    )


# -- counting against the closed forms -------------------------------------


@pytest.mark.parametrize("q,traces", [(1, 5), (2, 25), (3, 125)])
def test_single_replica_rpq_matches_the_5ary_tree(q, traces):
    report = explore(cfg_of(q=q))
    assert report.terminal_traces == traces
    assert report.distinct_states == (5 ** (q + 1) - 1) // 4
    assert report.states_visited == report.distinct_states
    assert report.exhaustive
    assert report.violations == ()


def test_two_replica_rpq_q2_has_75_schedules():
    report = explore(cfg_of(n=2, q=2))
    assert report.terminal_traces == 75
    assert report.violations == ()


def test_single_replica_list_q2_has_16_schedules():
    report = explore(cfg_of(data_type="list", q=2))
    assert report.terminal_traces == 16
    assert report.violations == ()


def test_two_replica_list_q2_has_24_schedules():
    report = explore(cfg_of(data_type="list", n=2, q=2))
    assert report.terminal_traces == 24
    assert report.violations == ()


# -- deduplicating search vs. raw tree walk --------------------------------


@pytest.mark.parametrize(
    "kw",
    [
        dict(),
        dict(q=3),
        dict(n=2, q=2),
        dict(n=2, q=3),
        dict(data_type="list", q=3),
        dict(data_type="list", n=2, q=2),
        dict(data_type="list", n=2, q=3),
    ],
)
def test_dedup_never_loses_or_invents_traces(kw):
    cfg = cfg_of(**kw)
    brute = enumerate_traces(cfg, collect_oracles=True)
    deduped = explore(cfg, collect_oracles=True, force_bfs=True)
    assert deduped.terminal_traces == brute.terminal_traces
    assert deduped.oracle_multiset == brute.oracle_multiset
    assert deduped.distinct_states <= brute.states_visited


def test_tree_mode_and_bfs_agree_on_single_replica():
    cfg = cfg_of(q=3)
    tree = explore(cfg, collect_oracles=True)
    bfs = explore(cfg, collect_oracles=True, force_bfs=True)
    assert tree.terminal_traces == bfs.terminal_traces
    assert tree.oracle_multiset == bfs.oracle_multiset


def test_exploration_is_deterministic():
    cfg = cfg_of(data_type="list", n=2, q=2)
    a = explore(cfg, collect_oracles=True)
    b = explore(cfg, collect_oracles=True)
    assert a.as_json()["violations"] == b.as_json()["violations"]
    assert (a.terminal_traces, a.distinct_states, a.oracle_multiset) == (
        b.terminal_traces, b.distinct_states, b.oracle_multiset
    )

    seen_a: list = []
    seen_b: list = []
    enumerate_traces(cfg, lambda t: seen_a.append(t.schedule))
    enumerate_traces(cfg, lambda t: seen_b.append(t.schedule))
    assert seen_a == seen_b


# -- events and stepping ----------------------------------------------------


def test_initial_events_are_slot_zero_requests_only():
    cfg = cfg_of(n=2, q=2)
    evs = enabled_events(cfg, initial_state(cfg))
    assert all(isinstance(ev, ClientEvent) for ev in evs)
    assert {ev.slot for ev in evs} == {0}
    assert {ev.target for ev in evs} == {0}
    assert len(evs) == 5


def test_slots_round_robin_over_replicas():
    cfg = cfg_of(n=2, q=2)
    gs = initial_state(cfg)
    gs = step(cfg, gs, enabled_events(cfg, gs)[0])
    client_evs = [ev for ev in enabled_events(cfg, gs) if isinstance(ev, ClientEvent)]
    assert {ev.target for ev in client_evs} == {1}


def test_client_event_fans_out_to_all_peers():
    cfg = cfg_of(n=3, q=3)
    gs = initial_state(cfg)
    gs = step(cfg, gs, enabled_events(cfg, gs)[0])
    assert len(gs.channels[0]) == 0  # origin keeps nothing in flight
    assert len(gs.channels[1]) == 1
    assert len(gs.channels[2]) == 1


def test_step_rejects_events_that_are_not_enabled():
    cfg = cfg_of(n=2, q=2)
    gs = initial_state(cfg)
    with pytest.raises(NotEnabled):
        step(cfg, gs, DeliverEvent(dest=1, origin=0, counter=1))
    with pytest.raises(NotEnabled):
        # valid request, wrong slot target
        step(cfg, gs, ClientEvent(0, 1, OperationRequest("add", "e", 10)))


def test_causal_channel_blocks_early_deliveries():
    # Schedule: add at replica 0, anything at replica 1, then a remove
    # at replica 0 that causally follows its own add.  The remove's sync
    # message must stay blocked for replica 1 until the add arrives.
    causal = cfg_of(n=2, q=3, channel="causal")
    arbitrary = cfg_of(n=2, q=3)

    def issue(cfg, gs, kind, arg=None):
        ev = next(
            e for e in enabled_events(cfg, gs)
            if isinstance(e, ClientEvent) and e.req.kind == kind
            and (arg is None or e.req.arg == arg)
        )
        return step(cfg, gs, ev), ev

    gs = initial_state(causal)
    gs, ev_a = issue(causal, gs, "add", 10)
    gs, ev_b = issue(causal, gs, "add", 10)  # slot 1, replica 1
    gs, ev_c = issue(causal, gs, "remove")   # slot 2, depends on the add

    blocked = DeliverEvent(dest=1, origin=0, counter=2)
    assert event_wire(blocked) not in [
        event_wire(e) for e in enabled_events(causal, gs)
    ]
    # the same prefix under an arbitrary channel enables it
    gs_arb = replay_schedule(arbitrary, [ev_a, ev_b, ev_c])
    assert event_wire(blocked) in [
        event_wire(e) for e in enabled_events(arbitrary, gs_arb)
    ]
    # delivering the add unblocks the remove
    gs = step(causal, gs, DeliverEvent(dest=1, origin=0, counter=1))
    assert event_wire(blocked) in [
        event_wire(e) for e in enabled_events(causal, gs)
    ]


def test_causal_channel_never_reorders_same_origin_messages():
    cfg = cfg_of(n=2, q=2, channel="causal")

    def walk(gs, trail):
        for ev in enabled_events(cfg, gs):
            if isinstance(ev, DeliverEvent):
                assert not schedule_has_causal_inversion(cfg, trail + [ev])
            walk(step(cfg, gs, ev), trail + [ev])

    walk(initial_state(cfg), [])


def test_event_wire_round_trip():
    c = ClientEvent(0, 1, OperationRequest("insert", "e1", 10, anchor=None))
    d = DeliverEvent(dest=1, origin=0, counter=3)
    assert event_from_wire(event_wire(c)) == c
    assert event_from_wire(event_wire(d)) == d


def test_terminal_means_all_slots_used_and_channels_empty():
    cfg = cfg_of(q=1)
    gs = initial_state(cfg)
    assert not is_terminal(cfg, gs)
    gs = step(cfg, gs, enabled_events(cfg, gs)[0])
    assert is_terminal(cfg, gs)  # one replica: no messages at all


# -- invariant machinery -----------------------------------------------------


def test_position_collision_is_reported():
    cfg = cfg_of(data_type="list", n=1, q=1)
    rep = fresh_replica("list", 0)
    rep, _ = rep.issue(OperationRequest("insert", "e1", 10))
    rep, _ = rep.issue(OperationRequest("insert", "e2", 20))
    collided = rep.elems["e2"]
    forged = dict(rep.elems)
    forged["e2"] = type(collided)(
        ins=type(collided.ins)(
            dot=collided.ins.dot,
            pos=rep.elems["e1"].ins.pos,  # same position as e1
            attr=collided.ins.attr,
            ctx=collided.ins.ctx,
        )
    )
    from dataclasses import replace

    bad_state = initial_state(cfg)
    bad_state = type(bad_state)(
        replicas=(replace(rep, elems=forged),),
        channels=bad_state.channels,
        next_slot=1,
    )
    names = [name for name, _ in state_violations(cfg, bad_state)]
    assert names == ["position-unique"]


def test_out_of_range_digit_is_reported():
    cfg = cfg_of(data_type="list", n=1, q=1)
    rep = fresh_replica("list", 0)
    rep, _ = rep.issue(OperationRequest("insert", "e1", 10))
    broken = rep.elems["e1"]
    forged = dict(rep.elems)
    forged["e1"] = type(broken)(
        ins=type(broken.ins)(
            dot=broken.ins.dot, pos=((64, 0, 1),), attr=broken.ins.attr,
            ctx=broken.ins.ctx,
        )
    )
    from dataclasses import replace

    bad_state = initial_state(cfg)
    bad_state = type(bad_state)(
        replicas=(replace(rep, elems=forged),),
        channels=bad_state.channels,
        next_slot=1,
    )
    names = [name for name, _ in state_violations(cfg, bad_state)]
    assert names == ["position-range"]


# -- defect hunting -----------------------------------------------------------


def test_causal_assumption_breaks_under_arbitrary_delivery():
    cfg = cfg_of(n=2, q=3, strategy="causal-assuming")
    report = explore(cfg)
    assert report.violations
    assert {v.invariant for v in report.violations} == {"convergence"}
    shortest = min(len(v.schedule) for v in report.violations)
    # C0 C1 C2, both messages to replica 1 (dependent one first), reply
    # to replica 0: six events, none removable
    assert shortest == 6
    best = min(report.violations, key=lambda v: len(v.schedule))
    assert schedule_has_causal_inversion(cfg, best.schedule)


def test_causal_assumption_is_safe_on_a_causal_channel():
    sloppy = explore(
        cfg_of(n=2, q=3, strategy="causal-assuming", channel="causal"),
        collect_oracles=True,
    )
    strict = explore(
        cfg_of(n=2, q=3, channel="causal"), collect_oracles=True
    )
    assert sloppy.violations == ()
    assert sloppy.terminal_traces == strict.terminal_traces
    assert sloppy.oracle_multiset == strict.oracle_multiset


def test_readd_acceptance_defect_found_and_shortest_is_six_events():
    cfg = cfg_of(
        data_type="list", n=2, q=3,
        bug_flags=frozenset(["bug1-readd-accept"]),
    )
    report = explore(cfg)
    assert report.violations
    assert "convergence" in {v.invariant for v in report.violations}
    assert min(len(v.schedule) for v in report.violations) == 6


def test_violating_counterexamples_replay_to_the_violation():
    cfg = cfg_of(n=2, q=3, strategy="causal-assuming")
    report = explore(cfg)
    v = min(report.violations, key=lambda x: len(x.schedule))
    gs = replay_schedule(cfg, v.schedule)
    assert is_terminal(cfg, gs)
    assert gs.replicas[0].normalize() != gs.replicas[1].normalize()


# -- budgets ------------------------------------------------------------------


def test_state_cap_raises_with_partial_report_attached():
    cfg = cfg_of(q=4, state_cap=50)
    with pytest.raises(BudgetExceeded) as exc:
        explore(cfg)
    partial = exc.value.report
    assert partial is not None
    assert not partial.exhaustive
    assert partial.states_visited >= 50


def test_state_cap_raises_in_deduplicating_mode_too():
    cfg = cfg_of(n=2, q=3, state_cap=100)
    with pytest.raises(BudgetExceeded) as exc:
        explore(cfg)
    assert exc.value.report is not None
    assert not exc.value.report.exhaustive


def test_generous_cap_changes_nothing():
    report = explore(cfg_of(q=2, state_cap=10_000))
    assert report.exhaustive
    assert report.terminal_traces == 25


# -- pinned operation sets ----------------------------------------------------


def test_pinned_single_candidates_walk_one_client_path():
    pinned = (
        (OperationRequest("add", "e", 10),),
        (OperationRequest("remove", "e"),),
    )
    cfg = cfg_of(n=2, q=2, pinned_ops=pinned)
    report = explore(cfg)
    # one request per slot leaves only the three delivery interleavings
    assert report.terminal_traces == 3
    assert report.violations == ()


def test_pinned_ops_fingerprint_differs_from_standard():
    pinned = ((OperationRequest("add", "e", 10),),
              (OperationRequest("remove", "e"),))
    assert config_fingerprint(cfg_of(n=2, q=2, pinned_ops=pinned)) != \
        config_fingerprint(cfg_of(n=2, q=2))


def test_pinned_ops_validation():
    with pytest.raises(BadConfig):
        cfg_of(n=2, q=2, pinned_ops=((OperationRequest("add", "e", 10),),))
    with pytest.raises(BadConfig):
        cfg_of(n=2, q=2, pinned_ops=(
            (OperationRequest("add", "e", 10),), ()))
    with pytest.raises(BadConfig):
        cfg_of(n=2, q=2, pinned_ops=(
            (OperationRequest("insert", "e", 10),),
            (OperationRequest("remove", "e"),)))
