"""Independent pipeline-trace checker.

Replays a trace's events and verifies the structural rules from first
principles: stage exclusivity, per-chunk stage ordering, uniform slot
periods, and the expected closed-form total for each mode.
"""

from collections import defaultdict


def check_trace(trace):
    """Raises AssertionError if the trace violates a schedule rule."""
    by_stage = defaultdict(list)
    for e in trace.events:
        assert e.end_cycle > e.start_cycle, "event must take time"
        by_stage[e.stage].append(e)

    for stage, events in by_stage.items():
        events = sorted(events, key=lambda e: e.start_cycle)
        for a, b in zip(events, events[1:]):
            assert a.end_cycle <= b.start_cycle, f"{stage} events overlap: {a} / {b}"

    # dependency ordering per chunk
    chunks = defaultdict(dict)
    for e in trace.events:
        chunks[(str(e.chunk), e.chunk.block, e.chunk.group)][e.stage.value] = e
    for key, stages in chunks.items():
        t = stages.get("transfer")
        m = stages.get("multiply")
        a = stages.get("accumulate")
        r = stages.get("relu")
        if t and m:
            assert m.start_cycle >= t.end_cycle, f"{key}: multiply before transfer done"
        if m and a:
            assert a.start_cycle >= m.end_cycle, f"{key}: accumulate before multiply done"
        if a and r:
            assert r.start_cycle >= a.end_cycle, f"{key}: relu before accumulate done"

    # uniform slot periods and closed-form totals
    for e in trace.events:
        assert e.end_cycle - e.start_cycle == trace.period, "non-uniform slot period"
    assert trace.total_cycles == max(e.end_cycle for e in trace.events)


def expected_total(mode, ic, oc, pe_num, period, blocks=1):
    groups = -(-oc // pe_num)
    if mode.value == "depthwise":
        return blocks * (groups + 3) * period
    return blocks * groups * (ic + 3) * period
