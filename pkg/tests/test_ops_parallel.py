"""Sanitization and simultaneous commit of parallel operations."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greengrid.cells import CellType, is_agent
from greengrid.ops import (
    OFFSETS,
    ParallelInterface,
    ParallelOp,
    apply_parallel,
    sanitize_parallel,
)

A = CellType.AGENT_UNSPECIALIZED


def make_iface(spec=(1.0, 0, 0, 0), gifts=None, internal=None):
    return ParallelInterface(
        spec_logits=np.array(spec, dtype=float),
        gift_fracs=np.zeros((8, 2)) if gifts is None else np.asarray(gifts, float),
        new_internal=np.zeros(8) if internal is None else np.asarray(internal, float),
    )


def agent_cluster(build, put, config):
    env = build(["VVV", "VVV", "VVV"], config)
    env = put(env, (1, 1), A, e=4.0, a=4.0, agent_id=1)
    env = put(env, (0, 1), A, e=0.0, a=0.0, agent_id=1)
    env = put(env, (2, 1), A, e=1.0, a=1.0, agent_id=1)
    return env


def test_gift_request_clamped_to_stock(build, put, small_config):
    env = agent_cluster(build, put, small_config)
    op = sanitize_parallel(make_iface(gifts=np.full((8, 2), 10.0)), env, (1, 1),
                           small_config)
    for ch in (0, 1):
        assert op.gifts[:, ch].sum() <= 4.0 + 1e-12


def test_negative_gift_is_zeroed(build, put, small_config):
    env = agent_cluster(build, put, small_config)
    gifts = np.full((8, 2), -3.0)
    op = sanitize_parallel(make_iface(gifts=gifts), env, (1, 1), small_config)
    assert (op.gifts >= 0.0).all()
    assert op.gifts.sum() == 0.0


def test_gifts_only_to_agent_neighbors(build, put, small_config):
    env = agent_cluster(build, put, small_config)
    op = sanitize_parallel(make_iface(gifts=np.ones((8, 2))), env, (1, 1),
                           small_config)
    for i, (dy, dx) in enumerate(OFFSETS):
        ny, nx = 1 + dy, 1 + dx
        if not is_agent(int(env.type_grid[ny, nx])):
            assert op.gifts[i].sum() == 0.0
    # the two agent neighbors (up, down) do receive
    assert op.gifts[1].sum() > 0 and op.gifts[6].sum() > 0


def test_specialization_stripped_without_funds(build, put, small_config):
    env = build(["VVV"], small_config)
    env = put(env, (0, 1), A, e=0.05, a=0.05, agent_id=1)
    iface = make_iface(spec=(0, 0, 0, 5.0), gifts=np.full((8, 2), 0.5))
    op = sanitize_parallel(iface, env, (0, 1), small_config)
    assert op.specialize_to is None
    assert op.gifts.sum() >= 0.0  # rest of the op survives


def test_specialization_to_current_type_is_dropped(build, put, small_config):
    env = build(["VVV"], small_config)
    env = put(env, (0, 1), CellType.AGENT_ROOT, e=5.0, a=5.0, agent_id=1)
    op = sanitize_parallel(make_iface(spec=(0, 5.0, 0, 0)), env, (0, 1),
                           small_config)
    assert op.specialize_to is None


def test_gift_accumulation(build, put, small_config):
    env = build(["VVV"], small_config)
    env = put(env, (0, 0), A, e=8.0, a=0.0, agent_id=1)
    env = put(env, (0, 1), A, e=0.0, a=0.0, agent_id=1)
    env = put(env, (0, 2), A, e=9.0, a=0.0, agent_id=1)
    left = ParallelOp(pos=(0, 0), new_internal=np.zeros(8), specialize_to=None,
                      gifts=_gift_to(4, 3.0))
    right = ParallelOp(pos=(0, 2), new_internal=np.zeros(8), specialize_to=None,
                       gifts=_gift_to(3, 4.0))
    out, stats = apply_parallel(env, [left, right], small_config)
    assert out.state_grid[0, 1, 0] == pytest.approx(7.0)
    assert out.state_grid[0, 0, 0] == pytest.approx(5.0)
    assert out.state_grid[0, 2, 0] == pytest.approx(5.0)
    assert stats.cap_loss.sum() == 0.0


def _gift_to(slot, amount, channel=0):
    g = np.zeros((8, 2))
    g[slot, channel] = amount
    return g


def test_gift_overflow_lost_at_cap(build, put, small_config):
    env = build(["VVV"], small_config)
    env = put(env, (0, 0), A, e=8.0, a=0.0, agent_id=1)
    env = put(env, (0, 1), A, e=9.5, a=0.0, agent_id=1)
    op = ParallelOp(pos=(0, 0), new_internal=np.zeros(8), specialize_to=None,
                    gifts=_gift_to(4, 3.0))
    out, stats = apply_parallel(env, [op], small_config)
    assert out.state_grid[0, 1, 0] == small_config.max_nutrient_cell
    assert out.state_grid[0, 0, 0] == pytest.approx(5.0)  # donor still debited
    assert stats.cap_loss[0] == pytest.approx(2.5)


def test_no_ops_is_identity(build, put, small_config):
    env = agent_cluster(build, put, small_config)
    out, stats = apply_parallel(env, [], small_config)
    assert out is env
    assert stats.cap_loss.sum() == 0.0


def test_specialize_cost_debited(build, put, small_config):
    env = build(["VVV"], small_config)
    env = put(env, (0, 1), A, e=5.0, a=5.0, agent_id=1)
    op = sanitize_parallel(make_iface(spec=(0, 9.0, 0, 0)), env, (0, 1),
                           small_config)
    assert op.specialize_to == CellType.AGENT_ROOT
    out, stats = apply_parallel(env, [op], small_config)
    assert out.type_grid[0, 1] == CellType.AGENT_ROOT
    ce, ca = small_config.specialize_cost
    assert out.state_grid[0, 1, 0] == pytest.approx(5.0 - ce)
    assert out.state_grid[0, 1, 1] == pytest.approx(5.0 - ca)
    assert stats.op_cost[0] == pytest.approx(ce)


loose_float = st.one_of(st.floats(-1e9, 1e9), st.just(float("nan")),
                        st.just(float("inf")), st.just(float("-inf")))


@settings(max_examples=300, deadline=None)
@given(
    spec=st.lists(loose_float, min_size=4, max_size=4),
    gifts=st.lists(loose_float, min_size=16, max_size=16),
    e=st.floats(0, 10), a=st.floats(0, 10),
)
def test_sanitize_totality(spec, gifts, e, a):
    """Fuzzed interfaces never produce an op that violates its invariants."""
    from greengrid.config import EnvConfig
    from tests.conftest import build_env, put_cell
    cfg = EnvConfig()
    env = build_env(["VVV", "VVV", "VVV"], cfg)
    env = put_cell(env, (1, 1), A, e=e, a=a, agent_id=1)
    env = put_cell(env, (0, 0), A, e=1.0, a=1.0, agent_id=2)
    iface = ParallelInterface(np.array(spec), np.array(gifts).reshape(8, 2),
                              np.zeros(8))
    op = sanitize_parallel(iface, env, (1, 1), cfg)
    assert (op.gifts >= 0).all()
    avail = np.array([e, a])
    if op.specialize_to is not None:
        avail = avail - np.array(cfg.specialize_cost)
    assert op.gifts[:, 0].sum() <= max(avail[0], 0) + 1e-9
    assert op.gifts[:, 1].sum() <= max(avail[1], 0) + 1e-9
    for i, (dy, dx) in enumerate(OFFSETS):
        if not is_agent(int(env.type_grid[1 + dy, 1 + dx])):
            assert op.gifts[i].sum() == 0
