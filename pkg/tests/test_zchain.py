"""Crossing-chain simulation: survival laws and bookkeeping.

The chain starts at 1, steps through the exact step law, and absorbs
at 0.  For a supercritical pile the survival probability has a clean
branching-process value to compare against; at criticality survival
decays like 1/horizon.
"""

from __future__ import annotations

import numpy as np
import pytest

from erwlab.environments import make_periodic
from erwlab.kks import ZEnsembleResult, simulate_Z, simulate_Z_ensemble
from erwlab.seeding import DEFAULT_SEED, TAG_GENERAL, substream

S = DEFAULT_SEED


def test_supercritical_survival_matches_branching_value():
    # constant p = 0.7: the chain is a Galton-Watson process with
    # geometric(0.3) offspring, extinction 3/7, survival 4/7.
    env = make_periodic((0.7, 0.7))
    res = simulate_Z_ensemble(env, "right", 200, 20_000, master_seed=S)
    expect = 4.0 / 7.0
    assert res.survival_frequency == pytest.approx(expect, abs=4 * res.survival_se + 1e-3)
    # escapes count as survivors and dominate here
    assert res.escaped > 0.9 * res.survivors


def test_critical_survival_decays_like_one_over_horizon():
    env = make_periodic((0.5, 0.5))
    res = simulate_Z_ensemble(env, "right", 1000, 40_000, master_seed=S)
    f = res.survival_frequency
    assert 1.0 / (3 * 1000) < f < 3.0 / 1000


def test_subcritical_chain_dies_fast():
    env = make_periodic((0.3, 0.3))
    res = simulate_Z_ensemble(env, "right", 500, 5_000, master_seed=S)
    assert res.survivors == 0
    assert res.escaped == 0


def test_survival_at_is_monotone_and_anchored():
    env = make_periodic((0.9, 0.1))
    res = simulate_Z_ensemble(env, "right", 2_000, 5_000, master_seed=S)
    probes = [1, 10, 100, 500, 2_000]
    values = [res.survival_at(h) for h in probes]
    assert all(a >= b for a, b in zip(values, values[1:]))
    assert values[-1] == pytest.approx(res.survival_frequency)
    with pytest.raises(ValueError):
        res.survival_at(2_001)


def test_ensemble_is_deterministic_in_the_seed():
    env = make_periodic((0.7, 0.3))
    a = simulate_Z_ensemble(env, "right", 300, 2_000, master_seed=S)
    b = simulate_Z_ensemble(env, "right", 300, 2_000, master_seed=S)
    assert np.array_equal(a.death_steps, b.death_steps)
    assert a.escaped == b.escaped
    c = simulate_Z_ensemble(env, "right", 300, 2_000, master_seed=S + 1)
    assert not np.array_equal(a.death_steps, c.death_steps)


def test_left_direction_mirrors_the_pile():
    env = make_periodic((0.3, 0.3))
    # mirrored pile is constant 0.7, so leftward runs are supercritical
    res = simulate_Z_ensemble(env, "left", 200, 5_000, master_seed=S)
    assert res.survival_frequency == pytest.approx(4.0 / 7.0, abs=0.03)
    assert res.direction == "left"


def test_death_steps_fields_are_consistent():
    env = make_periodic((0.5, 0.5))
    res = simulate_Z_ensemble(env, "right", 100, 3_000, master_seed=S)
    d = res.death_steps
    assert isinstance(res, ZEnsembleResult)
    assert len(d) == res.trials == 3_000
    dead = d[d >= 0]
    assert np.all(dead >= 1) and np.all(dead <= 100)
    assert res.survivors == int(np.sum(d < 0))


def test_scalar_run_agrees_with_ensemble_statistics():
    env = make_periodic((0.7, 0.7))
    rng = substream(S, TAG_GENERAL, 30)
    outcomes = [simulate_Z(env, "right", 200, rng) for _ in range(400)]
    freq = sum(o.survived for o in outcomes) / len(outcomes)
    assert freq == pytest.approx(4.0 / 7.0, abs=0.08)
    assert any(o.escaped for o in outcomes)
    dead = [o for o in outcomes if not o.survived]
    assert all(o.hit_zero_step is not None and o.hit_zero_step >= 1 for o in dead)


def test_rejects_bad_direction_and_horizon():
    env = make_periodic((0.6, 0.4))
    rng = substream(S, TAG_GENERAL, 31)
    with pytest.raises(ValueError):
        simulate_Z(env, "up", 10, rng)
    with pytest.raises(ValueError):
        simulate_Z(env, "right", 0, rng)
    with pytest.raises(ValueError):
        simulate_Z_ensemble(env, "sideways", 10, 100, master_seed=S)
