"""Direct walk simulation: reduced counts, ensembles, crossings.

The reduced occupation-count representation must be trajectory-exact,
ensembles must be reproducible row by row from per-trial substreams,
and the right-crossing counts of the killed walk must follow the same
law as the crossing chain built from exact step draws.
"""

from __future__ import annotations

import numpy as np
import pytest
from scipy import stats

from erwlab.environments import make_bounded, make_periodic
from erwlab.kks import sample_U
from erwlab.seeding import DEFAULT_SEED, TAG_GENERAL, TAG_WALK, substream
from erwlab.walk import (
    edge_crossings,
    ensemble_summary,
    ensemble_walks,
    run_walk,
    run_walk_with_counts,
)

S = DEFAULT_SEED


# ---------------------------------------------------------------------
# single walks
# ---------------------------------------------------------------------


@pytest.mark.parametrize(
    "env",
    [make_periodic((0.9, 0.1)), make_periodic((0.7, 0.3, 0.4)), make_bounded((0.9, 0.8))],
    ids=["per2", "per3", "bounded"],
)
def test_reduced_and_full_counts_walk_the_same_path(env):
    a = run_walk(env, 4_000, substream(S, TAG_GENERAL, 50), count_mode="reduced")
    b = run_walk(env, 4_000, substream(S, TAG_GENERAL, 50), count_mode="full")
    assert a == b


def test_final_position_has_step_parity():
    for steps in (7, 100, 1_001):
        t = run_walk(make_periodic((0.6, 0.4)), steps, substream(S, TAG_GENERAL, 51))
        assert (t.final_position + steps) % 2 == 0
        assert abs(t.final_position) <= t.max_abs_position <= steps


def test_local_times_account_for_every_step():
    env = make_periodic((0.8, 0.3))
    trace, counts = run_walk_with_counts(env, 2_500, substream(S, TAG_GENERAL, 52))
    assert sum(counts.values()) == 2_500 + 1
    assert counts.get(trace.final_position, 0) >= 1
    assert len(counts) >= trace.distinct_sites - 1


def test_recording_grid_shape():
    t = run_walk(
        make_periodic((0.5, 0.5)), 1_000, substream(S, TAG_GENERAL, 53), record_every=100
    )
    assert t.positions is not None
    assert t.positions.shape == (11,)
    assert t.positions[0] == 0
    assert t.positions[-1] == t.final_position


def test_run_walk_argument_validation():
    env = make_periodic((0.5, 0.5))
    rng = substream(S, TAG_GENERAL, 54)
    with pytest.raises(ValueError):
        run_walk(env, -1, rng)
    with pytest.raises(ValueError):
        run_walk(env, 10, rng, count_mode="compressed")


# ---------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------


def test_ensemble_rows_reproduce_scalar_substream_runs():
    env = make_periodic((0.9, 0.1))
    traces = ensemble_walks(env, 500, 8, master_seed=S)
    for i in (0, 3, 7):
        solo = run_walk(env, 500, substream(S, TAG_WALK, i))
        assert traces[i] == solo


def test_thread_count_does_not_change_results():
    env = make_periodic((0.7, 0.3))
    one = ensemble_walks(env, 300, 2_500, master_seed=S, threads=1)
    two = ensemble_walks(env, 300, 2_500, master_seed=S, threads=2)
    assert one == two


def test_strong_right_drift_shows_in_the_ensemble():
    env = make_periodic((0.9, 0.9))
    summary = ensemble_summary(ensemble_walks(env, 2_000, 300, master_seed=S))
    assert summary.fraction_final_positive > 0.95
    assert summary.mean_final_position > 100
    assert summary.trials == 300 and summary.steps == 2_000


def test_mirror_negates_the_final_position_law():
    env = make_periodic((0.9, 0.9, 0.1, 0.1))
    a = ensemble_walks(env, 2_000, 400, master_seed=S)
    b = ensemble_walks(env.mirror(), 2_000, 400, master_seed=S + 7)
    fa = np.array([t.final_position for t in a], dtype=float)
    fb = np.array([t.final_position for t in b], dtype=float)
    se = np.sqrt(fa.var(ddof=1) / len(fa) + fb.var(ddof=1) / len(fb))
    assert abs(fa.mean() + fb.mean()) < 4.0 * se


def test_summary_rejects_empty_input():
    with pytest.raises(ValueError):
        ensemble_summary([])


# ---------------------------------------------------------------------
# crossings versus the chain
# ---------------------------------------------------------------------


def test_edge_crossings_match_chain_law():
    # For the walk killed on first hitting -1, the right-step counts at
    # sites 0 and 1 follow the first two chain values Z_1 = U(1) and
    # Z_2 = U(Z_1).  Subcritical pile, so no trial is censored.
    env = make_periodic((0.3, 0.3))
    n = 10_000
    counts, censored = edge_crossings(env, n, 100_000, edges=(0, 1), master_seed=S)
    assert int(censored.sum()) == 0

    rng = substream(S, TAG_GENERAL, 13)
    z1 = np.empty(n, dtype=np.int64)
    z2 = np.empty(n, dtype=np.int64)
    for i in range(n):
        a = sample_U(env, 1, rng)
        z1[i] = a
        z2[i] = sample_U(env, a, rng) if a > 0 else 0

    d1 = stats.ks_2samp(counts[:, 0], z1, method="asymp")
    d2 = stats.ks_2samp(counts[:, 1], z2, method="asymp")
    assert d1.pvalue > 0.01
    assert d2.pvalue > 0.01


def test_crossing_counts_censor_at_the_cap():
    # strong right drift rarely reaches -1, so short caps censor
    env = make_periodic((0.9, 0.9))
    counts, censored = edge_crossings(env, 200, 500, master_seed=S)
    assert counts.shape == (200, 1)
    assert censored.mean() > 0.5


def test_first_hit_frequency_matches_chain_absorption():
    # P(walk ever hits -1) equals P(U(1) = 0) + higher-order terms; for
    # the subcritical pile it is 1, visible already at a modest cap
    env = make_periodic((0.3, 0.3))
    traces = ensemble_walks(env, 3_000, 300, master_seed=S)
    frac = np.mean([t.first_hit_minus1 is not None for t in traces])
    assert frac == 1.0
