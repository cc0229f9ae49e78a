"""Environment construction, predicates, and literal parsing."""

from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from erwlab.environments import (
    CookieEnvironment,
    EnvKind,
    format_env,
    make_bounded,
    make_custom_tail,
    make_periodic,
    parse_env,
)


probs = st.floats(min_value=0.01, max_value=0.99, allow_nan=False)
periods = st.lists(probs, min_size=1, max_size=8)


def test_cookie_at_periodic_wraps():
    env = make_periodic((0.9, 0.1))
    assert env.cookie_at(1) == 0.9
    assert env.cookie_at(2) == 0.1
    assert env.cookie_at(3) == 0.9
    assert env.cookie_at(200) == 0.1


def test_cookie_at_tail_saturates():
    env = make_custom_tail((0.9, 0.7), 0.6)
    assert env.cookie_at(1) == 0.9
    assert env.cookie_at(2) == 0.7
    assert env.cookie_at(3) == 0.6
    assert env.cookie_at(1000) == 0.6


def test_cookie_index_starts_at_one():
    env = make_periodic((0.5,))
    with pytest.raises(ValueError):
        env.cookie_at(0)


def test_bounded_constructor_fixes_tail_at_half():
    env = make_bounded((0.9, 0.8))
    assert env.kind is EnvKind.BOUNDED
    assert env.tail_value == 0.5
    assert env.cookie_at(17) == 0.5


def test_predicates_on_reference_envs():
    p = make_periodic((0.9, 0.1)).predicates()
    assert p.elliptic and p.periodic and p.non_degenerate
    assert not p.positive and not p.bounded

    b = make_bounded((0.9, 0.9)).predicates()
    assert b.bounded and b.positive and b.non_degenerate
    assert not b.periodic

    t = make_custom_tail((0.2,), 0.7).predicates()
    assert t.non_degenerate and not t.bounded and not t.positive


def test_degenerate_alternation_is_still_non_degenerate():
    # both endpoint values occur infinitely often, so both cookie sums
    # diverge even though no single entry is interior
    env = make_periodic((1.0, 0.0))
    p = env.predicates()
    assert p.non_degenerate
    assert not p.elliptic


def test_constant_one_tail_is_degenerate():
    env = make_custom_tail((0.5,), 1.0)
    assert not env.predicates().non_degenerate


def test_criticality_uses_exact_arithmetic_for_fraction_literals():
    env = parse_env("periodic:9/10,1/10")
    assert env.is_critical()
    assert env.exact_mean_cookie() == Fraction(1, 2)
    # float literals summing to 1 still count as critical within tolerance
    assert parse_env("periodic:0.9,0.1").is_critical()
    assert not parse_env("periodic:0.9,0.2").is_critical()


def test_parse_and_format_round_trip():
    for text in (
        "periodic:0.9,0.1",
        "bounded:0.9,0.9",
        "tail:0.9,0.7@0.5",
        "periodic:9/10,1/10",
    ):
        env = parse_env(text)
        again = parse_env(format_env(env))
        assert again == env


def test_parse_rejects_unknown_kind_and_bad_values():
    with pytest.raises(ValueError):
        parse_env("weird:0.5")
    with pytest.raises(ValueError):
        parse_env("periodic:1.5")
    with pytest.raises(ValueError):
        parse_env("tail:0.5")  # missing @tail


@given(periods)
def test_mirror_is_an_involution(values):
    env = make_periodic(tuple(values))
    back = env.mirror().mirror()
    assert back.period == env.period
    for i in range(1, env.period + 1):
        assert back.cookie_at(i) == pytest.approx(env.cookie_at(i), abs=1e-15)


@given(periods)
def test_mirror_flips_mean_cookie(values):
    env = make_periodic(tuple(values))
    assert env.mirror().mean_cookie() == pytest.approx(
        1.0 - env.mean_cookie(), abs=1e-12
    )


@given(periods, st.integers(min_value=1, max_value=8))
def test_shift_relabels_cookie_sequence(values, j):
    env = make_periodic(tuple(values))
    if j > env.period:
        j = 1 + (j - 1) % env.period
    shifted = env.shift(j)
    for i in range(1, 3 * env.period):
        assert shifted.cookie_at(i) == env.cookie_at(i + j - 1)


def test_shift_rejects_non_periodic():
    with pytest.raises(ValueError):
        make_bounded((0.9,)).shift(1)


def test_environment_is_hashable_and_frozen():
    env = make_periodic((0.7, 0.3))
    assert env in {env}
    with pytest.raises(Exception):
        env.params = (0.5,)  # type: ignore[misc]
