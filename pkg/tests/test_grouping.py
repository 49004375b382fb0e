import itertools

import pytest
from hypothesis import given, settings, strategies as st

from cosrsim import grouping, phy
from cosrsim.grouping import PlanError, optimize_plan
from cosrsim.params import SimParams, generate_deployment, make_params, symmetric_example
from oracles import bell_number, brute_force_objective, compatibility_oracle, set_partitions

P10 = make_params({"d_AP-AP": 10})


def test_set_partition_oracle_counts():
    for n in range(7):
        assert sum(1 for _ in set_partitions(list(range(n)))) == bell_number(n)
    assert bell_number(8) == 4140


def _oracle_best(dep, params, max_size):
    compat = compatibility_oracle(dep.ap_positions, dep.sta_positions, dep.association,
                                  params.capture_threshold_db)
    return brute_force_objective(dep.pairs(), compat, params.num_bss, max_size)


@pytest.mark.parametrize("seed,d", [(0, 10), (1, 15), (2, 20), (3, 10), (4, 20)])
@pytest.mark.parametrize("policy", ["UNC", "MAX2"])
def test_optimizer_matches_brute_force(seed, d, policy):
    p = make_params({"d_AP-AP": d})
    dep = generate_deployment(p, seed)
    plan = optimize_plan(dep, p, policy)
    want = _oracle_best(dep, p, 2 if policy == "MAX2" else None)
    assert plan.objective == pytest.approx(want, rel=1e-12, abs=1e-12)


@given(st.integers(0, 10_000), st.sampled_from([10.0, 15.0, 20.0]), st.sampled_from(["UNC", "MAX2"]))
@settings(max_examples=25)
def test_plan_is_valid_partition(seed, d, policy):
    p = make_params({"d_AP-AP": d})
    dep = generate_deployment(p, seed)
    plan = optimize_plan(dep, p, policy)
    assert plan.pairs() == set(dep.pairs())
    assert sum(g.size for g in plan.groups) == dep.num_stas
    rx = phy.rx_power_matrix(dep, p)
    for g in plan.groups:
        assert len(set(g.aps)) == g.size
        if policy == "MAX2":
            assert g.size <= 2
        for (a, s), sinr in zip(g.members, g.per_member_sinr):
            if g.size > 1:
                assert sinr >= p.capture_threshold_db
            assert sinr == pytest.approx(
                phy.sinr_from_rx(rx, s, a, [b for b in g.aps if b != a], p.noise_power_w))


@given(st.integers(0, 10_000))
@settings(max_examples=20)
def test_unc_objective_at_least_max2(seed):
    dep = generate_deployment(P10, seed)
    assert optimize_plan(dep, P10, "UNC").objective >= optimize_plan(dep, P10, "MAX2").objective - 1e-12


def test_plan_is_deterministic_and_digest_stable():
    dep = generate_deployment(P10, 5)
    a, b = optimize_plan(dep, P10, "UNC"), optimize_plan(dep, P10, "UNC")
    assert a.digest() == b.digest() and a.to_lines() == b.to_lines()


def test_transmission_probability_and_quality():
    dep = symmetric_example(make_params({"d_AP-AP": 15}))
    plan = optimize_plan(dep, make_params({"d_AP-AP": 15}), "UNC")
    counts = plan.ap_group_counts()
    assert counts == {0: 2, 1: 2, 2: 2, 3: 2}
    for g, q in zip(plan.groups, plan.qualities):
        assert grouping.transmission_probability(g, counts, SimParams()) == pytest.approx(0.5)
        assert q == pytest.approx(0.5 * 4 * 552)


def test_symmetric_example_forms_two_groups_of_four():
    p = make_params({"d_AP-AP": 15})
    plan = optimize_plan(symmetric_example(p), p, "UNC")
    assert sorted(g.stas for g in plan.groups) == [(0, 2, 4, 6), (1, 3, 5, 7)]
    max2 = optimize_plan(symmetric_example(p), p, "MAX2")
    assert [g.size for g in max2.groups] == [2, 2, 2, 2]


def test_compatibility_is_rechecked_per_subset():
    dep = generate_deployment(P10, 0)
    groups = grouping.enumerate_compatible_groups(dep, P10)
    compat = compatibility_oracle(dep.ap_positions, dep.sta_positions, dep.association)
    found = {g.members for g in groups}
    opts = [[None] + [(a, s) for s in dep.stas_of(a)] for a in range(4)]
    for combo in itertools.product(*opts):
        members = tuple(sorted((m for m in combo if m), key=lambda x: x[1]))
        if members:
            assert (members in found) == (compat(list(members)) is not None)


def test_singleton_plan():
    dep = generate_deployment(P10, 2)
    plan = grouping.singleton_plan(dep, P10)
    assert all(g.size == 1 for g in plan.groups) and len(plan.groups) == 8


def test_duplicate_pairs_rejected():
    dep = generate_deployment(P10, 2)
    g = grouping.singleton_plan(dep, P10).groups
    with pytest.raises(PlanError):
        grouping.GroupPlan("UNC", g + g[:1], (1.0,) * 9, 0.0, 4)


def test_unusable_link_raises():
    p = make_params({"d_AP-AP": 10, "capture_threshold_db": 80})
    with pytest.raises(PlanError):
        optimize_plan(generate_deployment(p, 0), p, "UNC")


def test_unknown_policy():
    with pytest.raises(ValueError):
        optimize_plan(generate_deployment(P10, 0), P10, "MAX3")


def test_plan_export(tmp_path):
    plan = optimize_plan(generate_deployment(P10, 1), P10, "MAX2")
    path = tmp_path / "plan.txt"
    plan.export(path)
    assert path.read_text().count("\n") >= len(plan.groups)
