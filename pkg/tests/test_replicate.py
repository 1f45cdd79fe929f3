from fractions import Fraction

import pytest

from stgscale.errors import LegalityError
from stgscale.model import CompositeNode, Implementation
from stgscale.replicate import (
    build_fork_join,
    build_tree_shape,
    combine_with_fork,
    combined_feed_overhead,
    layer_rates,
    replica_count,
    tree_depth,
    tree_overhead,
)


def brute_force_tree_count(nr, nf):
    """Independent oracle: recursively count split elements for nr leaves.

    One element covers up to nf leaves directly; otherwise it feeds nf
    balanced sub-structures. Counts only the charged elements (a group
    within the fan limit is wired off its parent for free).
    """
    if nr <= nf:
        return 0

    def count(m):
        # one element plus whatever its children need
        if m <= nf:
            return 1
        q, r = divmod(m, nf)
        total = 1
        for i in range(nf):
            part = q + (1 if i < r else 0)
            if part > 1:
                total += count(part)
        return total

    return count(nr)


def test_replica_count_examples():
    assert replica_count(512, 1) == 512
    assert replica_count(7, 7) == 1
    assert replica_count(33, 1) == 33
    assert replica_count(Fraction(5), Fraction(2)) == 3  # ceiling


def test_tree_depth_examples():
    assert tree_depth(16, 4) == 2
    assert tree_depth(1, 4) == 0
    assert tree_depth(5, 2) == 3
    assert tree_depth(4, 4) == 1


def test_tree_overhead_examples():
    assert tree_overhead(16, 4) == 5
    assert tree_overhead(4, 4) == 0
    assert tree_overhead(64, 4) == 21
    assert tree_overhead(512, 4) == 341


@pytest.mark.parametrize("nf", [2, 3, 4])
@pytest.mark.parametrize("h", [1, 2, 3, 4])
def test_full_tree_matches_geometric_sum(nf, h):
    nr = nf ** h
    expected = 0 if nr <= nf else sum(nf ** i for i in range(h))
    assert tree_overhead(nr, nf) == expected
    assert tree_overhead(nr, nf) == brute_force_tree_count(nr, nf)


@pytest.mark.parametrize("nf", [2, 3, 4])
def test_pruned_trees_match_brute_force(nf):
    for nr in range(1, 200):
        assert tree_overhead(nr, nf) == brute_force_tree_count(nr, nf), nr


def test_build_fork_join_encoding_case():
    node = CompositeNode("enc", (1,), (1,), stateless=True)
    impl = Implementation("enc", "v1", 22, 512, "library")
    plan = build_fork_join(node, impl, 512, 4)
    assert plan.forks[0].depth == 5
    assert plan.fork_nodes == 341
    assert plan.join_nodes == 341
    assert plan.overhead_area == 682


def test_build_fork_join_single_replica():
    node = CompositeNode("x", (1,), (1,), stateless=True)
    impl = Implementation("x", "v1", 1, 1, "library")
    plan = build_fork_join(node, impl, 1, 4)
    assert plan.overhead_area == 0
    assert plan.forks == () and plan.joins == ()


def test_stateful_replication_rejected():
    node = CompositeNode("x", (1,), (1,), stateless=False)
    impl = Implementation("x", "v1", 1, 1, "library")
    with pytest.raises(LegalityError):
        build_fork_join(node, impl, 2, 4)


def test_layer_rates():
    # stream of one token every 2 cycles through 2 layers of fan 4,
    # feeding consumers of inverse throughput 32
    rates = layer_rates(Fraction(2), 4, 2)
    assert rates == [(Fraction(2), Fraction(8)), (Fraction(8), Fraction(32))]


@pytest.mark.parametrize("nf", [2, 3, 4])
@pytest.mark.parametrize("h", [1, 2, 3, 4])
def test_layer_rate_self_consistency(nf, h):
    # v_s * nf^(k-1) == v_d / nf^(h+1-k) exactly when v_d = v_s * nf^h
    v_s = Fraction(3, 7)
    v_d = v_s * nf ** h
    for k, (v_in, v_out) in enumerate(layer_rates(v_s, nf, h), start=1):
        assert v_in == v_s * nf ** (k - 1)
        assert v_in == v_d / nf ** (h + 1 - k)
        assert v_out == v_in * nf


def _combine(nr, nf, producer_entries, v_stream=1, producer_v=None):
    node = CompositeNode("s", (1,), (1,), stateless=True)
    lib = [Implementation("s", f"v{i}", a, ii, "library")
           for i, (a, ii) in enumerate(producer_entries, start=1)]
    current = lib[0]
    return combine_with_fork(lib, current, 1, consumer_v=nr * v_stream,
                             nr=nr, nf=nf, v_stream=Fraction(v_stream),
                             producer_node=node)


def test_combine_sixteen_over_four():
    combo = _combine(16, 4, [(512, 1), (128, 4)])
    assert combo is not None
    assert combo.producer_replicas == 4
    assert combo.new_overhead == 1        # the dissolved feed keeps a root
    assert combo.saved_nodes == 4         # one full leaf layer
    assert tree_overhead(16, 4) - combo.new_overhead == 4
    # saving the leaf layer is 4 of 5 nodes: at fan 4 that is 80%
    assert Fraction(combo.saved_nodes, tree_overhead(16, 4)) == Fraction(4, 5)


@pytest.mark.parametrize("nf", [2, 3, 4])
@pytest.mark.parametrize("h", [2, 3, 4])
def test_combine_saves_leaf_layer_exactly(nf, h):
    nr = nf ** h
    combo = _combine(nr, nf, [(1000, 1), (1, nf ** (h - 1))])
    assert combo is not None
    assert combo.saved_nodes == nf ** (h - 1)
    assert tree_overhead(nr, nf) - combo.new_overhead == combo.saved_nodes


def test_combine_not_applicable_within_fan_limit():
    assert _combine(4, 4, [(512, 1), (128, 4)]) is None


def test_combine_not_applicable_without_fast_entry():
    # no producer implementation can feed a replica group
    combo = _combine(16, 4, [(512, 64)], v_stream=1)
    assert combo is None


def test_combined_feed_overhead_rule():
    assert combined_feed_overhead(1, 4) == 0
    assert combined_feed_overhead(4, 4) == 1
    assert combined_feed_overhead(16, 4) == 5


def test_shape_children_within_fan():
    for nf in (2, 3, 4):
        for nr in (nf + 1, 17, 64, 100):
            shape = build_tree_shape(nr, nf)

            def walk(s):
                assert len(s.children) <= nf
                for c in s.children:
                    if not isinstance(c, int):
                        walk(c)

            walk(shape)
