import numpy as np
import pytest

from sofafl.data import Samples, Shard
from sofafl.sharing import SharingConfig, distribute, gather, share_count, share_round, sharing_summary
from sofafl.topology import TreeTopology


def make_shard(client, n_train, n_test=0, dim=2):
    ids = np.column_stack([np.full(n_train + n_test, client), np.arange(n_train + n_test)])
    X = np.random.default_rng(client).normal(size=(n_train + n_test, dim))
    y = np.zeros(n_train + n_test, dtype=int)
    return Shard(client, Samples(ids[:n_train], X[:n_train], y[:n_train]),
                 Samples(ids[n_train:], X[n_train:], y[n_train:]))


def flat_tree(n):
    tree = TreeTopology()
    ids = [tree.add_client(np.zeros(1), 10) for _ in range(n)]
    tree.root = tree.add_cluster(ids)
    return tree


def balanced_tree(groups, per_group):
    tree = TreeTopology()
    ids = [tree.add_client(np.zeros(1), 10) for _ in range(groups * per_group)]
    tops = [tree.add_cluster(ids[g * per_group:(g + 1) * per_group]) for g in range(groups)]
    tree.root = tree.add_cluster(tops)
    return tree


def test_share_count():
    assert share_count(0.1, 10) == 1
    assert share_count(0.1, 30) == 3
    assert share_count(0.1, 31) == 4
    assert share_count(0.01, 5) == 1
    assert share_count(0.5, 0) == 0


def test_two_client_hand_trace():
    tree = flat_tree(2)
    shards = [make_shard(0, 10), make_shard(1, 10)]
    pools = gather(tree, shards, SharingConfig(0.1, "fresh", seed=0), round_index=1)
    assert len(pools[tree.root]) == 2
    out = distribute(tree, shards, pools)
    for shard in out:
        assert len(shard.received) == 1
        assert shard.received.ids[0, 0] != shard.client


def test_off_mode_empties_everything():
    tree = flat_tree(3)
    shards = [make_shard(i, 10) for i in range(3)]
    assert gather(tree, shards, SharingConfig(0.1, "off"), 1) == {}
    assert all(len(s.received) == 0 for s in share_round(tree, shards, SharingConfig(0.1, "off"), 1))
    assert gather(tree, shards, SharingConfig(0.0, "fresh"), 1) == {}


def test_fixed_mode_repeats_and_fresh_does_not():
    tree = balanced_tree(2, 3)
    shards = [make_shard(i, 40) for i in range(6)]
    fixed = SharingConfig(0.2, "fixed", seed=5)
    a, b = gather(tree, shards, fixed, 3), gather(tree, shards, fixed, 7)
    assert a.keys() == b.keys()
    for k in a:
        np.testing.assert_array_equal(a[k].ids, b[k].ids)
    fresh = SharingConfig(0.2, "fresh", seed=5)
    c, d = gather(tree, shards, fresh, 3), gather(tree, shards, fresh, 7)
    assert any(not np.array_equal(c[k].ids, d[k].ids) for k in c)


def test_pools_are_sorted_and_unique():
    tree = balanced_tree(2, 2)
    shards = [make_shard(i, 25) for i in range(4)]
    for pool in gather(tree, shards, SharingConfig(0.3, "fresh", seed=1), 2).values():
        keys = pool.keys()
        assert np.all(np.diff(keys) > 0)


def test_received_is_replaced_not_accumulated():
    tree = balanced_tree(2, 3)
    shards = [make_shard(i, 30) for i in range(6)]
    cfg = SharingConfig(0.2, "fresh", seed=0)
    sizes = []
    for r in range(1, 8):
        pools = gather(tree, shards, cfg, r)
        shards = distribute(tree, shards, pools)
        bound = len(pools[tree.root]) + max(len(pools[c]) for c in tree[tree.root].children)
        sizes.append(max(len(s.received) for s in shards))
        assert sizes[-1] <= bound
    assert max(sizes) < 30


def test_no_test_sample_ever_shared():
    tree = balanced_tree(2, 3)
    shards = [make_shard(i, 20, n_test=5) for i in range(6)]
    test_keys = np.concatenate([s.test.keys() for s in shards])
    for r in range(10):
        shards = share_round(tree, shards, SharingConfig(0.5, "fresh", seed=2), r)
        for s in shards:
            assert not np.isin(s.received.keys(), test_keys).any()
            assert not np.isin(s.received.keys(), s.owned.keys()).any()


def test_same_cluster_samples_dominate():
    tree = balanced_tree(2, 4)
    shards = [make_shard(i, 30) for i in range(8)]
    same = cross = 0
    for r in range(1, 21):
        shards = share_round(tree, shards, SharingConfig(0.1, "fresh", seed=0), r)
        for row in sharing_summary(tree, shards):
            same += row["n_same_cluster"]
            cross += row["n_cross_cluster"]
    assert same >= cross > 0
