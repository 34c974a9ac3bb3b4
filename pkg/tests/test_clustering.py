import itertools

import numpy as np
import pytest

from rsmacran.clustering import (GapInstance, build_gap, cluster_and_structure,
                                 gap_objective, nearest_bs_clustering, solve_gap)
from rsmacran.model import ChannelState, generate_channels, generate_topology
from rsmacran.rsma import DecodingStructure


def channels_from(h, sigma2=1.0, tau=1.0):
    B, K = h.shape[:2]
    return ChannelState(h=h, outage_mask=np.zeros((B, K), bool),
                        noise_power=sigma2, bandwidth=tau)


def random_channels(seed, B, K, L=2):
    rng = np.random.default_rng(seed)
    h = rng.standard_normal((B, K, L)) + 1j * rng.standard_normal((B, K, L))
    return channels_from(h)


def chain_structure(K):
    decoders = [tuple(range(K)) for _ in range(K)]
    return DecodingStructure(decoders=decoders, order=[tuple(range(K))] * K)


# ---------------------------------------------------------------------------
# benefits
# ---------------------------------------------------------------------------

def test_build_gap_outaged_link_zero_benefit():
    ch = random_channels(0, 2, 3)
    ch.h[1, 2, :] = 0
    inst = build_gap(ch, chain_structure(3), 2, 6)
    assert inst.benefit_p[1, 2] == 0.0


def test_build_gap_self_decoder_equals_private():
    ch = random_channels(1, 2, 3)
    ds = DecodingStructure(decoders=[(0,), (1,), (2,)], order=[(0,), (1,), (2,)])
    inst = build_gap(ch, ds, 2, 6)
    assert np.allclose(inst.benefit_c, inst.benefit_p)


def test_build_gap_matches_norms():
    ch = random_channels(2, 3, 4)
    ds = chain_structure(4)
    inst = build_gap(ch, ds, 2, 8)
    for b in range(3):
        for k in range(4):
            assert inst.benefit_p[b, k] == pytest.approx(
                np.sum(np.abs(ch.h[b, k]) ** 2), rel=1e-12)
            assert inst.benefit_c[b, k] == pytest.approx(
                sum(np.sum(np.abs(ch.h[b, i]) ** 2) for i in range(4)), rel=1e-12)


# ---------------------------------------------------------------------------
# exhaustive oracle: enumerate all assignments pairwise over (p, c) states
# ---------------------------------------------------------------------------

def enumerate_optimum(inst):
    """Exact optimum by enumerating the 3 feasible states of each (b, k)
    pair (neither / private / common), which already encodes nu_p + nu_c <= 1."""
    B, K = inst.num_bs, inst.num_users
    pairs = [(b, k) for b in range(B) for k in range(K)]
    best = -np.inf
    for states in itertools.product((0, 1, 2), repeat=len(pairs)):
        nu_p = np.zeros((B, K), bool)
        nu_c = np.zeros((B, K), bool)
        for (b, k), s in zip(pairs, states):
            if s == 1:
                nu_p[b, k] = True
            elif s == 2:
                if not inst.common_active[k]:
                    break
                nu_c[b, k] = True
        else:
            if np.any(nu_p.sum(axis=0) > inst.max_bs_per_message):
                continue
            if np.any(nu_c.sum(axis=0) > inst.max_bs_per_message):
                continue
            if np.any((nu_p.sum(axis=1) + nu_c.sum(axis=1)) > inst.max_messages_per_bs):
                continue
            val = float(np.sum(inst.benefit_p[nu_p]) + np.sum(inst.benefit_c[nu_c]))
            best = max(best, val)
    return best


@pytest.mark.parametrize("seed", range(12))
def test_solve_gap_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    B = int(rng.integers(1, 3))
    K = int(rng.integers(1, 4))
    ch = random_channels(seed + 50, B, K)
    ds = chain_structure(K)
    limits = (int(rng.integers(1, B + 1)), int(rng.integers(1, 2 * K + 1)))
    inst = build_gap(ch, ds, *limits)
    cl = solve_gap(inst)
    assert gap_objective(inst, cl) == enumerate_optimum(inst)


def test_solve_gap_single_pair_picks_larger_benefit():
    # B=1, K=1 with the shared-BS rule: only one of the two messages is served
    inst = GapInstance(benefit_p=np.array([[2.0]]), benefit_c=np.array([[3.0]]),
                       common_active=np.array([True]),
                       max_bs_per_message=2, max_messages_per_bs=2)
    cl = solve_gap(inst)
    assert not cl.serves_p[0, 0] and cl.serves_c[0, 0]
    inst2 = GapInstance(benefit_p=np.array([[3.0]]), benefit_c=np.array([[2.0]]),
                        common_active=np.array([True]),
                        max_bs_per_message=2, max_messages_per_bs=2)
    cl2 = solve_gap(inst2)
    assert cl2.serves_p[0, 0] and not cl2.serves_c[0, 0]


def test_solve_gap_unconstrained_greedy():
    # loose limits: each message lands on its best BSs up to the cap
    ch = random_channels(3, 3, 2)
    ds = DecodingStructure(decoders=[(0,), (1,)], order=[(0,), (1,)])
    inst = build_gap(ch, ds, 3, 100)
    cl = solve_gap(inst)
    # with benefit_c == benefit_p, and the pair rule, the solver must pick for
    # every (b, k) the message with max benefit -> all pairs active
    for k in range(2):
        assert cl.serves_p[:, k].sum() + cl.serves_c[:, k].sum() >= 3


def test_solve_gap_constraints_hold():
    for seed in range(8):
        ch = random_channels(seed + 200, 3, 4)
        inst = build_gap(ch, chain_structure(4), 2, 3)
        cl = solve_gap(inst)
        assert np.all(cl.serves_p.sum(axis=0) <= 2)
        assert np.all(cl.serves_c.sum(axis=0) <= 2)
        assert np.all(cl.serves_p.sum(axis=1) + cl.serves_c.sum(axis=1) <= 3)
        assert not np.any(cl.serves_p & cl.serves_c)


def test_solve_gap_outaged_bs_unused():
    ch = random_channels(4, 3, 3)
    ch.h[1] = 0.0
    inst = build_gap(ch, chain_structure(3), 2, 6)
    cl = solve_gap(inst)
    assert not cl.serves_p[1].any() and not cl.serves_c[1].any()


def test_solve_gap_infeasible_limits_flags_degenerate():
    ch = random_channels(5, 2, 2)
    inst = build_gap(ch, chain_structure(2), 1, 0)
    cl = solve_gap(inst)
    assert cl.degenerate
    assert not cl.serves_p.any() and not cl.serves_c.any()


def test_solve_gap_deterministic():
    ch = random_channels(6, 3, 4)
    inst = build_gap(ch, chain_structure(4), 2, 8)
    a = solve_gap(inst)
    b = solve_gap(inst)
    assert np.array_equal(a.serves_p, b.serves_p)
    assert np.array_equal(a.serves_c, b.serves_c)


def test_nearest_bs_bootstrap():
    ch = random_channels(7, 3, 2)
    cl = nearest_bs_clustering(ch)
    norms = np.sum(np.abs(ch.h) ** 2, axis=2)
    for k in range(2):
        assert cl.serves_p[np.argmax(norms[:, k]), k]
        assert cl.serves_p[:, k].sum() == 1
        assert cl.serves_c[:, k].sum() == 1
        assert not np.any(cl.serves_p[:, k] & cl.serves_c[:, k])


def test_cluster_and_structure_pipeline():
    topo = generate_topology(11, B=3, K=4, L=2, area_side=800.0, p_max=0.631,
                             c_max=50e6, tau=10e6, noise_psd=10 ** (-19.8))
    ch = generate_channels(topo, 11)
    cl, ds = cluster_and_structure(ch, "RSMA", topo.p_max, 2, 8)
    assert not cl.degenerate
    assert all(cl.serves_p[:, k].any() for k in range(4))
    for k in range(4):
        assert k in ds.decoders[k]
