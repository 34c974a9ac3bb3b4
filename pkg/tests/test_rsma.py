import numpy as np
import pytest

from rsmacran.errors import UsageError
from rsmacran.model import ChannelState, generate_channels, generate_topology
from rsmacran.rsma import (Beamformers, Clustering, DecodingStructure,
                           RateAllocation, achievable_rates,
                           build_decoding_structure, fronthaul_usage,
                           mrt_beamformers, power_usage, realized_clustering,
                           sinr_common, sinr_private, stream_gains)


def random_network(seed, B=2, K=3, L=2, sigma2=1.0, tau=1.0):
    rng = np.random.default_rng(seed)
    h = rng.standard_normal((B, K, L)) + 1j * rng.standard_normal((B, K, L))
    ch = ChannelState(h=h, outage_mask=np.zeros((B, K), bool),
                      noise_power=sigma2, bandwidth=tau)
    w = Beamformers(
        w_p=rng.standard_normal((K, B, L)) + 1j * rng.standard_normal((K, B, L)),
        w_c=rng.standard_normal((K, B, L)) + 1j * rng.standard_normal((K, B, L)),
    )
    return ch, w


def full_clustering(B, K):
    return Clustering(serves_p=np.ones((B, K), bool), serves_c=np.ones((B, K), bool))


# ---------------------------------------------------------------------------
# oracle: explicit SIC walk over the received signal, written independently
# ---------------------------------------------------------------------------

def sic_oracle(ch, w, ds, k):
    """Return ({i: common SINR at k}, private SINR at k) by simulating the
    cancellation chain term by term."""
    h_k = np.concatenate([ch.h[b, k] for b in range(ch.num_bs)])
    K = ch.num_users
    pow_p = {j: abs(np.vdot(h_k, np.concatenate([w.w_p[j, b] for b in range(ch.num_bs)]))) ** 2
             for j in range(K)}
    pow_c = {j: abs(np.vdot(h_k, np.concatenate([w.w_c[j, b] for b in range(ch.num_bs)]))) ** 2
             for j in range(K)}
    # before any decoding: everything except the current message interferes
    remaining_common = set(range(K))
    commons = {}
    for i in ds.order[k]:
        interf = ch.noise_power
        interf += sum(pow_p[j] for j in range(K))
        interf += sum(pow_c[l] for l in remaining_common if l != i)
        commons[i] = pow_c[i] / interf
        remaining_common.discard(i)
    interf = ch.noise_power
    interf += sum(pow_p[j] for j in range(K) if j != k)
    interf += sum(pow_c[l] for l in remaining_common)
    private = pow_p[k] / interf
    return commons, private


def chain_structure(K):
    """Every user decodes every common message, in index order."""
    decoders = [tuple(range(K)) for _ in range(K)]
    return DecodingStructure(decoders=decoders,
                             order=[tuple(range(K)) for _ in range(K)])


def test_sinr_private_zero_beamformers():
    ch, w = random_network(0)
    w.w_p[:] = 0
    w.w_c[:] = 0
    ds = chain_structure(3)
    assert sinr_private(0, w, ch, ds) == 0.0


def test_sinr_private_single_user_no_interference():
    ch, w = random_network(1, B=1, K=1, L=2, sigma2=0.5)
    w.w_c[:] = 0
    ds = DecodingStructure(decoders=[(0,)], order=[(0,)])
    h = ch.aggregate(0)
    expected = abs(np.vdot(h, w.aggregate(0, "p"))) ** 2 / 0.5
    assert sinr_private(0, w, ch, ds) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_sinr_private_matches_term_oracle(seed):
    ch, w = random_network(seed, B=2, K=2, L=2, sigma2=0.7)
    ds = chain_structure(2)
    for k in range(2):
        _, prv = sic_oracle(ch, w, ds, k)
        assert sinr_private(k, w, ch, ds) == pytest.approx(prv, rel=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_sinr_common_matches_sic_oracle(seed):
    # K=3 with staggered decoder sets and a nontrivial order
    rng = np.random.default_rng(seed + 100)
    ch, w = random_network(seed, B=2, K=3, L=2, sigma2=0.3)
    decoders = [(0, 1, 2), (1, 2), (2,)]
    order = [(0,), (1, 0), (2, 1, 0)]
    ds = DecodingStructure(decoders=decoders, order=order)
    for k in range(3):
        commons, prv = sic_oracle(ch, w, ds, k)
        for i in ds.decodes[k]:
            assert sinr_common(i, k, w, ch, ds) == pytest.approx(commons[i], rel=1e-9)
        assert sinr_private(k, w, ch, ds) == pytest.approx(prv, rel=1e-9)


def test_sinr_common_last_decoded_boundary():
    # for the last message in the order, only never-decoded commons remain
    ch, w = random_network(5, B=1, K=3, L=2, sigma2=0.4)
    ds = DecodingStructure(decoders=[(0, 1), (1,), ()], order=[(0,), (1, 0), ()])
    # message 0 is decoded last at user 1: only the never-decoded common 2 is left
    h1 = ch.aggregate(1)
    num = abs(np.vdot(h1, w.aggregate(0, "c"))) ** 2
    interf = ch.noise_power + sum(abs(np.vdot(h1, w.aggregate(j, "p"))) ** 2
                                  for j in range(3))
    interf += abs(np.vdot(h1, w.aggregate(2, "c"))) ** 2
    assert sinr_common(0, 1, w, ch, ds) == pytest.approx(num / interf, rel=1e-12)


def test_sinr_common_requires_membership():
    ch, w = random_network(2)
    ds = DecodingStructure(decoders=[(0,), (1,), (2,)],
                           order=[(0,), (1,), (2,)])
    with pytest.raises(UsageError):
        sinr_common(0, 1, w, ch, ds)


def test_sinr_common_single_stream_no_private():
    ch, w = random_network(3, B=1, K=2, L=2, sigma2=0.9)
    w.w_p[:] = 0
    w.w_c[1] = 0
    ds = DecodingStructure(decoders=[(0, 1), ()], order=[(0,), (0,)])
    h0 = ch.aggregate(0)
    expected = abs(np.vdot(h0, w.aggregate(0, "c"))) ** 2 / 0.9
    assert sinr_common(0, 0, w, ch, ds) == pytest.approx(expected, rel=1e-12)


def test_monotone_sic_cancelling_more_helps_private():
    # decoding one extra common message never lowers the private SINR
    ch, w = random_network(7, B=2, K=3, L=2)
    ds_small = DecodingStructure(decoders=[(0,), (1,), (2,)],
                                 order=[(0,), (1,), (2,)])
    ds_big = DecodingStructure(decoders=[(0,), (0, 1), (2,)],
                               order=[(0, 1), (1,), (2,)])
    assert sinr_private(0, w, ch, ds_big) >= sinr_private(0, w, ch, ds_small)


def test_achievable_rates_zero_gains():
    ch, w = random_network(4)
    w.w_p[:] = 0
    w.w_c[:] = 0
    ds = chain_structure(3)
    r = achievable_rates(w, ch, ds)
    assert np.all(r.r_p == 0) and np.all(r.r_c == 0)


def test_achievable_common_single_decoder():
    ch, w = random_network(6, K=2)
    ds = DecodingStructure(decoders=[(0,), (1,)], order=[(0,), (1,)])
    r = achievable_rates(w, ch, ds)
    g = sinr_common(0, 0, w, ch, ds)
    assert r.r_c[0] == pytest.approx(ch.bandwidth * np.log2(1 + g), rel=1e-12)


def test_achievable_common_min_over_decoders():
    ch, w = random_network(8, K=2)
    ds = DecodingStructure(decoders=[(0, 1), ()], order=[(0,), (0,)])
    r = achievable_rates(w, ch, ds)
    g0 = sinr_common(0, 0, w, ch, ds)
    g1 = sinr_common(0, 1, w, ch, ds)
    expected = ch.bandwidth * min(np.log2(1 + g0), np.log2(1 + g1))
    assert r.r_c[0] == pytest.approx(expected, rel=1e-12)
    assert r.r_c[1] == 0.0


def test_outaged_user_gets_zero_private_rate():
    ch, w = random_network(9, K=3)
    ch.h[:, 1, :] = 0
    ds = chain_structure(3)
    r = achievable_rates(w, ch, ds)
    assert r.r_p[1] == 0.0


def test_tin_mode_reduces_to_private_only():
    ch, w = random_network(10, K=3)
    ds = build_decoding_structure(ch, full_clustering(2, 3), "TIN")
    assert all(len(m) == 0 for m in ds.decoders)
    # in TIN every common beamformer is treated as interference; with zero
    # common beamformers the rates match a classical private-only model
    w.w_c[:] = 0
    r = achievable_rates(w, ch, ds)
    for k in range(3):
        h = ch.aggregate(k)
        num = abs(np.vdot(h, w.aggregate(k, "p"))) ** 2
        den = ch.noise_power + sum(abs(np.vdot(h, w.aggregate(j, "p"))) ** 2
                                   for j in range(3) if j != k)
        assert r.r_p[k] == pytest.approx(ch.bandwidth * np.log2(1 + num / den),
                                         rel=1e-9)
        assert r.r_c[k] == 0.0


def test_scm_mode_single_super_common():
    ch, _ = random_network(11, K=3)
    ds = build_decoding_structure(ch, full_clustering(2, 3), "SCM")
    assert ds.decoders[0] == (0, 1, 2)
    assert ds.decoders[1] == () and ds.decoders[2] == ()
    assert all(ds.decodes[k] == (0,) for k in range(3))


def test_rsma_mode_single_user():
    ch, _ = random_network(12, B=1, K=1)
    ds = build_decoding_structure(ch, full_clustering(1, 1), "RSMA")
    assert ds.decoders[0] == (0,)
    assert ds.decodes[0] == (0,)
    assert ds.decoded_after(0, 0) == ()


def test_rsma_mode_membership_consistency():
    topo = generate_topology(3, B=3, K=5, L=2, area_side=800.0, p_max=0.631,
                             c_max=50e6, tau=10e6, noise_psd=10 ** (-19.8))
    ch = generate_channels(topo, 3)
    ds = build_decoding_structure(ch, full_clustering(3, 5), "RSMA",
                                  p_max=topo.p_max)
    for k in range(5):
        assert k in ds.decoders[k]
        assert k in ds.decodes[k]
        assert len(ds.decoders[k]) <= 3           # own + q=2 strongest victims
        for j in ds.decoders[k]:
            assert k in ds.decodes[j]


def test_fronthaul_usage_empty_and_direct_sum():
    B, K = 2, 3
    empty = Clustering(serves_p=np.zeros((B, K), bool), serves_c=np.zeros((B, K), bool))
    rates = RateAllocation(r_p=np.array([3.0, 0, 0]), r_c=np.array([0, 4.0, 0]))
    assert fronthaul_usage(0, empty, rates) == 0.0
    cl = Clustering(serves_p=np.zeros((B, K), bool), serves_c=np.zeros((B, K), bool))
    cl.serves_p[0, 0] = True
    cl.serves_c[0, 1] = True
    assert fronthaul_usage(0, cl, rates) == pytest.approx(7.0)


def test_fronthaul_matches_nu_recount():
    ch, w = random_network(13)
    rng = np.random.default_rng(0)
    rates = RateAllocation(r_p=rng.random(3), r_c=rng.random(3))
    cl = realized_clustering(w, delta_zero=1e-9)
    for b in range(2):
        manual = sum(rates.r_p[k] for k in range(3)
                     if np.sum(np.abs(w.w_p[k, b]) ** 2) > 1e-9)
        manual += sum(rates.r_c[k] for k in range(3)
                      if np.sum(np.abs(w.w_c[k, b]) ** 2) > 1e-9)
        assert fronthaul_usage(b, cl, rates) == pytest.approx(manual, rel=1e-12)


def test_power_usage_zero_and_unit():
    B, K, L = 2, 3, 2
    w = Beamformers(np.zeros((K, B, L), complex), np.zeros((K, B, L), complex))
    assert power_usage(0, w) == 0.0
    w.w_p[1, 0] = np.array([1.0, 0.0])
    assert power_usage(0, w) == pytest.approx(1.0)
    assert power_usage(1, w) == 0.0


def test_power_usage_monte_carlo_signal_oracle():
    # E||x_b||^2 over unit-variance signal draws equals the block-norm sum
    ch, w = random_network(14, B=2, K=3, L=2)
    rng = np.random.default_rng(42)
    n = 100_000
    b = 0
    blocks = np.concatenate([w.w_p[:, b, :], w.w_c[:, b, :]], axis=0)  # (2K, L)
    s = (rng.standard_normal((n, 6)) + 1j * rng.standard_normal((n, 6))) / np.sqrt(2)
    x = s @ blocks
    mc = np.mean(np.sum(np.abs(x) ** 2, axis=1))
    assert mc == pytest.approx(power_usage(b, w), rel=0.02)


def test_aggregate_blockwise_equivalence():
    ch, w = random_network(15, B=3, K=2, L=2)
    k, j = 0, 1
    agg = np.vdot(ch.aggregate(k), w.aggregate(j, "p"))
    per_block = sum(np.vdot(ch.h[b, k], w.w_p[j, b]) for b in range(3))
    assert agg == pytest.approx(per_block, rel=1e-12)


def test_mrt_power_feasible_and_aligned():
    topo = generate_topology(21, B=2, K=4, L=2, area_side=800.0, p_max=0.631,
                             c_max=50e6, tau=10e6, noise_psd=10 ** (-19.8))
    ch = generate_channels(topo, 21)
    cl = full_clustering(2, 4)
    w = mrt_beamformers(ch, cl, topo.p_max)
    for b in range(2):
        assert power_usage(b, w) <= topo.p_max[b] + 1e-12
    # single user, single BS: the whole budget goes into one aligned block
    cl1 = Clustering(serves_p=np.array([[True]]), serves_c=np.array([[False]]))
    ch1 = ChannelState(h=ch.h[:1, :1, :], outage_mask=np.zeros((1, 1), bool),
                       noise_power=ch.noise_power, bandwidth=ch.bandwidth)
    w1 = mrt_beamformers(ch1, cl1, topo.p_max[:1])
    assert np.linalg.norm(w1.w_p[0, 0]) ** 2 == pytest.approx(topo.p_max[0])
    cosine = abs(np.vdot(w1.w_p[0, 0], ch1.h[0, 0])) / (
        np.linalg.norm(w1.w_p[0, 0]) * np.linalg.norm(ch1.h[0, 0]))
    assert cosine == pytest.approx(1.0)
