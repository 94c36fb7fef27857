import math

import numpy as np
import pytest

from uav_multiway import matcore
from uav_multiway import schemes as sch
from uav_multiway.allocation import StreamAllocation, allocate_streams, dof_formula
from uav_multiway.channel import (LINKS, NODES, AntennaConfig, ChannelSet,
                                  other_nodes, sample_channel_set, third_node)
from uav_multiway.errors import InfeasibleAllocationError

CFG = AntennaConfig(5, 3, 2)
DEFAULT_CONFIGS = [(5, 3, 2), (4, 3, 2), (3, 3, 3)]


def const_channels(cfg, value=1.0, zero=()):
    def fn(i, j, r, c):
        return np.zeros((r, c)) if (i, j) in zero else value * np.ones((r, c))
    return ChannelSet.from_function(cfg, fn)


def identity_channels(cfg):
    return ChannelSet.from_function(cfg, lambda i, j, r, c: np.eye(r, c))


def make_alloc(zf=None, ia=None, align=None):
    z = {l: 0 for l in LINKS}
    a = {l: 0 for l in LINKS}
    z.update(zf or {})
    a.update(ia or {})
    b = {i: 0 for i in NODES}
    b.update(align or {})
    return StreamAllocation(z, a, b)


def draw(cfg, seed):
    return sample_channel_set(AntennaConfig(*cfg), np.random.default_rng(seed))


# -- beamformers -----------------------------------------------------------------

def test_zf_null_space_dimension_and_residual(rng):
    ch = sample_channel_set(CFG, rng)
    assert matcore.null_space_basis(ch[(1, 3)]).shape[1] == 3
    alloc = allocate_streams(CFG, 0.7)
    zf = sch.build_zf_beamformers(ch, alloc)
    V = zf[(2, 1)]
    assert V.shape == (3, 1)
    assert np.linalg.norm(ch[(2, 3)] @ V) <= 1e-9 * np.linalg.norm(ch[(2, 3)], 2)
    np.testing.assert_allclose(V.conj().T @ V, np.eye(1), atol=1e-12)


def test_zf_request_beyond_null_space_raises(rng):
    ch = sample_channel_set(CFG, rng)
    with pytest.raises(InfeasibleAllocationError):
        sch.build_zf_beamformers(ch, make_alloc(zf={(3, 1): 1}))
    with pytest.raises(InfeasibleAllocationError):
        sch.build_zf_beamformers(ch, make_alloc(zf={(1, 2): 4}))


def test_no_alignment_when_uav_dominates():
    a = allocate_streams(CFG, 0.7)
    assert a.align[1] == 0
    assert max(CFG.M2 + CFG.M3 - CFG.M1, 0) == 0


def test_partial_alignment_occupies_three_of_four(rng):
    cfg = AntennaConfig(4, 3, 2)
    alloc = make_alloc(ia={(2, 3): 2, (3, 2): 2}, align={1: 1})
    assert alloc.violations(cfg) == []
    for _ in range(20):
        ch = sample_channel_set(cfg, rng)
        bf = sch.build_beamformers(ch, alloc, rng=rng)
        _, Hdbar = sch.effective_channels(ch, bf, 1)
        assert Hdbar.shape == (4, 4)
        assert matcore.numerical_rank(Hdbar, 1e-8) == 3


def test_full_alignment_at_equal_antennas(rng):
    cfg = AntennaConfig(3, 3, 3)
    alloc = allocate_streams(cfg, 0.5)
    for _ in range(20):
        ch = sample_channel_set(cfg, rng)
        bf = sch.build_beamformers(ch, alloc, rng=rng)
        _, Hdbar = sch.effective_channels(ch, bf, 1)
        assert Hdbar.shape == (3, 6)
        assert matcore.numerical_rank(Hdbar, 1e-8) == 3


def test_alignment_beyond_bound_raises(rng):
    ch = sample_channel_set(CFG, rng)
    alloc = make_alloc(ia={(2, 3): 2, (3, 2): 2}, align={1: 1})
    with pytest.raises(InfeasibleAllocationError):
        sch.build_ia_beamformers(ch, alloc)


def test_beamformer_columns_unit_norm(rng):
    cfg = AntennaConfig(4, 3, 2)
    ch = sample_channel_set(cfg, rng)
    bf = sch.build_beamformers(ch, make_alloc(ia={(2, 3): 2, (3, 2): 2}, align={1: 1}))
    for l in LINKS:
        for V in (bf.zf[l], bf.ia[l]):
            if V.shape[1]:
                np.testing.assert_allclose(np.linalg.norm(V, axis=0), 1.0, atol=1e-12)


# -- effective channels and post-coding -----------------------------------------

def test_effective_channel_shapes(rng):
    ch = sample_channel_set(CFG, rng)
    bf = sch.build_beamformers(ch, allocate_streams(CFG, 0.7), rng=rng)
    Hd1, Hdbar1 = sch.effective_channels(ch, bf, 1)
    assert Hd1.shape == (5, 1) and Hdbar1.shape == (5, 4)
    Hd3, Hdbar3 = sch.effective_channels(ch, bf, 3)
    assert Hd3.shape == (2, 2) and Hdbar3.shape == (2, 0)


def test_effective_channels_empty_allocation(rng):
    ch = sample_channel_set(CFG, rng)
    bf = sch.build_beamformers(ch, make_alloc())
    for i in NODES:
        Hd, Hdbar = sch.effective_channels(ch, bf, i)
        assert Hd.shape[1] == 0 and Hdbar.shape[1] == 0


@pytest.mark.parametrize("cfg", DEFAULT_CONFIGS)
def test_post_coder_removes_everything_else(cfg):
    c = AntennaConfig(*cfg)
    alloc = allocate_streams(c, 0.7)
    for seed in range(10):
        ch = draw(cfg, seed)
        bf = sch.build_beamformers(ch, alloc, rng=np.random.default_rng(seed))
        for link in LINKS:
            if alloc.streams(link) == 0:
                continue
            T, own, others = sch.post_coder(ch, bf, link)
            scale = max(np.linalg.norm(others, 2), 1.0) if others.size else 1.0
            if others.size:
                assert np.linalg.norm(T.conj().T @ others, 2) <= 1e-9 * scale
            np.testing.assert_allclose(T.conj().T @ T, np.eye(T.shape[1]), atol=1e-10)
            assert T.shape[1] >= alloc.streams(link)


# -- IA/ZF rates -------------------------------------------------------------------

def test_iazf_scalar_closed_form():
    cfg = AntennaConfig(1, 1, 1)
    ch = const_channels(cfg)
    alloc = make_alloc(ia={(2, 3): 1, (3, 2): 1}, align={1: 1})
    rep = sch.iazf_rates(ch, alloc, sch.LinkBudget(1.0, 1.0), 1.0)
    assert rep.rates[(2, 3)] == pytest.approx(1.0, abs=1e-12)
    assert rep.rates[(3, 2)] == pytest.approx(1.0, abs=1e-12)
    assert rep.sum_rate == pytest.approx(2.0, abs=1e-12)


def test_iazf_tau_zero_erases_uav_messages(rng):
    ch = sample_channel_set(CFG, rng)
    rep = sch.iazf_rates(ch, allocate_streams(CFG, 0.0), sch.LinkBudget(100.0), 0.0, rng=rng)
    for l in LINKS:
        if 1 in l:
            assert rep.rates[l] == 0.0
    assert rep.rates[(2, 3)] > 0 and rep.rates[(3, 2)] > 0


def test_iazf_zero_channels_give_zero():
    ch = const_channels(CFG, 0.0)
    rep = sch.iazf_rates(ch, allocate_streams(CFG, 0.7), sch.LinkBudget(10.0), 0.7)
    assert rep.sum_rate == 0.0


def test_iazf_tau_zero_only_ground_messages_carry_rate():
    # UAV-side streams stay allocated (the allocation is tau-independent),
    # so ground rates still see them; they carry no rate themselves
    for seed in range(5):
        ch = draw((5, 3, 2), seed)
        rep = sch.iazf_rates(ch, allocate_streams(CFG, 0.0), sch.LinkBudget(1e3), 0.0,
                             rng=np.random.default_rng(seed))
        assert rep.sum_rate == pytest.approx(rep.rates[(2, 3)] + rep.rates[(3, 2)], abs=0)


@pytest.mark.parametrize("cfg", [(5, 3, 2), (4, 3, 2), (3, 3, 3), (3, 2, 2), (2, 2, 1)])
def test_iazf_nondecreasing_in_tau(cfg):
    c = AntennaConfig(*cfg)
    budget = sch.LinkBudget.from_snr_db(30.0)
    taus = np.linspace(0, 1, 21)
    for seed in range(5):
        ch = draw(cfg, seed)
        sums = [sch.iazf_rates(ch, allocate_streams(c, t), budget, t,
                               rng=np.random.default_rng(seed)).sum_rate
                for t in taus]
        assert np.all(np.diff(sums) >= -1e-9)


@pytest.mark.parametrize("cfg", DEFAULT_CONFIGS)
@pytest.mark.parametrize("tau", [0.1, 0.7, 0.9])
def test_iazf_per_draw_slope_matches_dof(cfg, tau):
    c = AntennaConfig(*cfg)
    alloc = allocate_streams(c, tau)
    for seed in range(5):
        ch = draw(cfg, seed)
        gains = sch.iazf_stream_gains(ch, alloc, rng=np.random.default_rng(seed))
        r1 = sch.iazf_rates_from_gains(gains, sch.LinkBudget(1e5), tau).sum_rate
        r2 = sch.iazf_rates_from_gains(gains, sch.LinkBudget(1e6), tau).sum_rate
        slope = (r2 - r1) / (math.log2(1e6) - math.log2(1e5))
        assert slope == pytest.approx(dof_formula(c, tau), rel=0.05)


# -- broadcast schemes -------------------------------------------------------------

def test_bc_scalar_symmetric():
    ch = const_channels(AntennaConfig(1, 1, 1))
    rep = sch.bc_sum_rate(ch, sch.LinkBudget(2.0, 1.0), 1.0)
    assert rep.sum_rate == pytest.approx(math.log2(3), abs=1e-6)


def test_blind_bc_scalar_half_availability():
    ch = const_channels(AntennaConfig(1, 1, 1))
    rep = sch.blind_bc_sum_rate(ch, sch.LinkBudget(2.0, 1.0), 0.5)
    l15 = math.log2(1.5)
    expected = (0.5 * math.log2(3) + 0.5 * 1 + l15 + 0.5 * 1 + l15) / 3
    assert rep.sum_rate == pytest.approx(expected, abs=1e-6)


def test_bc_endpoints(rng):
    ch = sample_channel_set(CFG, rng)
    budget = sch.LinkBudget(10.0)
    assert sch.bc_sum_rate(ch, budget, 0.0).sum_rate == 0.0
    assert sch.bc_sum_rate(const_channels(CFG, 0.0), budget, 1.0).sum_rate == 0.0
    assert (sch.blind_bc_sum_rate(ch, budget, 1.0).sum_rate
            == pytest.approx(sch.bc_sum_rate(ch, budget, 1.0).sum_rate, abs=1e-12))
    blind0 = sch.blind_bc_sum_rate(ch, budget, 0.0)
    bcast = sch.broadcast_rates(ch, budget)
    assert blind0.sum_rate == pytest.approx((bcast[(2, 3)] + bcast[(3, 2)]) / 3, abs=1e-12)


def test_broadcast_rates_reach_sum_capacity(rng):
    ch = sample_channel_set(CFG, rng)
    budget = sch.LinkBudget(30.0)
    bcast = sch.broadcast_rates(ch, budget)
    for i in NODES:
        H = [ch[(i, j)].conj().T for j in other_nodes(i)]
        cap, _ = matcore.mac_sum_capacity(H, budget.P, budget.sigma2)
        assert sum(bcast[(i, j)] for j in other_nodes(i)) == pytest.approx(cap, abs=1e-8)


# -- TIN and two-way ----------------------------------------------------------------

def test_tin_scalar_ring():
    ch = const_channels(AntennaConfig(1, 1, 1))
    tin = sch.tin_rates(ch, sch.LinkBudget(1.0, 1.0))
    for l in LINKS:
        assert tin[l] == pytest.approx(math.log2(1.5), abs=1e-12)
    rep = sch.p2p_tin_sum_rate(ch, sch.LinkBudget(1.0, 1.0), 1.0)
    assert rep.sum_rate == pytest.approx(3 * math.log2(1.5), abs=1e-12)


def test_tin_without_interference_is_p2p(rng):
    # with these three links silent, no receiver in either mode hears interference
    zero = {(3, 2), (1, 3), (2, 1)}
    ch = sample_channel_set(CFG, rng)
    ch = ChannelSet(CFG, {l: (np.zeros_like(ch[l]) if l in zero else ch[l]) for l in LINKS})
    budget = sch.LinkBudget(10.0)
    direct = sch.direct_capacities(ch, budget)
    rep = sch.p2p_tin_sum_rate(ch, budget, 1.0)
    expected = 0.5 * (direct[(1, 2)] + direct[(2, 3)] + direct[(3, 1)])
    assert rep.sum_rate == pytest.approx(expected, abs=1e-9)


def test_tin_tau_zero_is_ground_two_way(rng):
    ch = sample_channel_set(CFG, rng)
    budget = sch.LinkBudget(10.0)
    rep = sch.p2p_tin_sum_rate(ch, budget, 0.0)
    assert rep.sum_rate == pytest.approx(sch.two_way_pair(ch, budget, 2, 3), abs=1e-12)


@pytest.mark.parametrize("tau", [0.0, 0.3, 1.0])
def test_two_way_identity_channels(tau):
    ch = identity_channels(AntennaConfig(2, 2, 2))
    rep = sch.two_way_sum_rate(ch, sch.LinkBudget(2.0, 1.0), tau)
    assert rep.sum_rate == pytest.approx(4.0, abs=1e-12)


def test_two_way_endpoints(rng):
    ch = sample_channel_set(CFG, rng)
    budget = sch.LinkBudget(10.0)
    tw = {p: sch.two_way_pair(ch, budget, *p) for p in [(1, 2), (1, 3), (2, 3)]}
    assert sch.two_way_sum_rate(ch, budget, 0.0).sum_rate == pytest.approx(tw[(2, 3)])
    assert sch.two_way_sum_rate(ch, budget, 1.0).sum_rate == pytest.approx(sum(tw.values()) / 3)


# -- shared properties -----------------------------------------------------------

def _all_schemes(ch, budget, tau):
    alloc = allocate_streams(ch.cfg, tau)
    return {
        "iazf": sch.iazf_rates(ch, alloc, budget, tau, rng=np.random.default_rng(0)),
        "bc": sch.bc_sum_rate(ch, budget, tau),
        "blind-bc": sch.blind_bc_sum_rate(ch, budget, tau),
        "p2p-tin": sch.p2p_tin_sum_rate(ch, budget, tau),
        "2w": sch.two_way_sum_rate(ch, budget, tau),
    }


@pytest.mark.parametrize("tau", [0.1, 0.7, 0.9])
def test_every_scheme_nondecreasing_in_power(tau):
    ch = draw((5, 3, 2), 5)
    grid = [sch.LinkBudget(P) for P in np.logspace(-1, 5, 13)]
    sums = {s: [] for s in sch.SCHEMES}
    for b in grid:
        for s, rep in _all_schemes(ch, b, tau).items():
            sums[s].append(rep.sum_rate)
    for s, v in sums.items():
        assert np.all(np.diff(v) >= -1e-7), s


def test_reports_nonnegative_and_consistent(rng):
    ch = sample_channel_set(CFG, rng)
    for rep in _all_schemes(ch, sch.LinkBudget(100.0), 0.7).values():
        assert rep.scheme in sch.SCHEMES
        assert all(r >= 0 for r in rep.rates.values())
        assert rep.sum_rate == sum(rep.rates[l] for l in LINKS)


def test_link_budget():
    b = sch.LinkBudget.from_snr_db(30.0)
    assert b.rho == pytest.approx(1000.0)
    assert sch.LinkBudget(4.0, 2.0).rho == 2.0
    with pytest.raises(Exception):
        sch.LinkBudget(0.0)


def test_third_node_helper():
    assert third_node(1, 2) == 3 and third_node(3, 1) == 2
