"""
Achievable rates of the five transmission schemes on one channel draw.

Scheme tokens: ``iazf`` (interference alignment + zero forcing with
erasure treatment of UAV links), ``bc`` (state-aware broadcast time
sharing), ``blind-bc`` (state-agnostic broadcast time sharing),
``p2p-tin`` (cyclic point-to-point modes, interference treated as noise)
and ``2w`` (pairwise two-way time sharing).
"""

import math
from dataclasses import dataclass

import numpy as np

from . import matcore
from .allocation import StreamAllocation, message_weight
from .channel import LINKS, NODES, ChannelSet, other_nodes, third_node
from .errors import (DegenerateChannelError, InfeasibleAllocationError,
                     InvalidInputError)

SCHEMES = ("iazf", "bc", "blind-bc", "p2p-tin", "2w")

# one cycle per mode; each transmitter sends to the next node in the tuple
TIN_MODES = ((1, 2, 3), (1, 3, 2))

_RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class LinkBudget:
    P: float
    sigma2: float = 1.0

    def __post_init__(self):
        if not (self.P > 0 and self.sigma2 > 0):
            raise InvalidInputError("P and sigma2 must be positive")

    @property
    def rho(self):
        return self.P / self.sigma2

    @classmethod
    def from_snr_db(cls, snr_db, sigma2=1.0):
        return cls(sigma2 * 10.0 ** (snr_db / 10.0), sigma2)


@dataclass(frozen=True)
class RateReport:
    scheme: str
    rates: dict

    @property
    def sum_rate(self):
        return float(sum(self.rates[l] for l in LINKS))


@dataclass(frozen=True)
class BeamformerSet:
    """Unit-norm transmit beamformers per message, keyed by link.

    The first ``aligned[link]`` columns of ``ia[link]`` are the aligned
    ones; the rest are generic.
    """

    zf: dict
    ia: dict
    aligned: dict

    def transmit_matrix(self, i):
        cols = [self.zf[(i, j)] for j in other_nodes(i)]
        cols += [self.ia[(i, j)] for j in other_nodes(i)]
        return np.concatenate(cols, axis=1)


def _normalize_columns(V):
    if V.shape[1] == 0:
        return V
    norms = np.linalg.norm(V, axis=0)
    if np.any(norms == 0):
        raise DegenerateChannelError("beamformer column collapsed to zero")
    return V / norms


def _empty(rows):
    return np.zeros((rows, 0), dtype=complex)


def build_zf_beamformers(ch, alloc):
    """
    Zero-forcing beamformers: columns of V[i->j] lie in N(H[i->k]).

    Within the null space the directions with the largest gain towards
    the intended receiver are used.
    """
    cfg = ch.cfg
    zf = {}
    for i, j in LINKS:
        a = alloc.zf.get((i, j), 0)
        k = third_node(i, j)
        if a == 0:
            zf[(i, j)] = _empty(cfg.M(i))
            continue
        N = matcore.null_space_basis(ch[(i, k)])
        if a > N.shape[1]:
            raise InfeasibleAllocationError(
                f"zf[{i}->{j}]={a} exceeds null-space dimension {N.shape[1]}")
        _, _, Wh = np.linalg.svd(ch[(i, j)] @ N, full_matrices=True)
        zf[(i, j)] = N @ Wh[:a].conj().T
    return zf


def _aligned_pairs(ch, i):
    """
    Orthonormal basis of genuinely aligned pairs (u; v) at receiver i.

    (u; v) spans N([H[j->i], -H[k->i]]), i.e. H[j->i] u = H[k->i] v, with
    the trivial pairs (null(H[j->i]) x 0 and 0 x null(H[k->i])) removed so
    both halves carry signal.
    """
    j, k = other_nodes(i)
    Hj, Hk = ch[(j, i)], ch[(k, i)]
    Mj, Mk = Hj.shape[1], Hk.shape[1]
    N = matcore.null_space_basis(np.concatenate([Hj, -Hk], axis=1))
    Nj = matcore.null_space_basis(Hj)
    Nk = matcore.null_space_basis(Hk)
    Z = np.zeros((Mj + Mk, Nj.shape[1] + Nk.shape[1]), dtype=complex)
    Z[:Mj, :Nj.shape[1]] = Nj
    Z[Mj:, Nj.shape[1]:] = Nk
    if Z.shape[1]:
        N = N - Z @ (Z.conj().T @ N)
    if N.shape[1] == 0:
        return N, Mj
    U, s, _ = np.linalg.svd(N, full_matrices=False)
    r = 0 if s[0] == 0 else int(np.sum(s > 1e-8 * s[0]))
    return U[:, :r], Mj


def build_ia_beamformers(ch, alloc, rng=None, zf=None):
    """
    IA beamformers: aligned pairs per receiver, then generic columns.

    Generic columns are random directions projected off every column the
    transmitter already uses, so each transmitter's beamformers stay
    linearly independent.
    """
    cfg = ch.cfg
    if rng is None:
        rng = np.random.default_rng(0)
    if zf is None:
        zf = build_zf_beamformers(ch, alloc)
    ia = {l: _empty(cfg.M(l[0])) for l in LINKS}
    aligned = {l: 0 for l in LINKS}

    for i in NODES:
        b = alloc.align.get(i, 0)
        if b == 0:
            continue
        j, k = other_nodes(i)
        bound = min(alloc.ia.get((j, k), 0), alloc.ia.get((k, j), 0),
                    max(cfg.M(j) + cfg.M(k) - cfg.M(i), 0))
        if b > bound:
            raise InfeasibleAllocationError(
                f"align[{i}]={b} exceeds the alignment bound {bound}")
        pairs, Mj = _aligned_pairs(ch, i)
        if pairs.shape[1] < b:
            raise InfeasibleAllocationError(
                f"only {pairs.shape[1]} non-trivial aligned dimensions at "
                f"node {i}, {b} requested")
        ia[(j, k)] = _normalize_columns(pairs[:Mj, :b])
        ia[(k, j)] = _normalize_columns(pairs[Mj:, :b])
        aligned[(j, k)] = aligned[(k, j)] = b

    for i, j in LINKS:
        extra = alloc.ia.get((i, j), 0) - aligned[(i, j)]
        if extra <= 0:
            continue
        used = np.concatenate(
            [zf[(i, n)] for n in other_nodes(i)]
            + [ia[(i, n)] for n in other_nodes(i)], axis=1)
        T = matcore.orth_complement_basis(used)
        if T.shape[1] < extra:
            raise InfeasibleAllocationError(
                f"node {i} has no room for {extra} more streams")
        shape = (T.shape[1], extra)
        W = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        ia[(i, j)] = np.concatenate(
            [ia[(i, j)], _normalize_columns(T @ W)], axis=1)

    return ia, aligned


def build_beamformers(ch, alloc, rng=None):
    zf = build_zf_beamformers(ch, alloc)
    ia, aligned = build_ia_beamformers(ch, alloc, rng=rng, zf=zf)
    bf = BeamformerSet(zf, ia, aligned)
    for i in NODES:
        V = bf.transmit_matrix(i)
        if V.shape[1] and matcore.numerical_rank(V, 1e-8) < V.shape[1]:
            raise DegenerateChannelError(
                f"beamformers of node {i} are linearly dependent")
    return bf


def effective_channels(ch, bf, i):
    """Desired and interfering effective channels seen by receiver i."""
    j, k = other_nodes(i)
    Hd = np.concatenate([
        ch[(j, i)] @ bf.zf[(j, i)], ch[(k, i)] @ bf.zf[(k, i)],
        ch[(j, i)] @ bf.ia[(j, i)], ch[(k, i)] @ bf.ia[(k, i)]], axis=1)
    Hdbar = np.concatenate([
        ch[(j, i)] @ bf.ia[(j, k)], ch[(k, i)] @ bf.ia[(k, j)]], axis=1)
    return Hd, Hdbar


def post_coder(ch, bf, link):
    """
    Zero-forcing receive filter for message ``link`` at its receiver.

    Returns ``(T, own, others)``: T is an orthonormal basis orthogonal to
    every column in ``others`` (all desired columns of other messages and
    all interference), ``own`` the message's own effective columns.
    """
    i, j = link
    k = third_node(i, j)
    own = np.concatenate([ch[(i, j)] @ bf.zf[(i, j)],
                          ch[(i, j)] @ bf.ia[(i, j)]], axis=1)
    others = np.concatenate([
        ch[(k, j)] @ bf.zf[(k, j)], ch[(k, j)] @ bf.ia[(k, j)],
        ch[(i, j)] @ bf.ia[(i, k)], ch[(k, j)] @ bf.ia[(k, i)]], axis=1)
    return matcore.orth_complement_basis(others), own, others


def iazf_stream_gains(ch, alloc, bf=None, rng=None):
    """
    Post-coded per-stream channel gains of every IA/ZF message.

    Returns ``{link: (gains, n_tx)}`` where ``gains`` are the squared
    singular values of the post-coded channel and ``n_tx`` the number of
    streams sharing the transmitter's power. These do not depend on P.
    """
    if bf is None:
        bf = build_beamformers(ch, alloc, rng=rng)
    out = {}
    for link in LINKS:
        a = alloc.streams(link)
        n_tx = alloc.tx_streams(link[0])
        if a == 0:
            out[link] = (np.zeros(0), n_tx)
            continue
        T, own, _ = post_coder(ch, bf, link)
        scale = np.linalg.norm(own, 2)
        if scale == 0.0:
            # no signal at all (e.g. an all-zero channel): rate is zero
            out[link] = (np.zeros(a), n_tx)
            continue
        G = T.conj().T @ own
        s = np.linalg.svd(G, compute_uv=False) if G.size else np.zeros(0)
        if s.size < a or s[a - 1] <= 1e-9 * scale:
            raise DegenerateChannelError(
                f"message {link[0]}->{link[1]} not decodable after post-coding")
        out[link] = (s**2, n_tx)
    return out


def iazf_rates_from_gains(gains, budget, tau, scheme="iazf"):
    rates = {}
    for link, (g, n_tx) in gains.items():
        if g.size == 0:
            rates[link] = 0.0
            continue
        c = budget.P / (n_tx * budget.sigma2)
        r = float(np.sum(np.log2(1.0 + c * g)))
        rates[link] = message_weight(link, tau) * r
    return RateReport(scheme, rates)


def iazf_rates(ch, alloc, budget, tau, rng=None):
    """IA/ZF rates; messages through the UAV are scaled by ``tau``."""
    gains = iazf_stream_gains(ch, alloc, rng=rng)
    return iazf_rates_from_gains(gains, budget, tau)


def _decoded_last(receivers, cfg):
    # larger antenna count decoded last; ties go to the lower node index
    return max(receivers, key=lambda n: (cfg.M(n), -n))


def broadcast_rates(ch, budget, tol=1e-9, max_iter=500):
    """
    Full-duty broadcast rates of every transmitter to its two receivers.

    Sum capacity via the dual MAC; the per-receiver split is the dual-MAC
    successive-decoding corner with the larger receiver decoded last.
    """
    cfg = ch.cfg
    rates = {}
    for i in NODES:
        rx = other_nodes(i)
        H_list = [ch[(i, j)].conj().T for j in rx]
        _, Q = matcore.mac_sum_capacity(H_list, budget.P, budget.sigma2,
                                        tol=tol, max_iter=max_iter)
        last = rx.index(_decoded_last(rx, cfg))
        order = [1 - last, last]
        r = matcore.mac_corner_rates(H_list, Q, order, budget.sigma2)
        for j, rj in zip(rx, r):
            rates[(i, j)] = rj
    return rates


def bc_from_broadcast(bcast, tau):
    return RateReport("bc", {l: tau * bcast[l] / 3.0 for l in LINKS})


def blind_bc_from_broadcast(bcast, tau):
    return RateReport("blind-bc", {
        l: message_weight(l, tau) * bcast[l] / 3.0 for l in LINKS})


def bc_sum_rate(ch, budget, tau):
    """Broadcast in thirds, only while the UAV is present."""
    return bc_from_broadcast(broadcast_rates(ch, budget), tau)


def blind_bc_sum_rate(ch, budget, tau):
    """Broadcast in thirds regardless of the UAV state."""
    return blind_bc_from_broadcast(broadcast_rates(ch, budget), tau)


def waterfilled_covariance(H, P, noise):
    _, s, Vh = np.linalg.svd(H, full_matrices=True)
    gains = np.zeros(H.shape[1])
    gains[: s.size] = s**2
    if not np.any(gains):
        return np.zeros((H.shape[1],) * 2, dtype=complex)
    p = matcore.waterfill(gains, P, noise).powers
    V = Vh.conj().T
    return (V * p) @ V.conj().T


def tin_rates(ch, budget):
    """
    Rate of every link inside its cyclic TIN mode, at full duty.

    Each transmitter water-fills for its own link; the receiver treats the
    one other active transmitter's signal as Gaussian noise.
    """
    s2 = budget.sigma2
    Q = {l: waterfilled_covariance(ch[l], budget.P, s2) for l in LINKS}
    rates = {}
    for cycle in TIN_MODES:
        links = [(cycle[n], cycle[(n + 1) % 3]) for n in range(3)]
        active = {tx: rx for tx, rx in links}
        for tx, rx in links:
            (intf,) = (t for t in active if t not in (tx, rx))
            H, Hi = ch[(tx, rx)], ch[(intf, rx)]
            I = Hi @ Q[(intf, active[intf])] @ Hi.conj().T
            S = H @ Q[(tx, rx)] @ H.conj().T
            r = (matcore.log2det_eye_plus((S + I) / s2)
                 - matcore.log2det_eye_plus(I / s2))
            rates[(tx, rx)] = max(r, 0.0)
    return rates


def direct_capacities(ch, budget):
    return {l: matcore.p2p_capacity(ch[l], budget.P, budget.sigma2)
            for l in LINKS}


def p2p_tin_from_parts(tin, direct, tau):
    rates = {}
    for l in LINKS:
        r = tau * 0.5 * tin[l]
        if 1 not in l:
            r += (1.0 - tau) * direct[l]
        rates[l] = r
    return RateReport("p2p-tin", rates)


def two_way_from_parts(direct, tau):
    rates = {}
    for l in LINKS:
        r = tau / 3.0 * direct[l]
        if 1 not in l:
            r += (1.0 - tau) * direct[l]
        rates[l] = r
    return RateReport("2w", rates)


def p2p_tin_sum_rate(ch, budget, tau):
    """TDMA over the two cyclic modes while the UAV is present,
    two-way between the ground nodes otherwise."""
    return p2p_tin_from_parts(tin_rates(ch, budget),
                              direct_capacities(ch, budget), tau)


def two_way_sum_rate(ch, budget, tau):
    """One pair at a time; 2<->3 only while the UAV is away."""
    return two_way_from_parts(direct_capacities(ch, budget), tau)


def two_way_pair(ch, budget, i, j):
    return (matcore.p2p_capacity(ch[(i, j)], budget.P, budget.sigma2)
            + matcore.p2p_capacity(ch[(j, i)], budget.P, budget.sigma2))
