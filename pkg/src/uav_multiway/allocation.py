"""
Stream allocation for the IA/ZF scheme.

Every message i->j is split into ``zf[(i, j)]`` zero-forced streams and
``ia[(i, j)]`` streams that may be aligned at the third node. ``align[i]``
is the number of dimensions in which the two cross messages not meant for
receiver i overlap there.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .channel import LINKS, NODES, AntennaConfig, other_nodes, third_node
from .errors import InvalidInputError

__all__ = [
    "StreamAllocation",
    "allocate_streams",
    "weighted_dof",
    "dof_formula",
    "message_weight",
    "feasible_allocations",
]


def _pos(x):
    return max(int(x), 0)


def message_weight(link, tau):
    """Erasure weight: messages to or from the UAV survive w.p. tau."""
    return tau if 1 in link else 1.0


@dataclass(frozen=True)
class StreamAllocation:
    zf: dict
    ia: dict
    align: dict

    def streams(self, link):
        return self.zf.get(link, 0) + self.ia.get(link, 0)

    def tx_streams(self, i):
        return sum(self.streams((i, j)) for j in other_nodes(i))

    def desired_into(self, i):
        return sum(self.streams((j, i)) for j in other_nodes(i))

    def interference_dims(self, i):
        j, k = other_nodes(i)
        return self.ia.get((j, k), 0) + self.ia.get((k, j), 0) - self.align.get(i, 0)

    def violations(self, cfg):
        """Human-readable list of broken constraints (empty if valid)."""
        bad = []
        for link in LINKS:
            i, j = link
            k = third_node(i, j)
            if self.zf.get(link, 0) < 0 or self.ia.get(link, 0) < 0:
                bad.append(f"negative stream count on {i}->{j}")
            if self.zf.get(link, 0) > _pos(cfg.M(i) - cfg.M(k)):
                bad.append(f"zf[{i}->{j}] exceeds null-space dimension")
        for i in NODES:
            j, k = other_nodes(i)
            bound = min(self.ia.get((j, k), 0), self.ia.get((k, j), 0),
                        _pos(cfg.M(j) + cfg.M(k) - cfg.M(i)))
            if not 0 <= self.align.get(i, 0) <= bound:
                bad.append(f"align[{i}] outside [0, {bound}]")
            if self.tx_streams(i) > cfg.M(i):
                bad.append(f"node {i} transmits more streams than antennas")
            if self.desired_into(i) + self.interference_dims(i) > cfg.M(i):
                bad.append(f"node {i} receive space overfull")
        return bad

    def as_vector(self):
        return tuple(self.zf.get(l, 0) for l in LINKS) + tuple(
            self.ia.get(l, 0) for l in LINKS)


def dof_formula(cfg, tau):
    """Sum DoF 2*tau*M2 + 2*(1-tau)*M3 of the intermittent 3-way channel."""
    return 2.0 * tau * cfg.M2 + 2.0 * (1.0 - tau) * cfg.M3


def weighted_dof(alloc, tau):
    return float(sum(message_weight(l, tau) * alloc.streams(l) for l in LINKS))


@lru_cache(maxsize=None)
def feasible_allocations(cfg):
    """
    Enumerate every feasible (zf, ia) vector for ``cfg``.

    Returns an int array of shape (n, 15): six zf counts, six ia counts
    (both in ``LINKS`` order) and the three minimal alignment dimensions.
    """
    M = {i: cfg.M(i) for i in NODES}
    ranges = []
    for i, j in LINKS:
        k = third_node(i, j)
        ranges.append(range(min(_pos(M[i] - M[k]), M[i], M[j]) + 1))
    for i, j in LINKS:
        ranges.append(range(min(M[i], M[j]) + 1))
    grids = np.meshgrid(*[np.arange(len(r)) for r in ranges], indexing="ij")
    X = np.stack([g.ravel() for g in grids], axis=1)

    col = {("zf", l): n for n, l in enumerate(LINKS)}
    col.update({("ia", l): 6 + n for n, l in enumerate(LINKS)})

    def streams(i, j):
        return X[:, col[("zf", (i, j))]] + X[:, col[("ia", (i, j))]]

    ok = np.ones(len(X), dtype=bool)
    align = np.zeros((len(X), 3), dtype=X.dtype)
    for i in NODES:
        j, k = other_nodes(i)
        ok &= streams(i, j) + streams(i, k) <= M[i]
        desired = streams(j, i) + streams(k, i)
        ia_jk = X[:, col[("ia", (j, k))]]
        ia_kj = X[:, col[("ia", (k, j))]]
        need = np.maximum(desired + ia_jk + ia_kj - M[i], 0)
        bound = np.minimum(np.minimum(ia_jk, ia_kj), _pos(M[j] + M[k] - M[i]))
        ok &= need <= bound
        align[:, i - 1] = need
    return np.concatenate([X, align], axis=1)[ok]


def _weights(tau):
    return np.array([message_weight(l, tau) for l in LINKS] * 2)


def _to_allocation(row):
    zf = {l: int(row[n]) for n, l in enumerate(LINKS)}
    ia = {l: int(row[6 + n]) for n, l in enumerate(LINKS)}
    align = {i: int(row[12 + i - 1]) for i in NODES}
    return StreamAllocation(zf, ia, align)


def allocate_streams(cfg, tau):
    """
    Best integer stream allocation for availability ``tau``.

    Maximizes the erasure-weighted stream count. Ties go first to
    allocations that are also optimal at tau = 1/2 (hence at every tau,
    the optimum being linear in tau), then to more ZF streams, then
    fewer total streams, then the lexicographically smallest (zf, ia)
    vector. Alignment is the minimum the receive space needs.
    """
    if not isinstance(cfg, AntennaConfig):
        cfg = AntennaConfig(*cfg)
    if not 0.0 <= tau <= 1.0:
        raise InvalidInputError(f"tau must lie in [0, 1], got {tau}")
    X = feasible_allocations(cfg)
    objective = np.round(X[:, :12] @ _weights(tau), 9)
    # keeps the choice tau-independent so rates never drop as tau grows
    objective_mid = np.round(X[:, :12] @ _weights(0.5), 9)
    zf_total = X[:, :6].sum(axis=1)
    total = X[:, :12].sum(axis=1)
    # lexsort: last key is primary
    keys = [X[:, c] for c in range(11, -1, -1)] + [
        total, -zf_total, -objective_mid, -objective]
    best = np.lexsort(keys)[0]
    return _to_allocation(X[best])
