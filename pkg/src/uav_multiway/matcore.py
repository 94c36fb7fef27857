"""
Complex-matrix subspace algebra and capacity primitives.

All capacities are in bits per channel use. Matrices are plain numpy
arrays; channels follow the receiver-rows / transmitter-columns layout.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericalFailureError

__all__ = [
    "PowerAllocation",
    "null_space_basis",
    "orth_complement_basis",
    "numerical_rank",
    "waterfill",
    "p2p_capacity",
    "p2p_capacity_from_gains",
    "log2det_eye_plus",
    "mac_objective",
    "mac_sum_capacity",
    "mac_corner_rates",
]

DEFAULT_RANK_TOL = 1e-10
# iterative water-filling steps before the projected-gradient finish
IWF_STEPS = 20


@dataclass(frozen=True)
class PowerAllocation:
    """Per-eigenmode powers returned by :func:`waterfill`.

    ``water_level`` is the common level mu with p_k = (mu - noise/g_k)^+;
    it is 0 when every gain vanishes.
    """

    powers: np.ndarray
    budget: float
    water_level: float = 0.0

    @property
    def total(self):
        return float(np.sum(self.powers))


def _as_matrix(A):
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2:
        raise InvalidInputError(f"expected a 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("matrix contains NaN or Inf entries")
    return A


def numerical_rank(A, tol=DEFAULT_RANK_TOL):
    """Number of singular values above ``tol`` times the largest one."""
    A = _as_matrix(A)
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def null_space_basis(A, tol=DEFAULT_RANK_TOL):
    """
    Orthonormal basis of the right null space of ``A``.

    Parameters
    ----------
    A : array_like, shape (m, n)
    tol : float
        Relative rank threshold against the largest singular value.

    Returns
    -------
    V : ndarray, shape (n, k)
        ``k = n - rank(A)``; may have zero columns.
    """
    if tol <= 0:
        raise InvalidInputError("tol must be positive")
    A = _as_matrix(A)
    n = A.shape[1]
    if A.shape[0] == 0 or n == 0:
        return np.eye(n, dtype=complex)
    _, s, Vh = np.linalg.svd(A, full_matrices=True)
    rank = 0 if s[0] == 0.0 else int(np.sum(s > tol * s[0]))
    return Vh[rank:].conj().T


def orth_complement_basis(B, tol=DEFAULT_RANK_TOL):
    """
    Orthonormal basis ``T`` of the orthogonal complement of span(B).

    ``T^H B = 0``. An empty ``B`` (zero columns) yields the identity.
    """
    if tol <= 0:
        raise InvalidInputError("tol must be positive")
    B = _as_matrix(B)
    m = B.shape[0]
    if B.shape[1] == 0 or m == 0:
        return np.eye(m, dtype=complex)
    U, s, _ = np.linalg.svd(B, full_matrices=True)
    rank = 0 if s[0] == 0.0 else int(np.sum(s > tol * s[0]))
    return U[:, rank:]


def waterfill(gains, P, noise=1.0):
    """
    Capacity-optimal power split over parallel channels.

    Solves max sum log2(1 + p_k g_k / noise) s.t. sum p_k = P, p_k >= 0
    with the exact sorted closed form: the weakest active channels are
    dropped one at a time until every active power is nonnegative.

    Parameters
    ----------
    gains : array_like of float
        Nonnegative channel power gains.
    P : float
        Power budget.
    noise : float
        Noise variance.

    Returns
    -------
    PowerAllocation
    """
    g = np.asarray(gains, dtype=float).ravel()
    if g.size == 0:
        raise InvalidInputError("gain list is empty")
    if not np.all(np.isfinite(g)) or np.any(g < 0):
        raise InvalidInputError("gains must be finite and nonnegative")
    if not P > 0 or not noise > 0:
        raise InvalidInputError("P and noise must be positive")

    powers = np.zeros_like(g)
    with np.errstate(divide="ignore", over="ignore"):
        # gains so small that noise/g overflows carry no usable power
        active = np.flatnonzero((g > 0) & np.isfinite(noise / g))
    if active.size == 0:
        return PowerAllocation(powers, float(P), 0.0)

    order = active[np.argsort(-g[active], kind="stable")]
    floors = noise / g[order]
    # floors are nondecreasing; keep the largest prefix whose weakest
    # member still gets positive power (offset form avoids cancellation
    # when floors dwarf P)
    counts = np.arange(1, order.size + 1)
    means = np.cumsum(floors) / counts
    active_n = np.flatnonzero(P / counts > floors - means)
    n = int(active_n[-1]) + 1 if active_n.size else 1
    powers[order[:n]] = P / n + (means[n - 1] - floors[:n])
    mu = P / n + means[n - 1]
    return PowerAllocation(powers, float(P), float(mu))


def log2det_eye_plus(A):
    """log2 det(I + A) for Hermitian PSD ``A``; 0 for an empty matrix."""
    if A.shape[0] == 0:
        return 0.0
    sign, logdet = np.linalg.slogdet(np.eye(A.shape[0]) + A)
    return float(logdet / np.log(2.0))


def p2p_capacity_from_gains(gains, P, noise=1.0):
    """Water-filled capacity from precomputed eigenmode gains."""
    g = np.asarray(gains, dtype=float)
    if g.size == 0:
        return 0.0
    pa = waterfill(g, P, noise)
    return float(np.sum(np.log2(1.0 + pa.powers * g / noise)))


def p2p_capacity(H, P, noise=1.0):
    """Single-user MIMO capacity with water-filling over eigenmodes."""
    H = _as_matrix(H)
    if not P > 0 or not noise > 0:
        raise InvalidInputError("P and noise must be positive")
    if H.size == 0:
        return 0.0
    lam = np.linalg.svd(H, compute_uv=False) ** 2
    return p2p_capacity_from_gains(lam, P, noise)


def mac_objective(H_list, Q_list, noise=1.0):
    """log2 det(I + noise^-1 sum_u H_u Q_u H_u^H)."""
    m = H_list[0].shape[0]
    S = np.zeros((m, m), dtype=complex)
    for H, Q in zip(H_list, Q_list):
        S += H @ Q @ H.conj().T
    return log2det_eye_plus(S / noise)


def _inv_sqrt_psd(A):
    w, U = np.linalg.eigh(A)
    return (U / np.sqrt(w)) @ U.conj().T


def _segment_argmax(A, B, floor):
    """
    argmax over alpha in [floor, 1] of log det(A + alpha B), A positive definite.

    With lam the eigenvalues of A^-1/2 B A^-1/2 the objective is
    sum log(1 + alpha lam), whose derivative is monotone; bisect on it.
    """
    W = _inv_sqrt_psd(A)
    lam = np.linalg.eigvalsh(W @ B @ W.conj().T)

    def slope(a):
        return float(np.sum(lam / (1.0 + a * lam)))

    if slope(1.0) >= 0.0:
        return 1.0
    if slope(floor) <= 0.0:
        return floor
    lo, hi = floor, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if slope(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return lo


def mac_sum_capacity(H_list, P, noise=1.0, tol=1e-9, max_iter=500,
                     history=None):
    """
    Sum capacity of a Gaussian MAC under a sum-power constraint.

    Uses sum-power iterative water-filling: every iteration water-fills
    all users jointly against their current interference-plus-noise, then
    moves from the previous covariances towards the new ones. The step is
    the exact maximizer of the (concave) objective on that segment, which
    is never worse than the classic fixed 1/K averaging and avoids its
    crawl when users have nearly equal gains. Draws still unconverged
    after ``IWF_STEPS`` iterations are finished by monotone projected
    gradient ascent. By MAC-BC duality, the returned value is also the
    sum capacity of the broadcast channel with channels ``H_u^H``.

    Parameters
    ----------
    H_list : list of ndarray, each shape (m, n_u)
        Channels from each user into the common receiver.
    P : float
        Sum power budget.
    noise : float
    tol : float
        Stop once the objective improves by less than ``tol`` (bits).
    max_iter : int
    history : list, optional
        If given, the objective after every iteration is appended to it.

    Returns
    -------
    capacity : float
    covariances : list of ndarray
        PSD user covariances with traces summing to at most ``P``.

    Raises
    ------
    NumericalFailureError
        If ``max_iter`` is exhausted; ``last_iterate`` holds
        ``(objective, covariances)``.
    """
    if len(H_list) == 0:
        raise InvalidInputError("need at least one user")
    H_list = [_as_matrix(H) for H in H_list]
    m = H_list[0].shape[0]
    if any(H.shape[0] != m for H in H_list):
        raise InvalidInputError("all users must share the receiver dimension")
    if not P > 0 or not noise > 0 or not tol > 0:
        raise InvalidInputError("P, noise and tol must be positive")

    K = len(H_list)
    # absorb the noise into the channels
    Hs = [H / np.sqrt(noise) for H in H_list]
    if all(not np.any(H) for H in Hs):
        return 0.0, [np.zeros((H.shape[1],) * 2, dtype=complex) for H in Hs]

    total_dims = sum(H.shape[1] for H in Hs)
    Q = [np.eye(H.shape[1], dtype=complex) * (P / total_dims) for H in Hs]
    if K == 1:
        cap = p2p_capacity(H_list[0], P, noise)
        _, s, Vh = np.linalg.svd(Hs[0], full_matrices=True)
        gains = np.zeros(Hs[0].shape[1])
        gains[: s.size] = s**2
        pa = waterfill(gains, P, 1.0)
        V = Vh.conj().T
        return cap, [(V * pa.powers) @ V.conj().T]

    obj = mac_objective(Hs, Q)
    # a projected-gradient stage finishes the rare draws where the water-
    # filled direction zig-zags; both stages only ever increase obj
    step = None
    for n in range(max_iter):
        if n < IWF_STEPS:
            Q = _iwf_step(Hs, Q, P)
        else:
            Q, step = _projected_gradient_step(Hs, Q, P, obj, step)
        new_obj = mac_objective(Hs, Q)
        improvement = new_obj - obj
        obj = new_obj
        if history is not None:
            history.append(obj)
        if improvement < tol:
            return obj, Q
    raise NumericalFailureError(
        f"iterative water-filling did not converge in {max_iter} iterations",
        last_iterate=(obj, Q),
    )


def _iwf_step(Hs, Q, P):
    K = len(Hs)
    cov = [H @ Qk @ H.conj().T for H, Qk in zip(Hs, Q)]
    total = np.eye(Hs[0].shape[0]) + sum(cov)
    eig = []
    for H, C in zip(Hs, cov):
        G = H.conj().T @ _inv_sqrt_psd(total - C)
        w, U = np.linalg.eigh(G @ G.conj().T)
        eig.append((np.clip(w, 0.0, None), U))
    pa = waterfill(np.concatenate([w for w, _ in eig]), P, 1.0)
    offset = 0
    S = []
    for w, U in eig:
        p = pa.powers[offset: offset + w.size]
        offset += w.size
        S.append((U * p) @ U.conj().T)
    D = sum(H @ (Sk - Qk) @ H.conj().T for H, Sk, Qk in zip(Hs, S, Q))
    alpha = _segment_argmax(total, D, 1.0 / K)
    return [Qk + alpha * (Sk - Qk) for Sk, Qk in zip(S, Q)]


def _project_power(Ys, P):
    """Euclidean projection onto {Q_u PSD, sum_u tr Q_u = P}."""
    eig = [np.linalg.eigh(0.5 * (Y + Y.conj().T)) for Y in Ys]
    v = np.concatenate([w for w, _ in eig])
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - P
    r = np.flatnonzero(u - css / np.arange(1, u.size + 1) > 0)[-1]
    w_all = np.maximum(v - css[r] / (r + 1), 0.0)
    out, offset = [], 0
    for w, U in eig:
        p = w_all[offset: offset + w.size]
        offset += w.size
        out.append((U * p) @ U.conj().T)
    return out


def _mac_gradient(Hs, Q):
    m = Hs[0].shape[0]
    A = np.eye(m) + sum(H @ Qk @ H.conj().T for H, Qk in zip(Hs, Q))
    Ai = np.linalg.inv(A)
    # natural-log gradient; the objective is compared in bits below
    return [H.conj().T @ Ai @ H / np.log(2.0) for H in Hs]


def _projected_gradient_step(Hs, Q, P, obj, step):
    """One monotone projected-gradient step with a Barzilai-Borwein guess."""
    g = _mac_gradient(Hs, Q)
    if step is None:
        step = 1.0 / max(np.linalg.norm(gk, 2) for gk in g)
    for _ in range(60):
        Qn = _project_power([Qk + step * gk for Qk, gk in zip(Q, g)], P)
        diff = [a - b for a, b in zip(Qn, Q)]
        lin = sum(np.vdot(gk, d).real for gk, d in zip(g, diff))
        sq = sum(np.vdot(d, d).real for d in diff)
        if mac_objective(Hs, Qn) >= obj + lin - sq / (2.0 * step):
            break
        step *= 0.5
    else:
        return Q, step
    gn = _mac_gradient(Hs, Qn)
    curv = -sum(np.vdot(d, a - b).real for d, a, b in zip(diff, gn, g))
    return Qn, (sq / curv if curv > 0 else 2.0 * step)


def mac_corner_rates(H_list, covariances, order, noise=1.0):
    """
    Per-user rates at a successive-decoding corner of the MAC region.

    ``order`` lists user indices in decoding order: the first decoded sees
    all later users as noise, the last decoded sees only noise.
    """
    H_list = [_as_matrix(H) for H in H_list]
    if sorted(order) != list(range(len(H_list))):
        raise InvalidInputError("order must be a permutation of user indices")
    m = H_list[0].shape[0]
    rates = np.zeros(len(H_list))
    S = np.zeros((m, m), dtype=complex)
    prev = 0.0
    # accumulate from the last decoded user backwards
    for u in reversed(order):
        H = H_list[u]
        S = S + H @ np.asarray(covariances[u]) @ H.conj().T
        cur = log2det_eye_plus(S / noise)
        rates[u] = max(cur - prev, 0.0)
        prev = cur
    return [float(r) for r in rates]
