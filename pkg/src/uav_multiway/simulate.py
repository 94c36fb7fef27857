"""
Monte-Carlo sweeps over SNR and UAV availability.

Trial ``t`` draws its channels from the substream ``(seed, t, attempt)``,
so results do not depend on worker count or evaluation order. Every
scheme, tau and SNR point of a trial reuses the same channel draw.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import schemes as sch
from .allocation import allocate_streams
from .channel import AntennaConfig, sample_channel_set
from .errors import (ConfigError, DegenerateChannelError, InvalidInputError,
                     NumericalFailureError)

log = logging.getLogger(__name__)

MAX_RETRIES = 3
DEFAULT_SNR_DB = tuple(range(0, 61, 5))
DEFAULT_TRIALS = 200


@dataclass(frozen=True)
class SimConfig:
    cfg: AntennaConfig
    snr_db: tuple = DEFAULT_SNR_DB
    taus: tuple = (0.1, 0.7, 0.9)
    trials: int = DEFAULT_TRIALS
    seed: int = 0
    schemes: tuple = sch.SCHEMES
    sigma2: float = 1.0

    def __post_init__(self):
        if not isinstance(self.cfg, AntennaConfig):
            object.__setattr__(self, "cfg", AntennaConfig(*self.cfg))
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        object.__setattr__(self, "taus", tuple(float(t) for t in self.taus))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not self.snr_db:
            raise ConfigError("snr_db must not be empty")
        if any(b <= a for a, b in zip(self.snr_db, self.snr_db[1:])):
            raise ConfigError("snr_db must be strictly increasing")
        if not self.taus:
            raise ConfigError("need at least one tau")
        if any(not 0.0 <= t <= 1.0 for t in self.taus):
            raise ConfigError("every tau must lie in [0, 1]")
        unknown = [s for s in self.schemes if s not in sch.SCHEMES]
        if unknown:
            raise ConfigError(f"unknown scheme(s): {', '.join(unknown)}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class Record:
    scheme: str
    tau: float
    snr_db: float
    trials: int
    mean: float
    stderr: float
    message_means: dict = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class SweepResult:
    records: tuple
    retries: int = 0

    def series(self, scheme, tau):
        """(snr_db, mean) pairs of one curve, in SNR order."""
        rows = [r for r in self.records if r.scheme == scheme and r.tau == tau]
        return [(r.snr_db, r.mean) for r in sorted(rows, key=lambda r: r.snr_db)]

    def get(self, scheme, tau, snr_db):
        for r in self.records:
            if r.scheme == scheme and r.tau == tau and r.snr_db == snr_db:
                return r
        raise KeyError((scheme, tau, snr_db))


def aggregate(samples):
    """Sample mean and standard error (0 for a single sample)."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise InvalidInputError("cannot aggregate an empty sample")
    mean = float(np.mean(x))
    if x.size == 1:
        return mean, 0.0
    return mean, float(np.std(x, ddof=1) / math.sqrt(x.size))


def estimate_slope(series, window=None):
    """
    Least-squares slope of rate against log2(SNR).

    Parameters
    ----------
    series : sequence of (snr_db, rate)
    window : (start, stop) index range, optional
        Python slice bounds into ``series``; whole series by default.
    """
    pts = list(series)
    if window is not None:
        pts = pts[slice(*window)]
    if len(pts) < 2:
        raise InvalidInputError("slope window needs at least two points")
    x = np.array([p[0] for p in pts], dtype=float) / 10.0 * math.log2(10.0)
    y = np.array([p[1] for p in pts], dtype=float)
    if np.ptp(x) == 0:
        raise InvalidInputError("slope window has no SNR spread")
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


def slope_between(series, lo_db, hi_db):
    """Slope over the points with lo_db <= snr_db <= hi_db."""
    return estimate_slope([p for p in series if lo_db <= p[0] <= hi_db])


def _trial_rng(seed, trial, attempt, *extra):
    ss = np.random.SeedSequence(seed, spawn_key=(trial, attempt) + tuple(extra))
    return np.random.default_rng(ss)


def _evaluate(sc, ch, seed_key):
    """All (scheme, tau, snr) sum rates and per-message rates of one draw."""
    out = {}
    allocs = {tau: allocate_streams(sc.cfg, tau) for tau in sc.taus}
    gains = {}
    if "iazf" in sc.schemes:
        for alloc in allocs.values():
            key = alloc.as_vector()
            if key not in gains:
                rng = _trial_rng(*seed_key, 1, *key)
                gains[key] = sch.iazf_stream_gains(ch, alloc, rng=rng)

    for snr in sc.snr_db:
        budget = sch.LinkBudget.from_snr_db(snr, sc.sigma2)
        bcast = tin = direct = None
        if "bc" in sc.schemes or "blind-bc" in sc.schemes:
            bcast = sch.broadcast_rates(ch, budget)
        if "p2p-tin" in sc.schemes:
            tin = sch.tin_rates(ch, budget)
        if "p2p-tin" in sc.schemes or "2w" in sc.schemes:
            direct = sch.direct_capacities(ch, budget)
        for tau in sc.taus:
            for scheme in sc.schemes:
                if scheme == "iazf":
                    rep = sch.iazf_rates_from_gains(
                        gains[allocs[tau].as_vector()], budget, tau)
                elif scheme == "bc":
                    rep = sch.bc_from_broadcast(bcast, tau)
                elif scheme == "blind-bc":
                    rep = sch.blind_bc_from_broadcast(bcast, tau)
                elif scheme == "p2p-tin":
                    rep = sch.p2p_tin_from_parts(tin, direct, tau)
                else:
                    rep = sch.two_way_from_parts(direct, tau)
                out[(scheme, tau, snr)] = rep
    return out


def _run_trial(sc, trial, sampler):
    sampler = sampler or sample_channel_set
    last_err = None
    for attempt in range(MAX_RETRIES + 1):
        rng = _trial_rng(sc.seed, trial, attempt)
        ch = sampler(sc.cfg, rng)
        try:
            return _evaluate(sc, ch, (sc.seed, trial, attempt)), attempt
        except (DegenerateChannelError, NumericalFailureError) as err:
            log.debug("trial %d attempt %d resampled: %s", trial, attempt, err)
            last_err = err
    raise NumericalFailureError(
        f"trial {trial} failed after {MAX_RETRIES} retries: {last_err}",
        last_iterate=getattr(last_err, "last_iterate", None))


def _run_chunk(args):
    sc, trials, sampler = args
    return [_run_trial(sc, t, sampler) for t in trials]


def run_sweep(sc, workers=1, channel_sampler=None):
    """
    Average every requested scheme over ``sc.trials`` fading draws.

    Parameters
    ----------
    sc : SimConfig
    workers : int
        Worker processes; 1 runs in-process. The result is identical for
        any value.
    channel_sampler : callable, optional
        ``(cfg, rng) -> ChannelSet`` replacing the Rayleigh sampler; must
        be picklable when ``workers > 1``.

    Returns
    -------
    SweepResult
    """
    trials = list(range(sc.trials))
    if workers <= 1:
        per_trial = _run_chunk((sc, trials, channel_sampler))
    else:
        n_chunks = min(len(trials), workers * 4)
        chunks = [trials[n::n_chunks] for n in range(n_chunks)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk,
                                  [(sc, c, channel_sampler) for c in chunks]))
        by_trial = {}
        for c, part in zip(chunks, parts):
            by_trial.update(zip(c, part))
        per_trial = [by_trial[t] for t in trials]

    retries = sum(attempt for _, attempt in per_trial)
    records = []
    for scheme in sorted(sc.schemes):
        for tau in sorted(set(sc.taus)):
            for snr in sc.snr_db:
                reps = [res[(scheme, tau, snr)] for res, _ in per_trial]
                mean, se = aggregate([r.sum_rate for r in reps])
                msg = {l: float(np.mean([r.rates[l] for r in reps]))
                       for l in reps[0].rates}
                records.append(Record(scheme, tau, snr, sc.trials, mean, se, msg))
    if retries:
        log.info("%d trial(s) resampled after degenerate draws", retries)
    return SweepResult(tuple(records), retries)
