"""
Fading realizations, UAV intermittency, and the air-to-ground LoS model.

Nodes are numbered 1 (the UAV), 2 and 3 (ground users). ``H[(i, j)]`` is
the M_j x M_i matrix multiplying node i's transmit vector in node j's
received signal.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

NODES = (1, 2, 3)
LINKS = tuple((i, j) for i in NODES for j in NODES if i != j)

# (a1, a2) sigmoid constants of the Al-Hourani LoS model, angles in degrees
ENVIRONMENTS = {
    "suburban": (4.88, 0.43),
    "urban": (9.61, 0.16),
    "dense-urban": (12.08, 0.11),
    "urban-high-rise": (27.23, 0.08),
}


def other_nodes(i):
    """The two nodes other than ``i``, in increasing order."""
    return tuple(n for n in NODES if n != i)


def third_node(i, j):
    (k,) = (n for n in NODES if n not in (i, j))
    return k


@dataclass(frozen=True)
class AntennaConfig:
    M1: int
    M2: int
    M3: int

    def __post_init__(self):
        for m in (self.M1, self.M2, self.M3):
            if not isinstance(m, (int, np.integer)) or isinstance(m, bool):
                raise InvalidInputError("antenna counts must be integers")
        if not self.M1 >= self.M2 >= self.M3 >= 1:
            raise InvalidInputError(
                f"need M1 >= M2 >= M3 >= 1, got {self.as_tuple()}")

    def M(self, i):
        return (self.M1, self.M2, self.M3)[i - 1]

    def as_tuple(self):
        return (self.M1, self.M2, self.M3)


@dataclass(frozen=True)
class ChannelSet:
    """The six cross-channel matrices of one fading realization."""

    cfg: AntennaConfig
    H: dict = field(repr=False)

    def __post_init__(self):
        if set(self.H) != set(LINKS):
            raise InvalidInputError("ChannelSet needs all six ordered links")
        for (i, j), Hij in self.H.items():
            Hij = np.asarray(Hij)
            if Hij.shape != (self.cfg.M(j), self.cfg.M(i)):
                raise InvalidInputError(
                    f"H[{i}->{j}] must be {self.cfg.M(j)}x{self.cfg.M(i)}, "
                    f"got {Hij.shape}")
            if not np.all(np.isfinite(Hij)):
                raise InvalidInputError(f"H[{i}->{j}] has non-finite entries")

    def __getitem__(self, link):
        return self.H[link]

    @classmethod
    def from_function(cls, cfg, fn):
        """Build from ``fn(i, j, rows, cols) -> matrix`` for every link."""
        return cls(cfg, {(i, j): np.asarray(fn(i, j, cfg.M(j), cfg.M(i)),
                                            dtype=complex)
                         for (i, j) in LINKS})


@dataclass(frozen=True)
class IntermittencyModel:
    tau: float

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise InvalidInputError(f"tau must lie in [0, 1], got {self.tau}")

    @property
    def tau_bar(self):
        return 1.0 - self.tau


@dataclass(frozen=True)
class Environment:
    kind: str
    a1: float
    a2: float

    @classmethod
    def from_name(cls, name):
        try:
            a1, a2 = ENVIRONMENTS[name]
        except KeyError:
            raise InvalidInputError(
                f"unknown environment {name!r}; expected one of "
                f"{', '.join(ENVIRONMENTS)}") from None
        return cls(name, a1, a2)


@dataclass(frozen=True)
class Geometry:
    """UAV altitude ``h`` and UAV-to-user distance ``d``, in meters."""

    h: float
    d: float


def sample_channel_set(cfg, rng):
    """Draw i.i.d. CN(0, 1) entries for every link, in ``LINKS`` order."""
    H = {}
    for i, j in LINKS:
        shape = (cfg.M(j), cfg.M(i))
        H[(i, j)] = (rng.standard_normal(shape)
                     + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    return ChannelSet(cfg, H)


def sample_state_sequence(model, n, rng):
    """Bernoulli(tau) availability states s_1..s_n as an int8 array."""
    if n < 1:
        raise InvalidInputError("n must be at least 1")
    return (rng.random(n) < model.tau).astype(np.int8)


def elevation_angle_deg(g):
    if not (g.h > 0 and g.d > 0):
        raise InvalidInputError("altitude and distance must be positive")
    if g.h > g.d:
        raise InvalidInputError(
            f"altitude {g.h} exceeds the UAV-to-user distance {g.d}")
    return math.degrees(math.asin(g.h / g.d))


def los_probability(env, theta_deg):
    """Sigmoid LoS probability at elevation ``theta_deg`` degrees."""
    return 1.0 / (1.0 + env.a1 * math.exp(-env.a2 * (theta_deg - env.a1)))


def nlos_probability(env, theta_deg):
    return 1.0 - los_probability(env, theta_deg)


def tau_from_environment(env, g):
    """Approximate UAV availability by its LoS probability."""
    if isinstance(env, str):
        env = Environment.from_name(env)
    return IntermittencyModel(los_probability(env, elevation_angle_deg(g)))
