"""Random streams and samplers.

Every stream is a numpy ``Generator`` on PCG64 seeded from
``SeedSequence(seed, spawn_key=(stream_id,))``.  Stream ids are 64-bit
hashes of a tuple of labels (replication, arm, role, ...), so a stream's
output never depends on which thread draws from it or when.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .dist import DiscreteDist


def stream_id(*labels) -> int:
    """Stable 64-bit id for a tuple of ints/strings."""
    h = hashlib.blake2b(digest_size=8)
    for label in labels:
        if isinstance(label, str):
            data = b"s" + label.encode()
        else:
            data = b"i" + struct.pack("<q", int(label))
        h.update(struct.pack("<I", len(data)) + data)
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``."""

    seed: int
    stream_id: int = 0
    generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ss = np.random.SeedSequence(int(self.seed) & (2**64 - 1),
                                    spawn_key=(int(self.stream_id) & (2**64 - 1),))
        object.__setattr__(self, "generator", np.random.Generator(np.random.PCG64(ss)))

    @classmethod
    def derive(cls, seed: int, *labels) -> RngStream:
        return cls(seed, stream_id(*labels))

    def child(self, *labels) -> RngStream:
        return RngStream(self.seed, stream_id(self.stream_id, *labels))

    # thin pass-throughs so an RngStream can stand in for a Generator
    def random(self, *args, **kwargs):
        return self.generator.random(*args, **kwargs)

    def uniform(self, *args, **kwargs):
        return self.generator.uniform(*args, **kwargs)

    def standard_exponential(self, *args, **kwargs):
        return self.generator.standard_exponential(*args, **kwargs)

    def standard_gamma(self, *args, **kwargs):
        return self.generator.standard_gamma(*args, **kwargs)

    def standard_normal(self, *args, **kwargs):
        return self.generator.standard_normal(*args, **kwargs)

    @property
    def bit_generator(self):
        return self.generator.bit_generator


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def dirichlet(rng, beta) -> np.ndarray:
    """Dirichlet(beta) draw: independent Gamma(beta_i) variates, renormalized."""
    beta = np.ascontiguousarray(beta, dtype=np.float64)
    if beta.size == 0 or np.any(beta <= 0):
        raise ValueError("Dirichlet parameters must be positive")
    return _backend.kernels.dirichlet(as_generator(rng), beta)


def uniform_simplex(rng, n: int) -> np.ndarray:
    """Uniform draw on the n-simplex as normalized i.i.d. exponentials."""
    if n < 1:
        raise ValueError("simplex dimension must be at least 1")
    return _backend.kernels.uniform_simplex(as_generator(rng), int(n))


def sample_discrete(rng, dist: DiscreteDist) -> float:
    """One draw from ``dist`` by inverse CDF on a single uniform."""
    cum = np.ascontiguousarray(dist.cumulative())
    return float(dist.support[_backend.kernels.sample_discrete_index(as_generator(rng), cum)])


@dataclass(frozen=True, eq=False)
class TgmParams:
    """Gaussian mixture clipped to [0, bound].

    Clipping (not rejection) puts atoms at 0 and ``bound``.  A zero standard
    deviation is allowed and makes that mode a point mass.
    """

    means: np.ndarray
    sds: np.ndarray
    mode_weights: np.ndarray
    bound: float = 1.0
    cum_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = np.ascontiguousarray(self.means, dtype=np.float64).ravel()
        s = np.ascontiguousarray(self.sds, dtype=np.float64).ravel()
        w = np.ascontiguousarray(self.mode_weights, dtype=np.float64).ravel()
        if not (m.size == s.size == w.size) or m.size == 0:
            raise ValueError("means, sds and mode_weights must be nonempty and of equal length")
        if np.any(s < 0):
            raise ValueError("standard deviations must be nonnegative")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("mode weights must be a probability vector")
        if not self.bound > 0:
            raise ValueError("bound must be positive")
        for name, arr in (("means", m), ("sds", s), ("mode_weights", w)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        cum = np.cumsum(w)
        cum.setflags(write=False)
        object.__setattr__(self, "bound", float(self.bound))
        object.__setattr__(self, "cum_weights", cum)

    @property
    def n_modes(self) -> int:
        return self.means.size


def sample_tgm(rng, params: TgmParams) -> float:
    """Pick a mode by its weight, draw a Gaussian, clip into [0, bound]."""
    return float(_backend.kernels.sample_tgm(as_generator(rng), params.means, params.sds,
                                             params.cum_weights, params.bound))
