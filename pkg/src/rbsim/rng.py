"""Seedable random streams.

Each stream is a PCG64 generator keyed by ``(seed, stream_id)`` through
numpy's SeedSequence, so distinct stream ids give statistically independent
sequences and replications can be assigned streams deterministically.
"""

import numpy as np

__all__ = ["RandomStream"]


class RandomStream:
    """Single-owner random source with draw counters."""

    def __init__(self, seed=0, stream_id=0, *, seed_sequence=None):
        if seed_sequence is None:
            if int(seed) < 0 or int(stream_id) < 0:
                raise ValueError("seed and stream_id must be non-negative")
            seed_sequence = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id),))
        self.seed = int(seed_sequence.entropy) if seed_sequence.entropy is not None else 0
        self.stream_id = int(stream_id)
        self.seed_sequence = seed_sequence
        self.generator = np.random.Generator(np.random.PCG64(seed_sequence))
        self.uniform_count = 0
        self.normal_count = 0

    def spawn(self):
        """Child stream derived deterministically from this one."""
        (child,) = self.seed_sequence.spawn(1)
        return RandomStream(seed_sequence=child)

    @classmethod
    def replay(cls, seed_sequence):
        return cls(seed_sequence=seed_sequence)

    def uniform(self, size=None):
        """Uniform on the open interval (0, 1)."""
        u = 1.0 - self.generator.random(size)
        if size is None:
            while u >= 1.0:
                u = 1.0 - self.generator.random()
            self.uniform_count += 1
            return u
        bad = u >= 1.0
        while np.any(bad):
            u[bad] = 1.0 - self.generator.random(int(bad.sum()))
            bad = u >= 1.0
        self.uniform_count += u.size
        return u

    def normal(self, size=None):
        z = self.generator.standard_normal(size)
        self.normal_count += 1 if size is None else int(np.prod(size))
        return z

    def exponential(self, rate=1.0, size=None):
        e = self.generator.standard_exponential(size)
        self.uniform_count += 1 if size is None else int(np.prod(size))
        return e / rate

    def sign(self, size):
        return np.where(self.generator.random(size) < 0.5, -1.0, 1.0)
