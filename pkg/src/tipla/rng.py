"""Counter-based noise streams for the particle schemes.

One master seed expands through ``SeedSequence.spawn`` into three Philox
streams: one consumed once at initialization, one driving the shared theta
noise, and one producing a canonical (N, d_x) block per step whose row ``s``
is, across steps, an i.i.d. standard-normal substream.  A particle carries its
substream id for its whole life, so relabeling particles permutes noise rows
with them and the dynamics are label-invariant.

Philox is counter-based and the generator algorithm is pinned by NumPy, so
trajectories are reproducible across releases and across any parallelization
of the particle loop.
"""

from __future__ import annotations

import numpy as np

__all__ = ["NoiseStreams"]


class NoiseStreams:
    def __init__(self, seed: int, n_particles: int, d_theta: int, d_x: int):
        root = np.random.SeedSequence(seed)
        init_ss, theta_ss, particle_ss = root.spawn(3)
        self.init_rng = np.random.Generator(np.random.Philox(init_ss))
        self._theta_rng = np.random.Generator(np.random.Philox(theta_ss))
        self._particle_rng = np.random.Generator(np.random.Philox(particle_ss))
        self.n_particles = int(n_particles)
        self.d_theta = int(d_theta)
        self.d_x = int(d_x)

    def theta_noise(self) -> np.ndarray:
        return self._theta_rng.standard_normal(self.d_theta)

    def particle_block(self) -> np.ndarray:
        """One step's noise for all substreams, in canonical substream order."""
        return self._particle_rng.standard_normal((self.n_particles, self.d_x))
