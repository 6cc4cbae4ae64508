"""Deterministic, splittable Wiener-increment streams.

Each path owns a counter-based generator (Philox) keyed by
(master_seed, path_index, step size), so an increment sequence is a pure
function of those values plus the cursor position: re-creating a stream
replays it bit for bit, and a path ensemble can be partitioned across any
number of threads without changing a single draw. Coarse/fine coupling
for strong-error estimation block-sums the fine increments of one stream,
putting both grids on the same Brownian path.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["NoiseStream", "CoupledIncrements", "StreamExhausted", "gaussian_block"]

_MASK64 = (1 << 64) - 1


class StreamExhausted(RuntimeError):
    """A coupled stream was stepped past its configured horizon."""


def _mix64(z: int) -> int:
    # splitmix64 finalizer; spreads low-entropy inputs over the key space
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _stream_key(master_seed: int, path_index: int, dt: float) -> tuple[int, int]:
    """128-bit Philox key; distinct per (seed, dt) word and exact per path word."""
    dt_bits = int(np.float64(dt).view(np.uint64))
    return _mix64((master_seed & _MASK64) ^ _mix64(dt_bits)), path_index & _MASK64


def _philox_state(key0: int, key1: int) -> dict:
    return {
        "bit_generator": "Philox",
        "state": {
            "counter": np.zeros(4, dtype=np.uint64),
            "key": np.array([key0, key1], dtype=np.uint64),
        },
        "buffer": np.zeros(4, dtype=np.uint64),
        "buffer_pos": 4,
        "has_uint32": 0,
        "uinteger": 0,
    }


class NoiseStream:
    """Gaussian increments dW ~ N(0, dt) for one path of one discretization level."""

    def __init__(self, master_seed: int, path_index: int, dt: float):
        if path_index < 0 or path_index != int(path_index):
            raise ValueError(f"path_index must be a non-negative integer, got {path_index}")
        if not dt > 0.0 or not math.isfinite(dt):
            raise ValueError(f"dt must be positive, got {dt}")
        self.master_seed = int(master_seed)
        self.path_index = int(path_index)
        self.dt = float(dt)
        self.cursor = 0
        self._sqrt_dt = math.sqrt(dt)
        key = _stream_key(self.master_seed, self.path_index, self.dt)
        self._gen = np.random.Generator(np.random.Philox(key=np.array(key, dtype=np.uint64)))

    def next_increment(self) -> float:
        """Draw one increment and advance the cursor."""
        self.cursor += 1
        return self._sqrt_dt * float(self._gen.standard_normal())

    def increments(self, n: int) -> np.ndarray:
        """Draw the next n increments as one array (same values as n single draws)."""
        if n < 0:
            raise ValueError(f"n must be non-negative, got {n}")
        self.cursor += n
        return self._sqrt_dt * self._gen.standard_normal(n)


def gaussian_block(
    master_seed: int, first_path: int, n_paths: int, n_steps: int, dt: float
) -> np.ndarray:
    """Increments for paths first_path .. first_path + n_paths - 1 as one array.

    Row i replays NoiseStream(master_seed, first_path + i, dt) bit for bit;
    the batch form only avoids per-path Generator construction.
    """
    out = np.empty((n_paths, n_steps))
    bg = np.random.Philox(key=np.zeros(2, dtype=np.uint64))
    gen = np.random.Generator(bg)
    for i in range(n_paths):
        key0, key1 = _stream_key(master_seed, first_path + i, dt)
        bg.state = _philox_state(key0, key1)
        gen.standard_normal(out=out[i])
    out *= math.sqrt(dt)
    return out


class CoupledIncrements:
    """Fine-grid increments delivered one coarse step at a time.

    Each fine block holds coarsening_factor consecutive increments of the
    underlying stream; their sum is the matching coarse-grid increment, so
    trajectories stepped from the blocks and from the sums share one
    Brownian path. Bounded by n_coarse_steps; stepping past the horizon
    raises StreamExhausted.
    """

    def __init__(self, stream: NoiseStream, coarsening_factor: int, n_coarse_steps: int):
        factor = int(coarsening_factor)
        if factor < 1 or (factor & (factor - 1)) != 0:
            raise ValueError(f"coarsening_factor must be a power of two, got {coarsening_factor}")
        if n_coarse_steps < 0:
            raise ValueError(f"n_coarse_steps must be non-negative, got {n_coarse_steps}")
        self.stream = stream
        self.coarsening_factor = factor
        self.n_coarse_steps = int(n_coarse_steps)
        self._taken = 0

    @property
    def fine_dt(self) -> float:
        return self.stream.dt

    @property
    def coarse_dt(self) -> float:
        return self.stream.dt * self.coarsening_factor

    def next_fine_block(self) -> np.ndarray:
        """The coarsening_factor fine increments of the next coarse step."""
        if self._taken >= self.n_coarse_steps:
            raise StreamExhausted(
                f"coupled stream exhausted after {self.n_coarse_steps} coarse steps"
            )
        self._taken += 1
        return self.stream.increments(self.coarsening_factor)

    def coarse_increment(self) -> float:
        """Exact sum of the next fine block (advances one coarse step)."""
        return float(self.next_fine_block().sum())
