"""Deterministic, seeded walk streams.

Every frog's trajectory is a pure function of (master seed, experiment tag,
origin site, frog index): direction codes come from a counter-based keyed
mixing function, so hitting times queried in any order, or in parallel, see
one consistent realization of the walk family.

Key derivation layout (all arithmetic mod 2^64; see docs/key-derivation.md
for frozen test vectors):

    base = absorb(mix64(master_seed), tag_fold(experiment_tag))
    key  = absorb*(absorb(base, purpose), field_1, ..., field_n)

    absorb(h, v) = mix64(((h + GAMMA) mod 2^64) XOR (v mod 2^64))
    mix64        = splitmix64 finalizer
    draw(key, k) = mix64(key XOR (k * WEYL mod 2^64))

Purposes: 1 = walk steps, 2 = configuration counts, 3 = percolation bits,
4 = origin-conditioned redraw, 5 = derived child seeds, 6 = bootstrap.
Walk key fields: (dim, x_1, ..., x_d, ell); coordinates are absorbed as
two's-complement 64-bit values.  The direction code of step k >= 1 is
draw(key, k) mod 2d, indexing lattice.step_vectors(d).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StreamCapError
from .lattice import Coords, step_vectors

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
WEYL = 0xD1B54A32D192ED03
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

PURPOSE_WALK = 1
PURPOSE_OMEGA = 2
PURPOSE_FIELD = 3
PURPOSE_CONDITION = 4
PURPOSE_CHILD = 5
PURPOSE_BOOTSTRAP = 6

DEFAULT_STREAM_CAP = 1 << 22


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def absorb(h: int, v: int) -> int:
    return mix64(((h + GAMMA) & MASK64) ^ (v & MASK64))


def tag_fold(tag: str) -> int:
    h = mix64(len(tag))
    for b in tag.encode("utf-8"):
        h = absorb(h, b)
    return h


def draw(key: int, counter: int) -> int:
    return mix64(key ^ ((counter * WEYL) & MASK64))


# numpy mirrors; uint64 arithmetic wraps mod 2^64, matching the scalar path


def mix64_np(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_M1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_M2)
    z ^= z >> np.uint64(31)
    return z


def absorb_np(h: np.ndarray, v: np.ndarray) -> np.ndarray:
    return mix64_np((h + np.uint64(GAMMA)) ^ v.astype(np.uint64))


def draw_np(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    return mix64_np(keys ^ (counters.astype(np.uint64) * np.uint64(WEYL)))


def uniform01(word: int) -> float:
    return (word >> 11) * 2.0**-53


def uniform01_np(words: np.ndarray) -> np.ndarray:
    return (words >> np.uint64(11)).astype(np.float64) * 2.0**-53


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus a tag mixed into every derived key."""

    master_seed: int
    experiment_tag: str = ""

    def base(self) -> int:
        return absorb(mix64(self.master_seed & MASK64), tag_fold(self.experiment_tag))

    def purpose_key(self, purpose: int) -> int:
        return absorb(self.base(), purpose)

    def child(self, stream: str, index: int = 0) -> "SeedSpec":
        """A derived seed for a named sub-experiment; disjoint by construction."""
        h = absorb(self.purpose_key(PURPOSE_CHILD), tag_fold(stream))
        h = absorb(h, index)
        return SeedSpec(master_seed=h, experiment_tag=self.experiment_tag)


def site_key(seed: SeedSpec, purpose: int, x: Coords) -> int:
    h = absorb(seed.purpose_key(purpose), len(x))
    for c in x:
        h = absorb(h, c)
    return h


def site_keys_np(seed: SeedSpec, purpose: int, coords: np.ndarray) -> np.ndarray:
    n, d = coords.shape
    h = np.full(n, absorb(seed.purpose_key(purpose), d), dtype=np.uint64)
    for j in range(d):
        h = absorb_np(h, coords[:, j].astype(np.int64).view(np.uint64))
    return h


def walk_key(seed: SeedSpec, x: Coords, ell: int) -> int:
    if ell < 1:
        raise ValueError(f"frog index must be >= 1, got {ell}")
    return absorb(site_key(seed, PURPOSE_WALK, x), ell)


def walk_keys_np(seed: SeedSpec, coords: np.ndarray, ells: np.ndarray) -> np.ndarray:
    h = site_keys_np(seed, PURPOSE_WALK, coords)
    return absorb_np(h, ells.astype(np.int64).view(np.uint64))


def step_code(key: int, k: int, dim: int) -> int:
    """Direction code of step k >= 1 for the stream with this key."""
    return draw(key, k) % (2 * dim)


def step_codes_np(keys: np.ndarray, counters: np.ndarray, dim: int) -> np.ndarray:
    return (draw_np(keys, counters) % np.uint64(2 * dim)).astype(np.int64)


class WalkStream:
    """Lazily materialized trajectory of one frog.

    Only the direction-code cache mutates; extending it never changes
    previously returned positions.  ``max_steps`` bounds cache growth and
    overflow raises instead of silently truncating.
    """

    def __init__(self, seed: SeedSpec, origin: Coords, ell: int, max_steps: int = DEFAULT_STREAM_CAP):
        self.origin = tuple(origin)
        self.ell = int(ell)
        self.dim = len(origin)
        self.key = walk_key(seed, self.origin, self.ell)
        self.max_steps = int(max_steps)
        self._codes = np.empty(0, dtype=np.uint8)

    def _ensure(self, k: int) -> None:
        have = self._codes.shape[0]
        if k <= have:
            return
        if k > self.max_steps:
            raise StreamCapError(
                f"stream {(self.origin, self.ell)} asked for {k} steps, cap is {self.max_steps}"
            )
        new_len = min(self.max_steps, max(64, 2 * have, k))
        counters = np.arange(have + 1, new_len + 1, dtype=np.uint64)
        keys = np.full(counters.shape, self.key, dtype=np.uint64)
        fresh = step_codes_np(keys, counters, self.dim).astype(np.uint8)
        self._codes = np.concatenate([self._codes, fresh])

    def codes(self, k: int) -> np.ndarray:
        """Direction codes of steps 1..k."""
        self._ensure(k)
        return self._codes[:k]

    def positions(self, k: int) -> np.ndarray:
        """Positions S_0..S_k as a (k+1, d) array."""
        out = np.empty((k + 1, self.dim), dtype=np.int64)
        out[0] = self.origin
        if k:
            steps = step_vectors(self.dim)[self.codes(k).astype(np.int64)]
            out[1:] = np.cumsum(steps, axis=0) + np.asarray(self.origin, dtype=np.int64)
        return out

    def position(self, k: int) -> Coords:
        if k == 0:
            return self.origin
        return tuple(int(c) for c in self.positions(k)[k])


def derive_stream(seed: SeedSpec, x: Coords, ell: int, max_steps: int = DEFAULT_STREAM_CAP) -> WalkStream:
    return WalkStream(seed, x, ell, max_steps=max_steps)
