"""
Deterministic, splittable random streams.

A stream is identified by ``(seed, stream_id)`` where ``stream_id`` is a
hierarchical path such as ``("sensitivity", 17, "x")``. Each stream owns
counter-based Philox generators keyed through ``numpy.random.SeedSequence``
spawn keys, so a per-sample stream can be built directly from the master
seed and the sample index without replaying earlier samples.

Exponentials, uniforms and Poisson counts come from three separate
sub-generators of the stream. Two streams with the same identity therefore
hand out the same n-th exponential and the same n-th uniform regardless of
how the two kinds of draws interleave.
"""
import zlib
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

StreamTag = Union[int, str]

_EXPONENTIAL, _UNIFORM, _POISSON = 0, 1, 2
_BLOCK = 512


def _tag_key(tag: StreamTag) -> int:
    if isinstance(tag, (int, np.integer)):
        if tag < 0:
            raise ValueError(f"stream tags must be nonnegative, got {tag}")
        return int(tag)
    # crc32 is stable across interpreter runs, unlike hash()
    return zlib.crc32(str(tag).encode("utf-8")) | (1 << 32)


@dataclass
class DrawCounter:
    """Number of random variables handed out, by kind."""
    exponentials_drawn: int = 0
    uniforms_drawn: int = 0
    poissons_drawn: int = 0

    @property
    def total(self) -> int:
        return self.exponentials_drawn + self.uniforms_drawn + self.poissons_drawn

    def merge(self, other: "DrawCounter") -> "DrawCounter":
        """Add ``other`` into this counter and return it."""
        self.exponentials_drawn += other.exponentials_drawn
        self.uniforms_drawn += other.uniforms_drawn
        self.poissons_drawn += other.poissons_drawn
        return self

    def __add__(self, other: "DrawCounter") -> "DrawCounter":
        return DrawCounter().merge(self).merge(other)


class _Buffered:
    """Hands out scalars from blocks drawn by ``fill``."""

    __slots__ = ("_fill", "_block", "_position")

    def __init__(self, fill):
        self._fill = fill
        self._block = None
        self._position = _BLOCK

    def next(self) -> float:
        if self._position == _BLOCK:
            self._block = self._fill(_BLOCK).tolist()
            self._position = 0
        value = self._block[self._position]
        self._position += 1
        return value


class RandomStream:
    """A reproducible stream of unit exponentials, uniforms and Poisson counts.

    Args:
        seed: Master seed (64-bit unsigned).
        stream_id: Hierarchical identity; ints are used verbatim, strings hashed.
        counter: Optional shared :class:`DrawCounter`; child streams share the
            parent's counter so a whole sample's cost lands in one place.
    """

    def __init__(self, seed: int, stream_id: Tuple[StreamTag, ...] = (), counter: DrawCounter = None):
        if not 0 <= int(seed) < 2 ** 64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
        self.seed = int(seed)
        self.stream_id = tuple(stream_id)
        self.counter = counter if counter is not None else DrawCounter()
        key = tuple(_tag_key(tag) for tag in self.stream_id)
        self._generators = [
            np.random.Generator(np.random.Philox(np.random.SeedSequence(self.seed, spawn_key=key + (kind,))))
            for kind in (_EXPONENTIAL, _UNIFORM, _POISSON)
        ]
        self._exponentials = _Buffered(self._generators[_EXPONENTIAL].standard_exponential)
        self._uniforms = _Buffered(self._generators[_UNIFORM].random)

    def child(self, *tags: StreamTag) -> "RandomStream":
        """Independent sub-stream ``stream_id + tags`` sharing this stream's counter."""
        return RandomStream(self.seed, self.stream_id + tags, self.counter)

    def replica(self) -> "RandomStream":
        """A fresh stream with the same identity, replaying the same draws.

        Shares the draw counter, so replayed draws are still counted.
        """
        return RandomStream(self.seed, self.stream_id, self.counter)

    def draw_unit_exponential(self) -> float:
        """An Exp(1) variate."""
        self.counter.exponentials_drawn += 1
        return self._exponentials.next()

    def draw_uniform(self) -> float:
        """A Uniform[0, 1) variate."""
        self.counter.uniforms_drawn += 1
        return self._uniforms.next()

    def draw_poisson(self, mean: float) -> int:
        """A Poisson(mean) variate; numpy uses inversion below mean 10 and PTRS above."""
        if not mean >= 0 or mean == float("inf"):
            raise ValueError(f"Poisson mean must be finite and nonnegative, got {mean!r}")
        self.counter.poissons_drawn += 1
        if mean == 0:
            return 0
        return int(self._generators[_POISSON].poisson(mean))

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id!r})"


def sample_stream(seed: int, experiment: StreamTag, sample_index: int, *roles: StreamTag) -> RandomStream:
    """Stream for one sample of an experiment: ``(experiment, sample_index, *roles)``."""
    return RandomStream(seed, (experiment, sample_index) + roles)
