"""Thermal-bath Poisson point process of collision marks."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .collision import BathParams
from .errors import PreconditionError

CHUNK = 64


@dataclass(frozen=True)
class CollisionEvent:
    time: float
    position: float
    momentum: float


@dataclass(frozen=True)
class RngStream:
    """Reproducible, independent random stream keyed by ``(seed, stream_id)``.

    Backed by the counter-based Philox generator; the key is derived through
    ``SeedSequence`` so neighbouring stream ids are decorrelated.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = int(getattr(self, name))
            if not 0 <= v < 2**64:
                raise PreconditionError(f"{name} must be a 64-bit unsigned integer")
            object.__setattr__(self, name, v)

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.Philox(ss))

    def substream(self, k: int) -> "RngStream":
        """Distinct stream derived from this one; used when one run needs several."""
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id, int(k)))
        return RngStream(int(ss.generate_state(1, dtype=np.uint64)[0]), self.stream_id)


def iter_ppp(params: BathParams, gen: np.random.Generator) -> Iterator[CollisionEvent]:
    """Endless time-ordered marks; draws happen in fixed chunks so any prefix is horizon independent."""
    t = 0.0
    sd = np.sqrt(params.momentum_variance)
    R = params.cutoff
    while True:
        gaps = gen.exponential(1.0 / params.rate, CHUNK)
        xs = gen.uniform(-R, R, CHUNK)
        ps = gen.normal(0.0, sd, CHUNK)
        for g, x, p in zip(gaps, xs, ps):
            if g <= 0.0:
                continue
            t += float(g)
            yield CollisionEvent(t, float(x), float(p))


def sample_ppp(params: BathParams, horizon: float, rng: RngStream | np.random.Generator) -> list[CollisionEvent]:
    """All collisions in ``(0, horizon]``.

    Total intensity is ``rate`` per unit time: exponential gaps of mean
    ``1/rate``, positions uniform on ``[-cutoff, cutoff]``, momenta centred
    normal with variance ``1/beta``.
    """
    if not horizon > 0:
        raise PreconditionError("horizon must be positive")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    out = []
    for ev in iter_ppp(params, gen):
        if ev.time > horizon:
            break
        out.append(ev)
    return out


def events_to_text(events: list[CollisionEvent]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time", "position", "momentum"])
    for e in events:
        w.writerow([repr(e.time), repr(e.position), repr(e.momentum)])
    return buf.getvalue()


def events_from_text(text: str) -> list[CollisionEvent]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["time", "position", "momentum"]:
        raise ValueError("missing event header")
    return [CollisionEvent(float(a), float(b), float(c)) for a, b, c in rows[1:]]
