"""Arrival and service-time generators on the integer slot grid."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

ARRIVAL_KINDS = ("poisson", "bernoulli", "deterministic")
SERVICE_KINDS = ("deterministic", "geometric", "lognormal")


@dataclass(frozen=True)
class ArrivalSpec:
    rates: tuple[float, ...]
    kind: str = "poisson"
    cap: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if self.kind not in ARRIVAL_KINDS:
            raise ValueError(f"unknown arrival kind {self.kind!r}")
        if any(r < 0 for r in self.rates):
            raise ValueError("arrival rates must be non-negative")
        if self.kind == "bernoulli" and any(r > 1 for r in self.rates):
            raise ValueError("bernoulli arrivals need rates <= 1")
        if self.cap is not None and self.cap < 1:
            raise ValueError("arrival cap must be a positive integer")


def _deterministic_counts(rate: float, t0: int, n: int) -> np.ndarray:
    # floor(t * rate) increments; exact rational arithmetic keeps the pattern platform independent
    r = Fraction(repr(rate))
    ts = range(t0 - 1, t0 + n)
    marks = [math.floor(t * r) for t in ts]
    return np.diff(np.array(marks, dtype=np.int64))


def arrival_batch(spec: ArrivalSpec, t0: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Counts for slots ``t0 .. t0+n-1`` as an ``(n, N_T)`` integer array."""
    rates = np.array(spec.rates)
    if spec.kind == "poisson":
        counts = rng.poisson(rates, size=(n, rates.size))
    elif spec.kind == "bernoulli":
        counts = (rng.random((n, rates.size)) < rates).astype(np.int64)
    else:
        counts = np.stack([_deterministic_counts(r, t0, n) for r in spec.rates], axis=1)
    if spec.cap is not None:
        # inclusive cap: at most C_A arrivals of a type per slot
        np.minimum(counts, spec.cap, out=counts)
    return counts


def sample_arrivals(spec: ArrivalSpec, t: int, rng: np.random.Generator) -> list[int]:
    return arrival_batch(spec, t, 1, rng)[0].tolist()


@dataclass(frozen=True)
class ServiceSpec:
    """Service-time law; each (server, level) cell has mean ``1/alpha`` slots."""

    kind: str = "lognormal"
    sigma: float = 0.25
    s_max: int = 10_000

    def __post_init__(self):
        if self.kind not in SERVICE_KINDS:
            raise ValueError(f"unknown service kind {self.kind!r}")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.s_max < 1:
            raise ValueError("s_max must be a positive integer")

    def check_rate(self, alpha: float) -> None:
        mean = 1.0 / alpha
        if mean > self.s_max:
            raise ValueError(f"mean service {mean} slots exceeds support cap {self.s_max}")
        if mean < 1.0:
            raise ValueError(f"mean service {mean} slots is below one slot (rate {alpha} > 1)")


def service_batch(spec: ServiceSpec, alpha: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` integer service durations in ``[1, s_max]`` with target mean ``1/alpha``."""
    spec.check_rate(alpha)
    mean = 1.0 / alpha
    if spec.kind == "deterministic":
        return np.full(n, max(1, round(mean)), dtype=np.int64)
    if spec.kind == "geometric":
        x = rng.geometric(alpha, size=n)
    else:
        mu_log = math.log(mean) - spec.sigma ** 2 / 2
        x = np.ceil(rng.lognormal(mu_log, spec.sigma, size=n))
    return np.clip(x, 1, spec.s_max).astype(np.int64)


def sample_service(spec: ServiceSpec, L, m: int, n: int, rng: np.random.Generator) -> int:
    return int(service_batch(spec, L.distinct_rates[m][n], 1, rng)[0])


def effective_rates(spec: ServiceSpec, rates: Sequence[Sequence[float]], rng: np.random.Generator,
                    n_samples: int = 1_000_000) -> np.ndarray:
    """Monte-Carlo ``1 / E[T]`` of the discretised law for every distinct rate in ``rates``."""
    rates = np.asarray(rates, dtype=float)
    memo: dict[float, float] = {}
    out = np.empty_like(rates)
    for idx, a in np.ndenumerate(rates):
        a = float(a)
        if a not in memo:
            memo[a] = 1.0 / service_batch(spec, a, n_samples, rng).mean()
        out[idx] = memo[a]
    return out


class UniformStream:
    """Buffered ``random()`` draws from a numpy generator."""

    def __init__(self, rng: np.random.Generator, chunk: int = 8192):
        self._rng = rng
        self._chunk = chunk
        self._buf: list[float] = []
        self._pos = 0

    def random(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self._rng.random(self._chunk).tolist()
            self._pos = 0
        x = self._buf[self._pos]
        self._pos += 1
        return x


class ServiceStream:
    """Per-(server, level) buffers of pre-drawn service durations."""

    def __init__(self, spec: ServiceSpec, alphas: Sequence[Sequence[float]],
                 rng: np.random.Generator, chunk: int = 4096):
        self.spec = spec
        self._alphas = alphas
        self._rng = rng
        self._chunk = chunk
        self._bufs = [[[] for _ in row] for row in alphas]
        self._pos = [[0] * len(row) for row in alphas]
        for row in alphas:
            for a in row:
                spec.check_rate(a)

    def draw(self, m: int, n: int) -> int:
        pos = self._pos[m][n]
        buf = self._bufs[m][n]
        if pos >= len(buf):
            buf = service_batch(self.spec, self._alphas[m][n], self._chunk, self._rng).tolist()
            self._bufs[m][n] = buf
            pos = 0
        self._pos[m][n] = pos + 1
        return buf[pos]


class ArrivalStream:
    def __init__(self, spec: ArrivalSpec, rng: np.random.Generator, chunk: int = 4096):
        self.spec = spec
        self._rng = rng
        self._chunk = chunk
        self._t0 = 1
        self._buf: list[list[int]] = []

    def counts(self, t: int) -> list[int]:
        k = t - self._t0
        if k >= len(self._buf) or k < 0:
            self._t0 = t
            self._buf = arrival_batch(self.spec, t, self._chunk, self._rng).tolist()
            k = 0
        return self._buf[k]
