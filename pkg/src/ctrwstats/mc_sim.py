"""
Monte Carlo sampling of the CTRW valley model.

Draws are generated in fixed-size blocks; block ``k`` gets its own PCG64
stream from ``SeedSequence(seed, spawn_key=(stream, k))`` and draw ``i`` of
the block consumes row ``i`` of a ``(block, 2)`` uniform array.  The value of
every draw is therefore a function of ``(seed, index)`` only, and the result
is bit-identical for any number of workers.
"""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .events import InterEventSample, ReturnSeries
from .extreme_model import LOG_MAX, WeibullParams, _excess
from .superstat import Direction, RelaxationSpec

log = logging.getLogger(__name__)

BLOCK = 1 << 16

_STREAM_PAIRS = 1
_STREAM_SERIES = 2


@dataclass(frozen=True)
class SimConfig:
    weibull: WeibullParams
    relaxation: RelaxationSpec
    q: float
    n_samples: int
    seed: int = 0
    n_workers: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.q) and self.q >= 0):
            raise ValueError("q must be finite and >= 0")
        if int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise ValueError("n_samples must be a positive integer")
        if int(self.n_workers) != self.n_workers or self.n_workers < 1:
            raise ValueError("n_workers must be a positive integer")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return {
            "weibull": self.weibull.to_dict(),
            "relaxation": self.relaxation.to_dict(),
            "q": self.q,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "n_workers": self.n_workers,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        return cls(
            WeibullParams.from_dict(d["weibull"]),
            RelaxationSpec.from_dict(d["relaxation"]),
            float(d["q"]),
            int(d["n_samples"]),
            int(d.get("seed", 0)),
            int(d.get("n_workers", 1)),
        )

    @classmethod
    def from_json(cls, path) -> "SimConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _uniforms(seed: int, stream: int, block: int, size: int) -> np.ndarray:
    """``(size, 2)`` uniforms strictly inside (0, 1)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(stream, block))
    rng = np.random.Generator(np.random.PCG64(ss))
    bits = rng.integers(0, 1 << 53, size=(size, 2), dtype=np.int64)
    return (bits + 0.5) * 2.0**-53


def _run_blocks(n: int, n_workers: int, fn) -> list:
    blocks = [(k, min(BLOCK, n - k * BLOCK)) for k in range((n + BLOCK - 1) // BLOCK)]
    if n_workers == 1 or len(blocks) == 1:
        return [fn(k, m) for k, m in blocks]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(lambda km: fn(*km), blocks))


def sample_pairs(c: SimConfig) -> tuple[np.ndarray, np.ndarray, int]:
    """Draw ``(eps, dt)`` pairs.

    ``eps`` follows the Weibull law conditioned on ``eps >= q``; given ``eps``
    the waiting time is exponential with mean ``tau(eps)``.  Draws whose
    relaxation time overflows are dropped; their count is returned third.
    """
    w, r = c.weibull, c.relaxation
    sign = 1.0 if r.direction is Direction.EXPANDING else -1.0
    log_tau0 = math.log(r.tau0)

    def block(k, m):
        u = _uniforms(c.seed, _STREAM_PAIRS, k, m)
        eps = _excess(w, c.q, u[:, 0])
        log_tau = log_tau0 + sign * (r.b_q * eps) ** r.eta
        ok = log_tau < LOG_MAX
        dt = -np.exp(np.where(ok, log_tau, 0.0)) * np.log(u[:, 1])
        return eps[ok], dt[ok], int(m - ok.sum())

    parts = _run_blocks(c.n_samples, c.n_workers, block)
    eps = np.concatenate([p[0] for p in parts])
    dt = np.concatenate([p[1] for p in parts])
    dropped = sum(p[2] for p in parts)
    if dropped:
        log.warning("dropped %d draws whose relaxation time overflowed", dropped)
    return eps, dt, dropped


def sample_interevents(c: SimConfig, mode: str = "loss") -> InterEventSample:
    """Simulated interevent sample; event times are cumulative waiting times from 0."""
    eps, dt, dropped = sample_pairs(c)
    times = np.concatenate([[0.0], np.cumsum(dt)])
    smp = InterEventSample(
        mode=mode,
        q=float(c.q),
        event_times=times,
        deltas=dt,
        r_q_empirical=float(dt.mean()) if dt.size else None,
        magnitudes=eps,
    )
    if dropped:
        smp.notes.append(f"{dropped} draws dropped: relaxation time overflow")
    return smp


def generate_series(
    p: WeibullParams,
    n: int,
    sign_prob: float = 0.5,
    seed: int = 0,
    n_workers: int = 1,
) -> ReturnSeries:
    """I.i.d. Weibull magnitudes with a negative sign drawn with probability ``sign_prob``.

    With losses counted as negative returns the loss-mode R_Q of this series is
    ``exp((Q/eps_bar)**eta) / sign_prob``.
    """
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    if not (0.0 <= sign_prob <= 1.0):
        raise ValueError("sign_prob must lie in [0, 1]")

    def block(k, m):
        u = _uniforms(seed, _STREAM_SERIES, k, m)
        mag = _excess(p, 0.0, u[:, 0])
        return np.where(u[:, 1] < sign_prob, -mag, mag)

    r = np.concatenate(_run_blocks(int(n), n_workers, block))
    return ReturnSeries(np.arange(int(n), dtype=np.int64), r)
