"""Bistatic signal matching.

Multiplying a compressed channel by the conjugate of its reciprocal partner
cancels the target phases and doubles the offset: every scatterer adds its
power to a single tone at 2*TO (delay axis) or 2*CFO (Doppler axis), with
cross-terms between scatterers landing at other frequencies.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .config import OfdmConfig
from .dd_processing import CompressedPair

AXES = ("delay", "doppler")


@dataclass(frozen=True)
class MatchedSignal:
    """Matched signal with its axis and sample step (df for delay, T for Doppler)."""

    g: np.ndarray
    axis: str
    step: float

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}, got {self.axis!r}")

    @property
    def sign(self) -> int:
        """Phase-slope sign of the steering vector on this axis."""
        return -1 if self.axis == "delay" else 1

    def steering(self, offset: float) -> np.ndarray:
        """Unit-amplitude tone produced by an offset (tone frequency is 2*offset)."""
        k = np.arange(len(self.g))
        return np.exp(self.sign * 2j * np.pi * k * self.step * 2 * offset)


@dataclass(frozen=True)
class BsmNoiseStats:
    sigma_t_sq: float
    sigma_f_sq: float


def match(h_fwd: np.ndarray, h_rev: np.ndarray, axis: str = "delay", step: float = 1.0) -> MatchedSignal:
    """g = h_fwd * conj(h_rev)."""
    h_fwd = np.asarray(h_fwd)
    h_rev = np.asarray(h_rev)
    if h_fwd.shape != h_rev.shape:
        raise ValueError(f"length mismatch: {h_fwd.shape} vs {h_rev.shape}")
    return MatchedSignal(h_fwd * np.conj(h_rev), axis, step)


def match_pair(fwd: CompressedPair, rev: CompressedPair, cfg: OfdmConfig) -> tuple[MatchedSignal, MatchedSignal]:
    """Matched signals for the TO branch and the CFO branch."""
    return (match(fwd.h_t, rev.h_t, "delay", cfg.delta_f),
            match(fwd.h_f, rev.h_f, "doppler", cfg.T))


def noise_stats(gamma_list: Iterable[float], P: int, Q: int, sigma_sq: float) -> BsmNoiseStats:
    """Variance of the aggregate noise on each matched signal.

    ``gamma_list`` holds the per-target SNRs |beta_k|^2 / sigma^2 of the
    targets captured by the selected bins.
    """
    gammas = np.asarray(list(gamma_list), dtype=float)
    if np.any(gammas < 0) or sigma_sq < 0 or P < 0 or Q < 0:
        raise ValueError("noise_stats inputs must be non-negative")
    beta_sq = float(np.sum(gammas)) * sigma_sq
    sigma_t_sq = sigma_sq * Q**2 * (2 * beta_sq * Q + sigma_sq)
    sigma_f_sq = sigma_sq * P**2 * (2 * beta_sq * P + sigma_sq)
    return BsmNoiseStats(sigma_t_sq, sigma_f_sq)
