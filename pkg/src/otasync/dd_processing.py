"""Delay-Doppler decoupling of a sensing channel.

Transform convention: ``C = ifft(H, axis=0)`` followed by ``fft(., axis=1)``,
i.e. the subcarrier-axis inverse DFT carries 1/P and the symbol-axis forward
DFT is unnormalised.  The compressed channels are then

    h_t[p] = sum_q H[p, q] exp(-j2pi q q_hat / Q)
    h_f[q] = sum_p H[p, q] exp(+j2pi p p_hat / P)

so a target sitting on the selected bin contributes Q*beta*r(tau) and
P*beta*d(f_d) respectively, and white input noise of variance s2 becomes
white noise of variance s2*Q on h_t and s2*P on h_f.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signal_model import SensingChannel


class EmptySpectrumError(ValueError):
    """The delay-Doppler spectrum carries no energy."""


@dataclass(frozen=True)
class DelayDopplerSpectrum:
    data: np.ndarray
    pair: tuple[int, int] = (0, 1)


@dataclass(frozen=True)
class CompressedPair:
    """Doppler-compressed ``h_t`` (length P) and delay-compressed ``h_f`` (length Q)."""

    h_t: np.ndarray
    h_f: np.ndarray
    p_hat: int
    q_hat: int


def _as_array(ch) -> tuple[np.ndarray, tuple[int, int]]:
    if isinstance(ch, (SensingChannel, DelayDopplerSpectrum)):
        return ch.data, ch.pair
    return np.asarray(ch), (0, 1)


def delay_doppler_spectrum(ch: SensingChannel | np.ndarray) -> DelayDopplerSpectrum:
    H, pair = _as_array(ch)
    if H.ndim != 2:
        raise ValueError(f"expected a P x Q matrix, got shape {H.shape}")
    return DelayDopplerSpectrum(np.fft.fft(np.fft.ifft(H, axis=0), axis=1), pair)


def spectrum_to_channel(spec: DelayDopplerSpectrum) -> SensingChannel:
    """Inverse of :func:`delay_doppler_spectrum`."""
    return SensingChannel(np.fft.fft(np.fft.ifft(spec.data, axis=1), axis=0), spec.pair)


def peak_indices(spec: DelayDopplerSpectrum | np.ndarray) -> tuple[int, int]:
    """Delay row and Doppler column with the largest summed power.

    Ties resolve to the smallest index.
    """
    C, _ = _as_array(spec)
    power = np.abs(C) ** 2
    if not np.any(power > 0):
        raise EmptySpectrumError("empty spectrum")
    # np.argmax returns the first maximiser
    return int(np.argmax(power.sum(axis=1))), int(np.argmax(power.sum(axis=0)))


def ranked_bins(spec: DelayDopplerSpectrum | np.ndarray, count: int = 2) -> dict[str, list[tuple[int, float]]]:
    """Top ``count`` delay and Doppler bins with their summed powers (diagnostics)."""
    C, _ = _as_array(spec)
    power = np.abs(C) ** 2
    out = {}
    for name, prof in (("delay", power.sum(axis=1)), ("doppler", power.sum(axis=0))):
        order = np.argsort(-prof, kind="stable")[:count]
        out[name] = [(int(i), float(prof[i])) for i in order]
    return out


def compress(spec: DelayDopplerSpectrum | np.ndarray, p_hat: int, q_hat: int) -> CompressedPair:
    C, _ = _as_array(spec)
    P, Q = C.shape
    if not (0 <= p_hat < P and 0 <= q_hat < Q):
        raise IndexError(f"bin ({p_hat}, {q_hat}) outside {P} x {Q} spectrum")
    h_t = np.fft.fft(C[:, q_hat])
    # ifft's 1/Q undoes the symbol-axis DFT; the remaining 1/P from the
    # subcarrier IDFT is removed so h_f carries the P-fold coherent gain
    h_f = P * np.fft.ifft(C[p_hat, :])
    return CompressedPair(h_t, h_f, int(p_hat), int(q_hat))


def decouple(ch: SensingChannel | np.ndarray) -> tuple[DelayDopplerSpectrum, CompressedPair]:
    """Spectrum, peak selection and compression in one call."""
    spec = delay_doppler_spectrum(ch)
    p_hat, q_hat = peak_indices(spec)
    return spec, compress(spec, p_hat, q_hat)
