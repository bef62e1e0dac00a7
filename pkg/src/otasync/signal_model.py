"""Subcarrier-symbol domain sensing channels between node pairs.

Channels are synthesized directly on the P x Q grid (no CP, no time-domain
waveform).  For receiver ``n`` and transmitter ``m``::

    H[p, q] = sum_k beta_k exp(-j2pi p df (tau_k + ddt)) exp(+j2pi q T (fd_k + ddf))

with ``ddt = delta_t[m] - delta_t[n]`` and ``ddf = delta_f[m] - delta_f[n]``.
Swapping ``n`` and ``m`` flips the sign of both offsets while the target
terms stay put; that reciprocity is what the rest of the package exploits.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .config import SPEED_OF_LIGHT, OfdmConfig, Scene


class DegenerateGeometryError(ValueError):
    """A node coincides with a target, so path loss and TOF are undefined."""


class PilotError(ValueError):
    """Pilot entries are neither zero nor of unit modulus."""


class ICIWarning(UserWarning):
    """Doppler plus CFO exceeds a tenth of the subcarrier spacing."""


@dataclass(frozen=True)
class LinkParams:
    """Per-target time of flight (s), Doppler (Hz) and complex amplitude."""

    tau: np.ndarray
    f_d: np.ndarray
    beta: np.ndarray


@dataclass(frozen=True)
class SensingChannel:
    """P x Q channel matrix for receiver ``pair[0]`` and transmitter ``pair[1]``."""

    data: np.ndarray
    pair: tuple[int, int] = (0, 1)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


def delay_manifold(tau: float, cfg: OfdmConfig) -> np.ndarray:
    """r(tau) = exp(-j2pi p df tau), p = 0..P-1."""
    p = np.arange(cfg.P)
    return np.exp(-2j * np.pi * p * cfg.delta_f * tau)


def doppler_manifold(f_d: float, cfg: OfdmConfig) -> np.ndarray:
    """d(f_d) = exp(+j2pi q T f_d), q = 0..Q-1."""
    q = np.arange(cfg.Q)
    return np.exp(2j * np.pi * q * cfg.T * f_d)


def _beta_phase(scene: Scene, n: int, m: int, k: int) -> float:
    a, b = (min(n, m), max(n, m)) if scene.reciprocity == "strict" else (n, m)
    rng = np.random.default_rng([scene.seed, k, a, b])
    return rng.uniform(0.0, 2 * np.pi)


def link_params(scene: Scene, cfg: OfdmConfig, n: int, m: int, k: int | None = None) -> LinkParams:
    """Time of flight, bistatic Doppler and amplitude of the m -> target -> n path.

    Amplitude follows |beta|^2 = eta * rcs / (R_n^2 R_m^2) unless the scene
    pins the per-sample SNR.  The phase is a deterministic function of
    (scene seed, target, pair), shared by both directions under strict
    reciprocity.  Pass ``k`` to restrict the result to one target.
    """
    ks = range(len(scene.targets)) if k is None else [k]
    xn = np.asarray(scene.nodes[n].position, dtype=float)
    xm = np.asarray(scene.nodes[m].position, dtype=float)
    taus, fds, betas = [], [], []
    for kk in ks:
        tgt = scene.targets[kk]
        xk = np.asarray(tgt.position, dtype=float)
        vk = np.asarray(tgt.velocity, dtype=float)
        rn = np.linalg.norm(xk - xn)
        rm = np.linalg.norm(xk - xm)
        if rn == 0 or rm == 0:
            raise DegenerateGeometryError(f"target {kk} coincides with node {n if rn == 0 else m}")
        taus.append((rn + rm) / SPEED_OF_LIGHT)
        # closing speed along each leg, positive when the target approaches the node
        closing = -vk @ ((xk - xn) / rn) - vk @ ((xk - xm) / rm)
        fds.append(cfg.f_c / SPEED_OF_LIGHT * closing)
        if tgt.beta is not None:
            betas.append(complex(tgt.beta))
            continue
        if scene.snr_db is not None:
            mag2 = scene.noise_var * 10 ** (scene.snr_db / 10)
        else:
            mag2 = scene.eta * tgt.rcs / (rn**2 * rm**2)
        betas.append(np.sqrt(mag2) * np.exp(1j * _beta_phase(scene, n, m, kk)))
    return LinkParams(np.array(taus), np.array(fds), np.array(betas, dtype=complex))


def offset_diagonals(delta_t: float, delta_f: float, cfg: OfdmConfig) -> tuple[np.ndarray, np.ndarray]:
    """Diagonals of the TO and CFO distortion matrices."""
    return delay_manifold(delta_t, cfg), doppler_manifold(delta_f, cfg)


def channel_from_params(params: LinkParams, cfg: OfdmConfig, delta_t: float = 0.0,
                        delta_f: float = 0.0, pair: tuple[int, int] = (0, 1)) -> SensingChannel:
    """Assemble Lambda_t (R B D^T) Lambda_f from explicit link parameters."""
    p = np.arange(cfg.P)[:, None]
    q = np.arange(cfg.Q)[:, None]
    R = np.exp(-2j * np.pi * p * cfg.delta_f * (params.tau[None, :] + delta_t))
    D = np.exp(2j * np.pi * q * cfg.T * (params.f_d[None, :] + delta_f))
    return SensingChannel((R * params.beta[None, :]) @ D.T, pair)


def synthesize_channel(scene: Scene, cfg: OfdmConfig, n: int, m: int) -> SensingChannel:
    """Noise-free sensing channel H_{n,m} (receiver n, transmitter m)."""
    if not scene.targets:
        warnings.warn("scene has no targets; returning a zero channel", stacklevel=2)
        return SensingChannel(np.zeros((cfg.P, cfg.Q), dtype=complex), (n, m))
    ddt = scene.nodes[m].delta_t - scene.nodes[n].delta_t
    ddf = scene.nodes[m].delta_f - scene.nodes[n].delta_f
    params = link_params(scene, cfg, n, m)
    worst = np.max(np.abs(params.f_d + ddf))
    if worst > cfg.delta_f / 10:
        warnings.warn(
            f"link ({n},{m}): |f_d + CFO| = {worst:.4g} Hz exceeds delta_f/10 = "
            f"{cfg.delta_f / 10:.4g} Hz; ICI is not modelled",
            ICIWarning, stacklevel=2,
        )
    return channel_from_params(params, cfg, ddt, ddf, (n, m))


def add_noise(ch: SensingChannel, noise_var: float, rng: np.random.Generator) -> SensingChannel:
    """Add circularly-symmetric complex AWGN of variance ``noise_var`` per entry."""
    if noise_var < 0:
        raise ValueError(f"noise_var must be >= 0, got {noise_var}")
    if noise_var == 0:
        return SensingChannel(ch.data.copy(), ch.pair)
    scale = np.sqrt(noise_var / 2)
    z = scale * (rng.standard_normal(ch.shape) + 1j * rng.standard_normal(ch.shape))
    return SensingChannel(ch.data + z, ch.pair)


def random_pilot(cfg: OfdmConfig, rng: np.random.Generator) -> np.ndarray:
    """Unit-modulus QPSK pilot grid."""
    bits = rng.integers(0, 4, size=(cfg.P, cfg.Q))
    return np.exp(1j * (np.pi / 4 + np.pi / 2 * bits))


def fdm_pilots(cfg: OfdmConfig, n_nodes: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Orthogonal pilots on interleaved subcarrier combs (node i owns p = i mod n_nodes)."""
    base = random_pilot(cfg, rng)
    pilots = []
    for i in range(n_nodes):
        mask = (np.arange(cfg.P) % n_nodes == i)[:, None]
        pilots.append(np.where(mask, base, 0))
    return pilots


def demodulate(received: np.ndarray, pilot: np.ndarray, pair: tuple[int, int] = (0, 1)) -> SensingChannel:
    """Frequency-domain matched filter Y * conj(X).

    Pilot entries must be unit modulus, or exactly zero on subcarriers the
    transmitter does not occupy (FDM combs).
    """
    received = np.asarray(received)
    pilot = np.asarray(pilot)
    if received.shape != pilot.shape:
        raise ValueError(f"shape mismatch: received {received.shape}, pilot {pilot.shape}")
    mag = np.abs(pilot)
    if not np.all(np.isclose(mag, 1.0, atol=1e-9) | (mag == 0)):
        raise PilotError("pilot entries must have unit modulus (or be zero off-comb)")
    return SensingChannel(received * np.conj(pilot), pair)


def measure_channel(scene: Scene, cfg: OfdmConfig, n: int, m: int,
                    rng: np.random.Generator) -> SensingChannel:
    """Transmit a random pilot over H_{n,m}, add receiver noise and demodulate.

    Pilots from other transmitters are assumed perfectly orthogonal, so only
    the intended contribution and noise reach the matched filter.
    """
    h = synthesize_channel(scene, cfg, n, m)
    pilot = random_pilot(cfg, rng)
    y = add_noise(SensingChannel(h.data * pilot, (n, m)), scene.noise_var, rng)
    return demodulate(y.data, pilot, (n, m))
