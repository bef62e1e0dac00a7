"""Offset estimators on matched signals.

* ``mle``: profiled nonlinear least squares. For a fixed offset the amplitude
  has a closed-form LS solution, so the search reduces to maximising the
  periodogram |a(2*offset)^H g|^2 over the bracket given by the peak bins,
  first on a dense grid, then with bounded Brent refinement.
* ``mp``: single-pole matrix pencil on the principal right singular vector of
  the Hankel matrix of g.
* ``cc``: on-grid baseline; circular cross-correlation of zero-padded
  delay/Doppler power profiles of the two reciprocal channels.

Internally every search runs in normalised tone frequency (cycles per
sample); results are converted to seconds and Hz on the way out.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .bsm import MatchedSignal, match_pair
from .config import OfdmConfig
from .dd_processing import DelayDopplerSpectrum, decouple, spectrum_to_channel
from .signal_model import SensingChannel

METHODS = ("mle", "mp", "cc")


class EstimationError(RuntimeError):
    """The estimator cannot produce an offset from its input."""


@dataclass(frozen=True)
class BranchEstimate:
    """Offset on one branch (s for delay, Hz for Doppler) plus diagnostics."""

    offset: float
    info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class OffsetEstimate:
    delta_t: float
    delta_f: float
    method: str
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PencilConfig:
    """Pencil parameters; ``None`` means floor(length / 3)."""

    L_t: int | None = None
    L_f: int | None = None

    @staticmethod
    def resolve(L: int | None, length: int) -> int:
        L = length // 3 if L is None else int(L)
        if not 1 <= L < length - 1:
            raise ValueError(f"pencil parameter {L} invalid for length {length}")
        return L


def _wrap(diff: int, size: int) -> int:
    return (diff + size // 2) % size - size // 2


def initial_estimate(p_fwd: int, p_rev: int, q_fwd: int, q_rev: int,
                     cfg: OfdmConfig) -> tuple[float, float]:
    """Coarse TO/CFO from the peak bins of the two reciprocal spectra.

    Bin differences are wrapped to the nearest circular distance.
    """
    dp = _wrap(p_fwd - p_rev, cfg.P)
    dq = _wrap(q_fwd - q_rev, cfg.Q)
    return dp / (2 * cfg.P * cfg.delta_f), dq / (2 * cfg.Q * cfg.T)


def search_bounds(init_t: float, init_f: float, cfg: OfdmConfig) -> tuple[tuple[float, float], tuple[float, float]]:
    """Fine-search intervals: half a delay/Doppler bin either side of the coarse estimate."""
    ht = 1 / (2 * cfg.P * cfg.delta_f)
    hf = 1 / (2 * cfg.Q * cfg.T)
    return (init_t - ht, init_t + ht), (init_f - hf, init_f + hf)


def _periodogram(g: np.ndarray, nu: np.ndarray, sign: int) -> np.ndarray:
    k = np.arange(len(g))
    A = np.exp(-sign * 2j * np.pi * np.outer(nu, k))
    return np.abs(A @ g) ** 2


def estimate_mle(sig: MatchedSignal, init: float = 0.0, bounds: tuple[float, float] | None = None,
                 grid_points: int = 64, xatol: float = 1e-12) -> BranchEstimate:
    """Minimise ||g - b a(2*offset)||^2 over the bounded offset interval.

    ``bounds`` defaults to ``init`` +/- half a bin of the branch. The grid is
    at least 64 points; refinement is bounded Brent in units of grid steps.
    The tone frequency 2*offset*step is returned wrapped to [-1/2, 1/2).
    """
    g = np.asarray(sig.g)
    n = len(g)
    if not np.any(g):
        raise EstimationError("matched signal is identically zero")
    if bounds is None:
        half = 1 / (2 * n * sig.step)
        bounds = (init - half, init + half)
    lo, hi = (2 * b * sig.step for b in bounds)
    grid = np.linspace(lo, hi, max(int(grid_points), 64))
    dnu = grid[1] - grid[0]
    J = _periodogram(g, grid, sig.sign)
    i = int(np.argmax(J))
    energy = float(np.vdot(g, g).real)

    def neg(u):
        return -_periodogram(g, np.array([grid[i] + u * dnu]), sig.sign)[0]

    u_lo = -1.0 if i > 0 else 0.0
    u_hi = 1.0 if i < len(grid) - 1 else 0.0
    res = minimize_scalar(neg, bounds=(u_lo, u_hi), method="bounded",
                          options={"xatol": xatol, "maxiter": 500})
    converged = bool(res.success)
    if converged and -res.fun >= J[i]:
        nu_hat, J_hat = grid[i] + res.x * dnu, -res.fun
    else:
        if not converged:
            warnings.warn("MLE refinement did not converge; returning grid optimum", RuntimeWarning, stacklevel=2)
        nu_hat, J_hat = grid[i], J[i]
    # the cost is 1-periodic in nu; report the principal alias
    nu_hat = (nu_hat + 0.5) % 1.0 - 0.5
    return BranchEstimate(nu_hat / (2 * sig.step), {
        "init": init,
        "bounds": tuple(bounds),
        "grid_points": len(grid),
        "grid_cost": energy - J[i] / n,
        "cost": energy - J_hat / n,
        "converged": converged,
    })


def hankel(g: np.ndarray, L: int) -> np.ndarray:
    """(len - L) x (L + 1) Hankel matrix, H[i, j] = g[i + j]."""
    g = np.asarray(g)
    rows = len(g) - L
    idx = np.arange(rows)[:, None] + np.arange(L + 1)[None, :]
    return g[idx]


def estimate_mp(sig: MatchedSignal, L: int | None = None) -> BranchEstimate:
    """Single-pole matrix pencil from the principal right singular vector."""
    g = np.asarray(sig.g)
    L = PencilConfig.resolve(L, len(g))
    try:
        _, s, Vh = np.linalg.svd(hankel(g, L), full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise EstimationError(f"SVD failed: {exc}") from exc
    if not s[0] > 0:
        raise EstimationError("principal singular value is zero")
    v = Vh[0].conj()
    v1, v2 = v[:-1], v[1:]
    lam = np.vdot(v2, v1) / np.vdot(v1, v1)
    offset = sig.sign * np.angle(lam) / (4 * np.pi * sig.step)
    ratio = float(s[1] / s[0]) if len(s) > 1 else 0.0
    return BranchEstimate(float(offset), {"L": L, "pole": complex(lam), "sv_ratio": ratio})


def _profiles(H: np.ndarray, zp: int) -> tuple[np.ndarray, np.ndarray]:
    P, Q = H.shape
    padded = np.zeros((zp * P, zp * Q), dtype=complex)
    padded[:P, :Q] = H
    power = np.abs(np.fft.fft(np.fft.ifft(padded, axis=0), axis=1)) ** 2
    return power.sum(axis=1), power.sum(axis=0)


def _xcorr_lag(a: np.ndarray, b: np.ndarray) -> int:
    xc = np.fft.ifft(np.fft.fft(a) * np.conj(np.fft.fft(b))).real
    return _wrap(int(np.argmax(xc)), len(a))


def estimate_cc(fwd: SensingChannel | DelayDopplerSpectrum | np.ndarray,
                rev: SensingChannel | DelayDopplerSpectrum | np.ndarray,
                cfg: OfdmConfig, zero_pad: int = 8) -> OffsetEstimate:
    """Spectral cross-correlation baseline (on-grid).

    Both channels are zero-padded to (zp*P) x (zp*Q); the delay and Doppler
    power profiles of the padded spectra are circularly cross-correlated and
    half the argmax lag is the offset.
    """
    zp = int(zero_pad)
    if zp < 1 or zp != zero_pad:
        raise ValueError(f"zero_pad must be a positive integer, got {zero_pad}")

    def channel(x):
        if isinstance(x, DelayDopplerSpectrum):
            return spectrum_to_channel(x).data
        return x.data if isinstance(x, SensingChannel) else np.asarray(x)

    dly_f, dop_f = _profiles(channel(fwd), zp)
    dly_r, dop_r = _profiles(channel(rev), zp)
    lag_t = _xcorr_lag(dly_f, dly_r)
    lag_f = _xcorr_lag(dop_f, dop_r)
    return OffsetEstimate(
        lag_t / (2 * zp * cfg.P * cfg.delta_f),
        lag_f / (2 * zp * cfg.Q * cfg.T),
        "cc",
        {"lag_t": lag_t, "lag_f": lag_f, "zero_pad": zp},
    )


def estimate_offsets(fwd: SensingChannel | np.ndarray, rev: SensingChannel | np.ndarray,
                     cfg: OfdmConfig, method: str = "mle", pencil: PencilConfig | None = None,
                     zero_pad: int = 8, grid_points: int = 64) -> OffsetEstimate:
    """Pairwise TO/CFO between the receiver of ``fwd`` and the receiver of ``rev``.

    ``fwd`` is H_{n,m} and ``rev`` is H_{m,n}; the result estimates
    delta_{m} - delta_{n} for both TO and CFO.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if method == "cc":
        return estimate_cc(fwd, rev, cfg, zero_pad)
    _, cp_f = decouple(fwd)
    _, cp_r = decouple(rev)
    g_t, g_f = match_pair(cp_f, cp_r, cfg)
    init_t, init_f = initial_estimate(cp_f.p_hat, cp_r.p_hat, cp_f.q_hat, cp_r.q_hat, cfg)
    diag = {"p_hat": (cp_f.p_hat, cp_r.p_hat), "q_hat": (cp_f.q_hat, cp_r.q_hat),
            "init": (init_t, init_f)}
    if method == "mle":
        bt, bf = search_bounds(init_t, init_f, cfg)
        est_t = estimate_mle(g_t, init_t, bt, grid_points)
        est_f = estimate_mle(g_f, init_f, bf, grid_points)
    else:
        pencil = pencil or PencilConfig()
        est_t = estimate_mp(g_t, pencil.L_t)
        est_f = estimate_mp(g_f, pencil.L_f)
    diag["to"] = est_t.info
    diag["cfo"] = est_f.info
    return OffsetEstimate(est_t.offset, est_f.offset, method, diag)
