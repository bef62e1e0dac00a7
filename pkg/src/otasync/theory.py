"""Closed-form performance bounds.

Pairwise TO/CFO CRBs on the matched signal, the N-node centred pairwise
synchronisation bound under PPP node placement, and the hybrid CRB of
target localisation when bistatic TOFs carry unknown time offsets.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import SPEED_OF_LIGHT, OfdmConfig

COND_LIMIT = 1e12


class SingularFisherError(np.linalg.LinAlgError):
    """A Fisher information block is singular or too ill-conditioned to invert."""

    def __init__(self, block: str, cond: float):
        super().__init__(f"singular Fisher information in block '{block}' (cond={cond:.3g})")
        self.block = block
        self.cond = cond


@dataclass(frozen=True)
class CrbReport:
    crb_to: float
    crb_cfo: float
    gamma_t: float
    gamma_f: float
    P: int
    Q: int
    delta_f: float
    T: float


@dataclass(frozen=True)
class CpsBound:
    total_var_to: float
    total_var_cfo: float
    N: int
    mu: float
    eta: float
    alpha: float
    sigma_sq: float


def crb_to(gamma_t: float, P: int, Q: int, delta_f: float) -> float:
    """TO CRB (s^2); ``gamma_t`` is the summed per-sample target SNR."""
    if not gamma_t > 0:
        raise ValueError(f"gamma_t must be positive, got {gamma_t}")
    if P < 2:
        raise ValueError("P must be >= 2")
    return 3 * (1 + 2 * gamma_t * Q) / (8 * np.pi**2 * delta_f**2 * P * (P**2 - 1) * gamma_t**2 * Q**2)


def crb_cfo(gamma_f: float, P: int, Q: int, T: float) -> float:
    """CFO CRB (Hz^2)."""
    if not gamma_f > 0:
        raise ValueError(f"gamma_f must be positive, got {gamma_f}")
    if Q < 2:
        raise ValueError("Q must be >= 2")
    return 3 * (1 + 2 * gamma_f * P) / (8 * np.pi**2 * T**2 * Q * (Q**2 - 1) * gamma_f**2 * P**2)


def crb_report(gamma: float, cfg: OfdmConfig, gamma_f: float | None = None) -> CrbReport:
    gf = gamma if gamma_f is None else gamma_f
    return CrbReport(crb_to(gamma, cfg.P, cfg.Q, cfg.delta_f), crb_cfo(gf, cfg.P, cfg.Q, cfg.T),
                     gamma, gf, cfg.P, cfg.Q, cfg.delta_f, cfg.T)


def expected_sq_distance(i: int, mu: float) -> float:
    """E[R_i^2] for the i-th nearest point of a planar PPP of intensity ``mu``."""
    return i / (mu * np.pi)


def cps_bound(N: int, mu: float, eta: float, alpha: float, sigma_sq: float, cfg: OfdmConfig) -> CpsBound:
    """High-SNR lower bound on the summed TO/CFO variance of N-node CPS."""
    if N < 2:
        raise ValueError("CPS needs N >= 2")
    if not mu > 0:
        raise ValueError("mu must be positive")
    common = 3 * sigma_sq * (N - 1) * (N + 2) / (8 * np.pi**4 * eta * alpha * mu**2)
    return CpsBound(
        common / (cfg.delta_f**2 * cfg.P**3 * cfg.Q),
        common / (cfg.T**2 * cfg.P * cfg.Q**3),
        N, mu, eta, alpha, sigma_sq,
    )


def select_reference(node_distances: Sequence[float]) -> int:
    """Index of the node closest to the target (first one on ties)."""
    d = np.asarray(node_distances, dtype=float)
    if d.size == 0:
        raise ValueError("no nodes")
    return int(np.argmin(d))


def cps_crb_sum(node_distances: Sequence[float], reference: int, eta: float, alpha: float,
                sigma_sq: float, cfg: OfdmConfig) -> tuple[float, float]:
    """Exact sum of pairwise TO and CFO CRBs for one geometry and reference."""
    d = np.asarray(node_distances, dtype=float)
    tot_t = tot_f = 0.0
    for n in range(len(d)):
        if n == reference:
            continue
        gamma = eta * alpha / (d[reference] ** 2 * d[n] ** 2 * sigma_sq)
        tot_t += crb_to(gamma, cfg.P, cfg.Q, cfg.delta_f)
        tot_f += crb_cfo(gamma, cfg.P, cfg.Q, cfg.T)
    return tot_t, tot_f


def tof_variance(beta_sq: float, sigma_sq: float, P: int, Q: int, delta_f: float) -> float:
    """Variance (s^2) of a single-link TOF estimate."""
    if not beta_sq > 0:
        raise ValueError("beta_sq must be positive")
    return 3 * sigma_sq / (2 * np.pi**2 * beta_sq * delta_f**2 * P**3 * Q)


# -- localisation -----------------------------------------------------------

@dataclass
class LocalizationProblem:
    """Inputs of the localisation hybrid CRB.

    Attributes:
        nodes: (N, 2) node positions in metres.
        target: (2,) target position.
        tof_var: (N, N) TOF variances sigma_R^2 (s^2), entry [n, m] for
            receiver n and transmitter m.
        to_prior_var: prior variance (s^2) of each bistatic TO; a scalar or an
            (N, N) array.  ``np.inf`` means no prior, 0 means perfectly
            synchronised.
        mode: ``"centralized"`` or ``"decentralized"``.
        node: receiving node for decentralized mode.
    """

    nodes: np.ndarray
    target: np.ndarray
    tof_var: np.ndarray
    to_prior_var: float | np.ndarray = np.inf
    mode: str = "centralized"
    node: int = 0

    def __post_init__(self):
        self.nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))
        self.target = np.asarray(self.target, dtype=float).ravel()
        N = len(self.nodes)
        self.tof_var = np.broadcast_to(np.asarray(self.tof_var, dtype=float), (N, N))
        if self.mode not in ("centralized", "decentralized"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0 <= self.node < N:
            raise ValueError(f"node index {self.node} out of range")

    @property
    def N(self) -> int:
        return len(self.nodes)

    def prior_var(self, n: int, m: int) -> float:
        v = np.asarray(self.to_prior_var, dtype=float)
        return float(v) if v.ndim == 0 else float(v[n, m])


def tof(nodes: np.ndarray, target: np.ndarray, n: int, m: int) -> float:
    nodes = np.asarray(nodes, dtype=float)
    t = np.asarray(target, dtype=float)
    return (np.linalg.norm(t - nodes[n]) + np.linalg.norm(t - nodes[m])) / SPEED_OF_LIGHT


def tof_gradient(nodes: np.ndarray, target: np.ndarray, n: int, m: int) -> np.ndarray:
    """[d tau_nm / dx, d tau_nm / dy]."""
    nodes = np.asarray(nodes, dtype=float)
    t = np.asarray(target, dtype=float)
    un = (t - nodes[n]) / np.linalg.norm(t - nodes[n])
    um = (t - nodes[m]) / np.linalg.norm(t - nodes[m])
    return (un + um) / SPEED_OF_LIGHT


def _parametrisation(problem: LocalizationProblem):
    """TOF parameters, TO parameters and measurement list for the chosen mode.

    Each measurement is (receiver, transmitter, tof index, to index or None,
    sign of the TO term).  Centralised mode folds (n, m)/(m, n) into one TOF
    and one TO with opposite signs; decentralised mode keeps node ``n``'s
    receptions only.
    """
    N = problem.N
    if problem.mode == "centralized":
        tof_pairs = [(n, m) for n in range(N) for m in range(n, N)]
        to_pairs = [(n, m) for n in range(N) for m in range(n + 1, N)]
        t_idx = {p: i for i, p in enumerate(tof_pairs)}
        d_idx = {p: i for i, p in enumerate(to_pairs)}
        meas = []
        for n in range(N):
            for m in range(N):
                key = (min(n, m), max(n, m))
                if n == m:
                    meas.append((n, m, t_idx[key], None, 0))
                else:
                    meas.append((n, m, t_idx[key], d_idx[key], 1 if n < m else -1))
    else:
        n = problem.node
        tof_pairs = [(n, m) for m in range(N)]
        to_pairs = [(n, m) for m in range(N) if m != n]
        d_idx = {p: i for i, p in enumerate(to_pairs)}
        meas = [(n, m, m, d_idx.get((n, m)), 0 if m == n else 1) for m in range(N)]
    return tof_pairs, to_pairs, meas


def _checked_inv(F: np.ndarray, block: str) -> np.ndarray:
    cond = np.linalg.cond(F)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularFisherError(block, cond)
    return np.linalg.inv(F)


def fisher_blocks(problem: LocalizationProblem):
    """(J, F_tt, F_td, F_dd, F_prior) of the Gaussian TOF measurement model.

    Times are expressed in metres (multiplied by c) to keep the blocks well
    scaled; the returned Jacobian is dimensionless accordingly.
    """
    tof_pairs, to_pairs, meas = _parametrisation(problem)
    nt, nd = len(tof_pairs), len(to_pairs)
    Ht = np.zeros((len(meas), nt))
    Hd = np.zeros((len(meas), nd))
    w = np.zeros(len(meas))
    for row, (n, m, ti, di, sign) in enumerate(meas):
        Ht[row, ti] = 1.0
        if di is not None:
            Hd[row, di] = sign
        w[row] = 1.0 / (problem.tof_var[n, m] * SPEED_OF_LIGHT**2)
    F_tt = Ht.T @ (w[:, None] * Ht)
    F_td = Ht.T @ (w[:, None] * Hd)
    F_dd = Hd.T @ (w[:, None] * Hd)
    prior = np.array([problem.prior_var(n, m) for (n, m) in to_pairs]) * SPEED_OF_LIGHT**2
    with np.errstate(divide="ignore"):
        F_p = np.diag(np.where(np.isinf(prior), 0.0, 1.0 / prior)) if nd else np.zeros((0, 0))
    J = np.array([tof_gradient(problem.nodes, problem.target, n, m) for (n, m) in tof_pairs]) * SPEED_OF_LIGHT
    return J, F_tt, F_td, F_dd, F_p


def position_fim(problem: LocalizationProblem) -> np.ndarray:
    """Effective 2 x 2 Fisher information of the target position (1/m^2)."""
    J, F_tt, F_td, F_dd, F_p = fisher_blocks(problem)
    F_pos = J.T @ F_tt @ J
    info = np.diag(F_p)
    # offsets with zero prior variance are known exactly and leave the nuisance set
    free = ~np.isinf(info)
    if not np.any(free):
        return F_pos
    A = (F_dd + np.diag(np.where(free, info, 0.0)))[np.ix_(free, free)]
    cross = (J.T @ F_td)[:, free]
    return F_pos - cross @ _checked_inv(A, "time-offset (F_dd + F_prior)") @ cross.T


def localization_hcrb(problem: LocalizationProblem) -> float:
    """Trace of the position block of the inverse hybrid FIM (m^2)."""
    return float(np.trace(_checked_inv(position_fim(problem), "position (Schur complement)")))


def decentralized_fused_hcrb(problem: LocalizationProblem) -> float:
    """Mean of the per-node decentralised HCRBs (fusion by plain averaging)."""
    vals = []
    for n in range(problem.N):
        sub = LocalizationProblem(problem.nodes, problem.target, problem.tof_var,
                                  problem.to_prior_var, "decentralized", n)
        vals.append(localization_hcrb(sub))
    return float(np.mean(vals))


def link_tof_variances(nodes: np.ndarray, target: np.ndarray, eta: float, alpha: float,
                       sigma_sq: float, cfg: OfdmConfig) -> np.ndarray:
    """sigma_R^2 for every (receiver, transmitter) pair under the path-loss model."""
    nodes = np.asarray(nodes, dtype=float)
    R = np.linalg.norm(nodes - np.asarray(target, dtype=float), axis=1)
    beta_sq = eta * alpha / np.outer(R**2, R**2)
    return tof_variance(1.0, sigma_sq, cfg.P, cfg.Q, cfg.delta_f) / beta_sq


def reference_sweep(node_distances: Sequence[float], eta: float, alpha: float,
                    sigma_sq: float, cfg: OfdmConfig) -> list[tuple[float, float]]:
    """Summed pairwise CRBs for every possible reference choice."""
    return [cps_crb_sum(node_distances, r, eta, alpha, sigma_sq, cfg) for r in range(len(node_distances))]

