"""N-node centred pairwise synchronisation (CPS).

The node nearest the target is the reference; every other node is
synchronised to it by one reciprocal-pair estimation.  Offsets in a
:class:`SyncResult` are relative to that reference.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .config import OfdmConfig, Scene
from .estimators import EstimationError, PencilConfig, estimate_offsets
from .signal_model import SensingChannel, measure_channel, offset_diagonals
from .theory import select_reference

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Deployment:
    positions: np.ndarray
    mu: float
    area: float
    seed: int | None = None


def deploy_ppp(mu: float, area: float, rng: np.random.Generator, center=(0.0, 0.0),
               seed: int | None = None, min_nodes: int = 2) -> Deployment:
    """Homogeneous PPP on a square of the given area centred on ``center``.

    Draws with fewer than ``min_nodes`` nodes are redrawn with a warning; a
    synchronisation run needs two.  ``min_nodes=0`` gives the unconditioned
    process.
    """
    if not (mu > 0 and area > 0):
        raise ValueError("mu and area must be positive")
    side = np.sqrt(area)
    while True:
        count = rng.poisson(mu * area)
        if count >= min_nodes:
            break
        warnings.warn(f"PPP draw produced {count} node(s); redrawing", RuntimeWarning, stacklevel=2)
    pos = rng.uniform(-side / 2, side / 2, size=(count, 2)) + np.asarray(center, dtype=float)
    return Deployment(pos, mu, area, seed)


def deploy_nearest(mu: float, n_nodes: int, rng: np.random.Generator, center=(0.0, 0.0),
                   seed: int | None = None) -> Deployment:
    """The ``n_nodes`` PPP points nearest to ``center``, sorted by distance.

    Sampled on a disc large enough to hold them with overwhelming probability;
    the rare short draw is redrawn.  The i-th returned node has E[R_i^2] =
    i / (mu pi) exactly as for the unbounded process.
    """
    if n_nodes < 1 or not mu > 0:
        raise ValueError("need n_nodes >= 1 and mu > 0")
    expected = n_nodes + 8 * np.sqrt(n_nodes) + 20
    radius = np.sqrt(expected / (mu * np.pi))
    while True:
        count = rng.poisson(mu * np.pi * radius**2)
        if count >= n_nodes:
            break
    r = radius * np.sqrt(rng.uniform(size=count))
    phi = rng.uniform(0, 2 * np.pi, size=count)
    order = np.argsort(r, kind="stable")[:n_nodes]
    pos = np.column_stack([r[order] * np.cos(phi[order]), r[order] * np.sin(phi[order])])
    return Deployment(pos + np.asarray(center, dtype=float), mu, n_nodes / mu, seed)


@dataclass
class PairResult:
    node: int
    delta_t: float
    delta_f: float
    valid: bool
    error: str | None = None
    diagnostics: dict = field(default_factory=dict)


@dataclass
class SyncResult:
    """Per-node offset estimates relative to ``reference``.

    ``residual_t``/``residual_f`` are estimate minus truth (NaN for invalid
    pairs); the reference node's entries are exactly zero.
    """

    reference: int
    delta_t: np.ndarray
    delta_f: np.ndarray
    residual_t: np.ndarray
    residual_f: np.ndarray
    pairs: list[PairResult]

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.residual_t) & np.isfinite(self.residual_f)

    @property
    def total_sq_error_t(self) -> float:
        return float(np.nansum(self.residual_t**2))

    @property
    def total_sq_error_f(self) -> float:
        return float(np.nansum(self.residual_f**2))


def target_distances(scene: Scene, k: int = 0) -> np.ndarray:
    tgt = np.asarray(scene.targets[k].position, dtype=float)
    return np.linalg.norm(scene.node_positions - tgt, axis=1)


def synchronize_network(scene: Scene, cfg: OfdmConfig, method: str = "mle",
                        rng: np.random.Generator | None = None, reference: int | None = None,
                        pencil: PencilConfig | None = None, zero_pad: int = 8,
                        return_channels: bool = False):
    """Run CPS over the whole scene.

    Each non-reference node ``n`` yields one estimate of delta_n - delta_ref
    from the pair H_{ref,n} / H_{n,ref}.  Estimator failures mark the pair
    invalid instead of aborting.  With ``return_channels`` the measured
    channels are returned alongside, keyed by (receiver, transmitter).
    """
    if len(scene.nodes) < 2:
        raise ValueError("synchronisation needs at least two nodes")
    if not scene.targets:
        raise ValueError("synchronisation needs at least one target")
    rng = np.random.default_rng(scene.seed) if rng is None else rng
    ref = select_reference(target_distances(scene)) if reference is None else int(reference)
    N = len(scene.nodes)
    true_t = np.array([nd.delta_t for nd in scene.nodes]) - scene.nodes[ref].delta_t
    true_f = np.array([nd.delta_f for nd in scene.nodes]) - scene.nodes[ref].delta_f
    est_t = np.zeros(N)
    est_f = np.zeros(N)
    pairs = []
    channels = {}
    for n in range(N):
        if n == ref:
            continue
        fwd = measure_channel(scene, cfg, ref, n, rng)
        rev = measure_channel(scene, cfg, n, ref, rng)
        channels[(ref, n)] = fwd
        channels[(n, ref)] = rev
        try:
            est = estimate_offsets(fwd, rev, cfg, method, pencil=pencil, zero_pad=zero_pad)
        except (EstimationError, ValueError) as exc:
            log.warning("pair (%d, %d) failed: %s", ref, n, exc)
            est_t[n] = est_f[n] = np.nan
            pairs.append(PairResult(n, np.nan, np.nan, False, str(exc)))
            continue
        est_t[n], est_f[n] = est.delta_t, est.delta_f
        pairs.append(PairResult(n, est.delta_t, est.delta_f, True, None, est.diagnostics))
    result = SyncResult(ref, est_t, est_f, est_t - true_t, est_f - true_f, pairs)
    return (result, channels) if return_channels else result


def apply_compensation(channels: dict[tuple[int, int], SensingChannel],
                       sync: SyncResult, cfg: OfdmConfig) -> dict[tuple[int, int], SensingChannel]:
    """Remove estimated offsets from channels keyed by (receiver, transmitter).

    H_{n,m} carries delta_m - delta_n; it is multiplied by the conjugate
    offset diagonals built from the estimates, leaving only the residual
    estimation error.
    """
    out = {}
    for (n, m), ch in channels.items():
        ddt = sync.delta_t[m] - sync.delta_t[n]
        ddf = sync.delta_f[m] - sync.delta_f[n]
        lt, lf = offset_diagonals(ddt, ddf, cfg)
        out[(n, m)] = SensingChannel(ch.data * np.conj(lt)[:, None] * np.conj(lf)[None, :], ch.pair)
    return out
