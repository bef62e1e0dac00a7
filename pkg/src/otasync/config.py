"""OFDM numerology and scene description, plus the scene config-file loader.

Config files are JSON (``.json``) or YAML (``.yaml``/``.yml``) with keys::

    carrier_hz, bandwidth_hz, subcarriers, symbols, noise_var, eta, seed,
    nodes:   [{pos: [x, y], to_s: 0.0, cfo_hz: 0.0}, ...]
    targets: [{pos: [x, y], vel: [vx, vy], rcs: 1.0}, ...]

Optional keys: ``snr_db`` (per-sample target SNR, overrides path loss) and
``reciprocity`` (``strict`` or ``loose``).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


class ConfigError(ValueError):
    """Raised for malformed configuration values or files."""


@dataclass(frozen=True)
class OfdmConfig:
    """OFDM frame numerology.

    Attributes:
        f_c: carrier frequency in Hz.
        bandwidth: occupied bandwidth in Hz.
        P: number of subcarriers.
        Q: number of OFDM symbols.
    """

    f_c: float = 5e9
    bandwidth: float = 50e6
    P: int = 64
    Q: int = 32

    def __post_init__(self):
        if self.P < 2 or self.Q < 2:
            raise ConfigError(f"need P >= 2 and Q >= 2, got P={self.P}, Q={self.Q}")
        if self.bandwidth <= 0 or self.f_c <= 0:
            raise ConfigError("carrier frequency and bandwidth must be positive")

    @property
    def delta_f(self) -> float:
        """Subcarrier spacing in Hz."""
        return self.bandwidth / self.P

    @property
    def T(self) -> float:
        """OFDM symbol duration in seconds (CP excluded)."""
        return 1.0 / self.delta_f

    @classmethod
    def from_spacing(cls, delta_f: float, P: int, Q: int, f_c: float = 5e9) -> "OfdmConfig":
        return cls(f_c=f_c, bandwidth=delta_f * P, P=P, Q=Q)


@dataclass(frozen=True)
class NodeState:
    """An ISAC node: 2-D position and its clock offsets w.r.t. the reference."""

    position: tuple[float, float]
    delta_t: float = 0.0
    delta_f: float = 0.0


@dataclass(frozen=True)
class Target:
    """Point scatterer. ``beta`` pins the complex amplitude on every link."""

    position: tuple[float, float]
    velocity: tuple[float, float] = (0.0, 0.0)
    rcs: float = 1.0
    beta: complex | None = None

    def __post_init__(self):
        if not self.rcs > 0:
            raise ConfigError(f"target RCS must be positive, got {self.rcs}")


@dataclass(frozen=True)
class Scene:
    """Nodes, targets and link-budget parameters for one simulation.

    ``snr_db``, when set, fixes the per-sample target SNR |beta|^2 / noise_var
    on every link instead of the path-loss model.  ``reciprocity`` selects
    whether the random phase of beta is shared by the (n, m) and (m, n)
    directions (``"strict"``) or drawn independently (``"loose"``).
    """

    nodes: tuple[NodeState, ...]
    targets: tuple[Target, ...] = ()
    eta: float = 1.0
    noise_var: float = 1.0
    seed: int = 0
    snr_db: float | None = None
    reciprocity: str = "strict"

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "targets", tuple(self.targets))
        if len(self.nodes) < 1:
            raise ConfigError("scene needs at least one node")
        if self.noise_var < 0:
            raise ConfigError(f"noise_var must be >= 0, got {self.noise_var}")
        if self.reciprocity not in ("strict", "loose"):
            raise ConfigError(f"reciprocity must be 'strict' or 'loose', got {self.reciprocity!r}")
        if self.snr_db is not None and self.noise_var == 0:
            raise ConfigError("snr_db requires a positive noise_var")

    @property
    def node_positions(self) -> np.ndarray:
        return np.array([nd.position for nd in self.nodes], dtype=float)

    def with_offsets(self, delta_t: Sequence[float], delta_f: Sequence[float]) -> "Scene":
        """Copy of the scene with per-node offsets replaced."""
        nodes = tuple(
            NodeState(nd.position, float(dt), float(df))
            for nd, dt, df in zip(self.nodes, delta_t, delta_f)
        )
        return Scene(nodes, self.targets, self.eta, self.noise_var, self.seed,
                     self.snr_db, self.reciprocity)


def _pair(value: Any, key: str) -> tuple[float, float]:
    arr = np.asarray(value, dtype=float).ravel()
    if arr.shape != (2,):
        raise ConfigError(f"{key} must be a 2-element list, got {value!r}")
    return float(arr[0]), float(arr[1])


def parse_config(data: dict) -> tuple[Scene, OfdmConfig]:
    """Build (Scene, OfdmConfig) from a decoded config mapping."""
    try:
        cfg = OfdmConfig(
            f_c=float(data.get("carrier_hz", 5e9)),
            bandwidth=float(data.get("bandwidth_hz", 50e6)),
            P=int(data.get("subcarriers", 64)),
            Q=int(data.get("symbols", 32)),
        )
        nodes = [
            NodeState(_pair(nd["pos"], "nodes[].pos"),
                      float(nd.get("to_s", 0.0)), float(nd.get("cfo_hz", 0.0)))
            for nd in data.get("nodes", [])
        ]
        targets = []
        for tg in data.get("targets", []):
            beta = tg.get("beta")
            if beta is not None:
                beta = complex(*beta) if isinstance(beta, (list, tuple)) else complex(beta)
            targets.append(Target(
                _pair(tg["pos"], "targets[].pos"),
                _pair(tg.get("vel", (0.0, 0.0)), "targets[].vel"),
                float(tg.get("rcs", 1.0)),
                beta,
            ))
        snr = data.get("snr_db")
        scene = Scene(
            nodes=tuple(nodes),
            targets=tuple(targets),
            eta=float(data.get("eta", 1.0)),
            noise_var=float(data.get("noise_var", 1.0)),
            seed=int(data.get("seed", 0)),
            snr_db=None if snr is None else float(snr),
            reciprocity=str(data.get("reciprocity", "strict")),
        )
    except KeyError as exc:
        raise ConfigError(f"missing config key {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return scene, cfg


def load_config(path: str | Path) -> dict:
    """Read a JSON or YAML file into a mapping."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if path.suffix.lower() in (".yaml", ".yml"):
        import yaml

        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def load_scene(path: str | Path) -> tuple[Scene, OfdmConfig]:
    return parse_config(load_config(path))
