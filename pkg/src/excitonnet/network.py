"""Random molecular geometries and the dipole-coupled network Hamiltonian.

Sites live in a ball of radius ``R``. The injection site ("in", index 0) sits
on the north pole and the sink site ("out", index N-1) on the south pole; the
remaining sites are drawn uniformly from the ball interior. Couplings follow
the isotropic dipole law ``v_ij = alpha / r_ij**3`` and the Hamiltonian has no
site energies.

Units: with the defaults (``alpha = 1``, ``R = 1/2``) the in-out coupling is 1,
the direct transfer time is ``T = pi/2`` and the sink rate is ``Gamma = 20/pi``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DegenerateGeometry, SeparationUnsatisfiable

__all__ = [
    "ModelParams",
    "Configuration",
    "NetworkModel",
    "rng_stream",
    "sample_configuration",
    "build_model",
    "scale_configuration",
    "pairwise_distances",
    "coupling_matrix",
]


@dataclass(frozen=True)
class ModelParams:
    """Model parameters.

    Parameters
    ----------
    n_sites : int
        Number of sites including "in" and "out".
    alpha : float
        Dipole coupling constant.
    sphere_radius : float
        Radius of the ball; "in" and "out" sit on its poles.
    min_separation : float or None
        Smallest allowed distance between any two sites. ``None`` means
        5 % of the pole-to-pole distance.
    gamma : float
        Dephasing rate (absolute units, 1/time).
    sink_rate_multiplier : float
        The sink rate is ``multiplier / T``.
    """

    n_sites: int = 7
    alpha: float = 1.0
    sphere_radius: float = 0.5
    min_separation: float | None = None
    gamma: float = 0.0
    sink_rate_multiplier: float = 10.0

    def __post_init__(self):
        if self.min_separation is None:
            object.__setattr__(self, "min_separation", 0.05 * 2.0 * self.sphere_radius)
        if int(self.n_sites) != self.n_sites or self.n_sites < 2:
            raise ValueError(f"n_sites must be an integer >= 2, got {self.n_sites}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.sphere_radius > 0:
            raise ValueError(f"sphere_radius must be positive, got {self.sphere_radius}")
        if not 0 <= self.min_separation < 2 * self.sphere_radius:
            raise ValueError(
                f"min_separation must lie in [0, 2R), got {self.min_separation}"
            )
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        if not self.sink_rate_multiplier > 0:
            raise ValueError(
                f"sink_rate_multiplier must be positive, got {self.sink_rate_multiplier}"
            )

    @property
    def pole_distance(self) -> float:
        return 2.0 * self.sphere_radius

    @property
    def direct_time(self) -> float:
        """T for the pinned poles, ``pi / (2 alpha / d**3)``."""
        return np.pi / (2.0 * self.alpha / self.pole_distance**3)

    @property
    def sink_rate(self) -> float:
        return self.sink_rate_multiplier / self.direct_time

    def to_dict(self) -> dict:
        return {
            "n_sites": int(self.n_sites),
            "alpha": float(self.alpha),
            "sphere_radius": float(self.sphere_radius),
            "min_separation": float(self.min_separation),
            "gamma": float(self.gamma),
            "sink_rate_multiplier": float(self.sink_rate_multiplier),
        }


@dataclass(frozen=True)
class Configuration:
    """Site positions of one disorder realization, shape ``(N, 3)``."""

    positions: np.ndarray
    seed_index: int = 0

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 2:
            raise ValueError(f"positions must have shape (N>=2, 3), got {pos.shape}")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "seed_index", int(self.seed_index))

    @property
    def n_sites(self) -> int:
        return self.positions.shape[0]

    def to_dict(self) -> dict:
        return {"seed_index": self.seed_index, "positions": self.positions.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Configuration":
        return cls(positions=np.asarray(data["positions"], dtype=float),
                   seed_index=int(data.get("seed_index", 0)))

    def to_json(self) -> str:
        # repr of a float round-trips exactly
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Configuration":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "Configuration":
        return cls.from_json(Path(path).read_text())

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return self.seed_index == other.seed_index and np.array_equal(
            self.positions, other.positions
        )

    __hash__ = None


@dataclass(frozen=True)
class NetworkModel:
    """Couplings and derived time scales of one configuration."""

    couplings: np.ndarray
    direct_time: float
    sink_rate: float
    params: ModelParams
    config: Configuration | None = field(default=None, compare=False)

    @property
    def n_sites(self) -> int:
        return self.couplings.shape[0]

    @property
    def hamiltonian(self) -> np.ndarray:
        """Real symmetric Hamiltonian on the single-excitation block."""
        return self.couplings

    def with_gamma(self, gamma: float) -> "NetworkModel":
        return replace(self, params=replace(self.params, gamma=gamma))


def rng_stream(master_seed: int, seed_index: int) -> np.random.Generator:
    """Independent generator for sample ``seed_index`` of run ``master_seed``.

    The stream depends only on the two integers, so samples can be produced in
    any order by any worker.
    """
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(seed_index),))
    return np.random.Generator(np.random.PCG64(ss))


def _poles(params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    r = params.sphere_radius
    return np.array([0.0, 0.0, r]), np.array([0.0, 0.0, -r])


def uniform_ball(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    """``n`` points uniform in volume over the open ball."""
    direction = rng.standard_normal((n, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    # random() is in [0, 1), so every radius is strictly below ``radius``
    r = radius * np.cbrt(rng.random(n))
    return direction * r[:, None]


def pairwise_distances(positions: np.ndarray) -> np.ndarray:
    diff = positions[:, None, :] - positions[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def sample_configuration(
    params: ModelParams,
    stream: np.random.Generator,
    seed_index: int = 0,
    max_retries: int = 1000,
) -> Configuration:
    """Draw the intermediate sites uniformly inside the ball.

    The whole intermediate set is redrawn until every pairwise distance
    (poles included) is at least ``params.min_separation``.

    Raises
    ------
    SeparationUnsatisfiable
        If ``max_retries`` draws all violate the separation floor.
    """
    north, south = _poles(params)
    n_mid = params.n_sites - 2
    if n_mid == 0:
        return Configuration(np.stack([north, south]), seed_index)
    off_diag = ~np.eye(params.n_sites, dtype=bool)
    for _ in range(max_retries):
        mid = uniform_ball(stream, n_mid, params.sphere_radius)
        pos = np.vstack([north, mid, south])
        if pairwise_distances(pos)[off_diag].min() >= params.min_separation:
            return Configuration(pos, seed_index)
    raise SeparationUnsatisfiable(
        f"no configuration with min_separation={params.min_separation} found in "
        f"{max_retries} draws (n_sites={params.n_sites}, R={params.sphere_radius})"
    )


def coupling_matrix(positions: np.ndarray, alpha: float) -> np.ndarray:
    dist = pairwise_distances(np.asarray(positions, dtype=float))
    n = dist.shape[0]
    np.fill_diagonal(dist, 1.0)
    v = alpha / dist**3
    v[np.diag_indices(n)] = 0.0
    # average against its transpose so symmetry is exact, not just to rounding
    return 0.5 * (v + v.T)


def build_model(config: Configuration, params: ModelParams) -> NetworkModel:
    """Map a geometry to couplings, ``T = pi / (2 v_in,out)`` and ``Gamma = m / T``.

    Raises
    ------
    DegenerateGeometry
        If two sites are closer than ``params.min_separation``.
    """
    if config.n_sites != params.n_sites:
        raise ValueError(
            f"configuration has {config.n_sites} sites, params expect {params.n_sites}"
        )
    dist = pairwise_distances(config.positions)
    off = ~np.eye(config.n_sites, dtype=bool)
    dmin = dist[off].min()
    if dmin < params.min_separation or dmin == 0.0:
        raise DegenerateGeometry(
            f"closest pair at distance {dmin:.3e} < min_separation {params.min_separation:.3e}"
        )
    v = coupling_matrix(config.positions, params.alpha)
    direct_time = np.pi / (2.0 * abs(v[0, -1]))
    sink_rate = params.sink_rate_multiplier / direct_time
    v.setflags(write=False)
    return NetworkModel(v, direct_time, sink_rate, params, config)


def scale_configuration(config: Configuration, s: float) -> Configuration:
    """Multiply every position by ``s`` (couplings scale as ``s**-3``)."""
    if not s > 0:
        raise ValueError(f"scale factor must be positive, got {s}")
    return Configuration(config.positions * s, config.seed_index)


def scaled_params(params: ModelParams, s: float) -> ModelParams:
    """Parameters matching a configuration scaled by ``s``.

    The ball radius and separation floor follow the geometry; the dephasing
    rate is rescaled so that ``gamma / Gamma`` is unchanged.
    """
    return replace(
        params,
        sphere_radius=params.sphere_radius * s,
        min_separation=params.min_separation * s,
        gamma=params.gamma / s**3,
    )
