"""Monte Carlo landscape of transfer times over disorder and dephasing.

Every sample draws one configuration, assembles its Hamiltonian once and
evaluates the transfer time at every dephasing rate of a logarithmic grid.
Results are binned in ``log10(transfer / T)``; the exact per-rate minimum is
tracked alongside the histogram. Partial landscapes only hold integer counts
and minima, so merging them is order independent and a run gives the same
bits for any number of workers.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import DEFAULT_MAX_TRANSFER, Status, transfer_times
from .errors import BadSpec, EmptyColumn
from .network import ModelParams, build_model, rng_stream, sample_configuration

__all__ = [
    "GammaGrid",
    "make_gamma_grid",
    "Landscape",
    "CurveSummary",
    "run_landscape",
    "density",
    "summarize",
    "reference_lines",
    "default_edges",
    "write_landscape_csv",
    "write_curves_csv",
]


@dataclass(frozen=True)
class GammaGrid:
    """Dephasing rates in units of the sink rate, geometrically spaced."""

    values: np.ndarray
    gamma_min: float
    gamma_max: float
    steps: int

    def spec(self) -> dict:
        return {"gamma_min": self.gamma_min, "gamma_max": self.gamma_max, "gamma_steps": self.steps}

    def __len__(self):
        return self.steps


def make_gamma_grid(gamma_min: float = 1e-5, gamma_max: float = 1e3, steps: int = 200) -> GammaGrid:
    """Geometric grid including both endpoints.

    >>> make_gamma_grid(1, 100, 3).values
    array([  1.,  10., 100.])
    """
    if not (0 < gamma_min < gamma_max) or int(steps) != steps or steps < 2:
        raise BadSpec(f"need 0 < gamma_min < gamma_max and steps >= 2, got "
                      f"({gamma_min}, {gamma_max}, {steps})")
    values = np.geomspace(gamma_min, gamma_max, int(steps))
    values[0], values[-1] = gamma_min, gamma_max
    values.setflags(write=False)
    return GammaGrid(values, float(gamma_min), float(gamma_max), int(steps))


def default_edges(lo: float = -2.0, hi: float = 6.0, n_bins: int = 160) -> np.ndarray:
    """Bin edges in ``log10(transfer / T)``."""
    return np.linspace(lo, hi, n_bins + 1)


@dataclass
class Landscape:
    """Per-rate histograms and exact minima.

    Attributes
    ----------
    counts : ndarray, shape (n_gamma, n_bins)
        Converged samples per ``log10(transfer/T)`` bin. Values outside the
        range are clamped into the edge bins and also counted in ``clamped``.
    divergent, ill_conditioned : ndarray, shape (n_gamma,)
        Overflow samples, never binned.
    minimum : ndarray
        Exact smallest converged transfer time per rate (``inf`` if none).
    minimum_seed : ndarray
        Seed index realizing the minimum (smallest index on ties).
    coherent : ndarray
        Converged samples faster than the dephasing time ``1/(4 gamma)``.
    """

    grid: GammaGrid
    edges: np.ndarray
    counts: np.ndarray
    divergent: np.ndarray
    ill_conditioned: np.ndarray
    minimum: np.ndarray
    minimum_seed: np.ndarray
    coherent: np.ndarray
    clamped: np.ndarray
    n_samples: int = 0
    meta: dict = field(default_factory=dict)

    @classmethod
    def empty(cls, grid: GammaGrid, edges: np.ndarray | None = None) -> "Landscape":
        edges = default_edges() if edges is None else np.asarray(edges, dtype=float)
        if np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must be strictly increasing")
        g = len(grid)
        zeros = lambda: np.zeros(g, dtype=np.int64)  # noqa: E731
        return cls(grid, edges, np.zeros((g, edges.size - 1), dtype=np.int64), zeros(), zeros(),
                   np.full(g, np.inf), np.full(g, -1, dtype=np.int64), zeros(), zeros(), 0)

    @property
    def overflow(self) -> np.ndarray:
        return self.divergent + self.ill_conditioned

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def bin_widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def record(self, seed_index: int, t_over: np.ndarray, status: np.ndarray) -> None:
        """Add one sample's values across the whole grid."""
        ok = status == Status.CONVERGED
        self.divergent += status == Status.DIVERGENT
        self.ill_conditioned += status == Status.ILL_CONDITIONED
        cols = np.flatnonzero(ok)
        vals = t_over[cols]
        logv = np.log10(vals)
        n_bins = self.counts.shape[1]
        idx = np.searchsorted(self.edges, logv, side="right") - 1
        out_of_range = (idx < 0) | (idx >= n_bins)
        idx = np.clip(idx, 0, n_bins - 1)
        self.counts[cols, idx] += 1
        self.clamped[cols] += out_of_range
        t_deph = 1.0 / (4.0 * self.grid.values[cols] * self.meta.get("sink_rate_multiplier", 10.0))
        self.coherent[cols] += vals < t_deph
        better = vals < self.minimum[cols]
        self.minimum[cols[better]] = vals[better]
        self.minimum_seed[cols[better]] = seed_index
        self.n_samples += 1

    def merge(self, other: "Landscape") -> "Landscape":
        """Combine two partial landscapes (commutative and associative)."""
        if not (np.array_equal(self.grid.values, other.grid.values)
                and np.array_equal(self.edges, other.edges)):
            raise ValueError("landscapes use different grids or bins")
        # tie on the minimum value resolves to the smaller seed index
        take_other = (other.minimum < self.minimum) | (
            (other.minimum == self.minimum) & (other.minimum_seed >= 0)
            & ((self.minimum_seed < 0) | (other.minimum_seed < self.minimum_seed)))
        return Landscape(
            self.grid, self.edges,
            self.counts + other.counts,
            self.divergent + other.divergent,
            self.ill_conditioned + other.ill_conditioned,
            np.where(take_other, other.minimum, self.minimum),
            np.where(take_other, other.minimum_seed, self.minimum_seed),
            self.coherent + other.coherent,
            self.clamped + other.clamped,
            self.n_samples + other.n_samples,
            dict(self.meta),
        )

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.spec(),
            "edges": [float(e) for e in self.edges],
            "n_samples": int(self.n_samples),
            "counts": self.counts.tolist(),
            "divergent": self.divergent.tolist(),
            "ill_conditioned": self.ill_conditioned.tolist(),
            "minimum": [float(m) if np.isfinite(m) else None for m in self.minimum],
            "minimum_seed": self.minimum_seed.tolist(),
            "coherent": self.coherent.tolist(),
            "clamped": self.clamped.tolist(),
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "Landscape":
        grid = make_gamma_grid(**{k.replace("gamma_steps", "steps"): v for k, v in data["grid"].items()})
        arr = lambda k: np.asarray(data[k], dtype=np.int64)  # noqa: E731
        minimum = np.array([np.inf if m is None else m for m in data["minimum"]], dtype=float)
        return cls(grid, np.asarray(data["edges"], dtype=float), arr("counts"), arr("divergent"),
                   arr("ill_conditioned"), minimum, arr("minimum_seed"), arr("coherent"),
                   arr("clamped"), int(data["n_samples"]), dict(data.get("meta", {})))


@dataclass(frozen=True)
class CurveSummary:
    """Per-rate median, exact minimum and overflow fraction (times in ``T``)."""

    gamma_over_sink: np.ndarray
    median: np.ndarray
    minimum: np.ndarray
    overflow_fraction: np.ndarray


def _chunk(args):
    params, grid_values, edges, grid, master_seed, start, stop, max_transfer = args
    from threadpoolctl import threadpool_limits

    part = Landscape.empty(grid, edges)
    part.meta["sink_rate_multiplier"] = params.sink_rate_multiplier
    with threadpool_limits(1):
        for idx in range(start, stop):
            config = sample_configuration(params, rng_stream(master_seed, idx), idx)
            model = build_model(config, params)
            t_over, _, _, status = transfer_times(model, grid_values * model.sink_rate, max_transfer)
            part.record(idx, t_over, status)
    return part


def run_landscape(
    params: ModelParams,
    grid: GammaGrid,
    n_samples: int,
    master_seed: int = 0,
    workers: int = 1,
    edges: np.ndarray | None = None,
    chunk_size: int = 256,
    max_transfer: float = DEFAULT_MAX_TRANSFER,
    progress=None,
) -> Landscape:
    """Sample ``n_samples`` configurations and evaluate each on the whole grid.

    Sample ``i`` always uses the random stream ``(master_seed, i)``, so the
    result does not depend on ``workers`` or ``chunk_size``. ``progress``, if
    given, is called with the number of finished samples after each chunk.
    """
    if int(n_samples) != n_samples or n_samples < 1:
        raise ValueError(f"n_samples must be a positive integer, got {n_samples}")
    edges = default_edges() if edges is None else np.asarray(edges, dtype=float)
    total = Landscape.empty(grid, edges)
    total.meta["sink_rate_multiplier"] = params.sink_rate_multiplier
    bounds = list(range(0, int(n_samples), chunk_size)) + [int(n_samples)]
    jobs = [(params, np.asarray(grid.values), edges, grid, int(master_seed), a, b, max_transfer)
            for a, b in zip(bounds[:-1], bounds[1:])]
    done = 0
    if workers <= 1:
        parts = map(_chunk, jobs)
        for part in parts:
            total = total.merge(part)
            done += part.n_samples
            if progress:
                progress(done)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_chunk, jobs):
                total = total.merge(part)
                done += part.n_samples
                if progress:
                    progress(done)
    return total


def _column_density(landscape: Landscape, g: int) -> np.ndarray:
    counts = landscape.counts[g]
    if counts.sum() == 0:
        raise EmptyColumn(f"no converged samples at gamma/Gamma={landscape.grid.values[g]:.6g}")
    return counts / (landscape.n_samples * landscape.bin_widths)


def density(landscape: Landscape, strict: bool = True) -> np.ndarray:
    """Per-rate probability density over ``log10(transfer / T)``.

    Each column integrates to one minus its overflow fraction. With
    ``strict=False`` empty columns come back as NaN instead of raising.
    """
    out = np.empty(landscape.counts.shape)
    for g in range(out.shape[0]):
        try:
            out[g] = _column_density(landscape, g)
        except EmptyColumn:
            if strict:
                raise
            out[g] = np.nan
    return out


def histogram_median(counts: np.ndarray, edges: np.ndarray, above: int = 0) -> float:
    """Median of binned data in ``log10`` space, linear inside the median bin.

    ``above`` samples are known to lie beyond the last edge. Returns ``inf``
    when the median falls among them.
    """
    total = counts.sum() + above
    if total == 0:
        return np.nan
    half = 0.5 * total
    cum = np.cumsum(counts)
    k = int(np.searchsorted(cum, half, side="left"))
    if k >= counts.size:
        return np.inf
    before = cum[k - 1] if k > 0 else 0
    frac = (half - before) / counts[k]
    return float(edges[k] + frac * (edges[k + 1] - edges[k]))


def summarize(landscape: Landscape, strict: bool = True) -> CurveSummary:
    """Median (from the histogram) and exact minimum per dephasing rate.

    Divergent samples count as larger than every binned value when locating
    the median; ill-conditioned ones are left out.
    """
    g = len(landscape.grid)
    median = np.full(g, np.nan)
    for i in range(g):
        converged = landscape.counts[i].sum()
        if converged == 0:
            if strict:
                raise EmptyColumn(f"no converged samples at gamma/Gamma={landscape.grid.values[i]:.6g}")
            continue
        median[i] = 10.0 ** histogram_median(landscape.counts[i], landscape.edges, landscape.divergent[i])
    minimum = np.where(np.isfinite(landscape.minimum), landscape.minimum, np.nan)
    frac = landscape.overflow / max(landscape.n_samples, 1)
    return CurveSummary(np.asarray(landscape.grid.values), median, minimum, frac)


def reference_lines(grid: GammaGrid | np.ndarray, sink_rate_multiplier: float = 10.0):
    """Dephasing time ``1/(4 gamma)`` and the classical marker, both in ``T``.

    Rates are in units of the sink rate ``Gamma = multiplier / T``. A zero
    rate has no dephasing time and yields NaN.
    """
    ratio = np.asarray(grid.values if isinstance(grid, GammaGrid) else grid, dtype=float)
    with np.errstate(divide="ignore"):
        t_deph = np.where(ratio > 0, 1.0 / (4.0 * ratio * sink_rate_multiplier), np.nan)
    return t_deph, np.ones_like(ratio)


def _fmt(x) -> str:
    return f"{x:.17g}"


def write_landscape_csv(landscape: Landscape, path) -> None:
    dens = density(landscape, strict=False)
    centers = landscape.bin_centers
    lines = ["gamma_over_Gamma,log10_T_bin_center,density"]
    for g, ratio in enumerate(landscape.grid.values):
        for c, d in zip(centers, dens[g]):
            lines.append(f"{_fmt(ratio)},{_fmt(c)},{_fmt(d)}")
    _write(path, lines)


def write_curves_csv(landscape: Landscape, path) -> None:
    summary = summarize(landscape, strict=False)
    t_deph, _ = reference_lines(landscape.grid, landscape.meta.get("sink_rate_multiplier", 10.0))
    lines = ["gamma_over_Gamma,median_T_over_T,min_T_over_T,overflow_fraction,T_deph_over_T"]
    for row in zip(summary.gamma_over_sink, summary.median, summary.minimum,
                   summary.overflow_fraction, t_deph):
        lines.append(",".join(_fmt(x) for x in row))
    _write(path, lines)


def _write(path, lines) -> None:
    with open(os.fspath(path), "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
