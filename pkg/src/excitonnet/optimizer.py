"""Configurations optimized for coherent transfer.

Nelder-Mead searches the intermediate coordinates for the smallest transfer
time at zero dephasing. Candidates are projected into the open ball; pairs
closer than the separation floor are scored with clamped couplings plus a
quadratic penalty so the search can cross such regions, but only candidates
that satisfy every constraint can become the reported optimum.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .dynamics import DEFAULT_MAX_TRANSFER, Status, transfer_times
from .errors import NoConvergedEvaluation
from .landscape import GammaGrid
from .network import (
    Configuration,
    ModelParams,
    NetworkModel,
    build_model,
    pairwise_distances,
    rng_stream,
    sample_configuration,
)

__all__ = ["OptimizationResult", "OptimizedCurve", "optimize_gamma0", "sweep_optimized", "Objective"]

# keeps projected points strictly inside the ball
_BALL_MARGIN = 1e-9
# large and distinct from any spawn key the landscape uses for samples
_RESTART_STREAM_OFFSET = 2**40


@dataclass
class OptimizationResult:
    best_config: Configuration
    best_T: float
    trace: list = field(default_factory=list)
    restarts_used: int = 0
    best_restart: int = 0
    restart_best: np.ndarray | None = None
    evaluations: int = 0


@dataclass(frozen=True)
class OptimizedCurve:
    gamma_over_sink: np.ndarray
    transfer: np.ndarray
    status: np.ndarray


class Objective:
    """Zero-dephasing transfer time (units of ``T``) of the free coordinates.

    Keeps the best feasible candidate and the running best after every call.
    """

    def __init__(self, params: ModelParams, penalty_weight: float = 10.0,
                 max_transfer: float = DEFAULT_MAX_TRANSFER):
        self.params = params
        self.penalty_weight = penalty_weight
        self.max_transfer = max_transfer
        r = params.sphere_radius
        self._north = np.array([0.0, 0.0, r])
        self._south = np.array([0.0, 0.0, -r])
        self._cap = r * (1.0 - _BALL_MARGIN)
        self._off = ~np.eye(params.n_sites, dtype=bool)
        self.best_value = np.inf
        self.best_positions = None
        self.history = []
        self.n_converged = 0

    def positions(self, x: np.ndarray) -> np.ndarray:
        mid = np.asarray(x, dtype=float).reshape(-1, 3).copy()
        radius = np.linalg.norm(mid, axis=1)
        over = radius > self._cap
        mid[over] *= (self._cap / radius[over])[:, None]
        return np.vstack([self._north, mid, self._south])

    def evaluate(self, positions: np.ndarray):
        """Return ``(score, transfer, feasible)`` for full site positions."""
        p = self.params
        dist = pairwise_distances(positions)
        deficit = np.clip(p.min_separation - dist[self._off], 0.0, None)
        feasible = not np.any(deficit > 0)
        dist = np.maximum(dist, p.min_separation)
        np.fill_diagonal(dist, 1.0)
        v = p.alpha / dist**3
        np.fill_diagonal(v, 0.0)
        v = 0.5 * (v + v.T)
        direct = np.pi / (2.0 * v[0, -1])
        model = NetworkModel(v, direct, p.sink_rate_multiplier / direct, p)
        t_over, _, _, status = transfer_times(model, [0.0], self.max_transfer)
        ok = status[0] is Status.CONVERGED
        transfer = float(t_over[0]) if ok else self.max_transfer
        if ok:
            self.n_converged += 1
        penalty = self.penalty_weight * float(np.sum((deficit / p.min_separation) ** 2))
        return transfer + penalty, transfer, feasible and ok

    def __call__(self, x: np.ndarray) -> float:
        pos = self.positions(x)
        score, transfer, feasible = self.evaluate(pos)
        if feasible and transfer < self.best_value:
            self.best_value = transfer
            self.best_positions = pos
        self.history.append(self.best_value)
        return score


def _simplex(x0: np.ndarray, step: float, rng: np.random.Generator) -> np.ndarray:
    n = x0.size
    # random orthonormal directions avoid axis-aligned degeneracy of the start
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return np.vstack([x0, x0 + step * q.T])


def _restart(args):
    params, master_seed, restart, budget, penalty_weight = args
    from threadpoolctl import threadpool_limits

    rng = rng_stream(master_seed, _RESTART_STREAM_OFFSET + restart)
    start = sample_configuration(params, rng, seed_index=restart)
    obj = Objective(params, penalty_weight)
    x = start.positions[1:-1].ravel()
    step = 0.2 * params.sphere_radius
    with threadpool_limits(1):
        obj(x)
        # repeated local searches from the incumbent with a shrinking simplex
        while len(obj.history) < budget and x.size:
            left = budget - len(obj.history)
            res = minimize(obj, x, method="Nelder-Mead",
                           options={"maxfev": left, "initial_simplex": _simplex(x, step, rng),
                                    "xatol": 1e-10, "fatol": 1e-12, "adaptive": True})
            if obj.best_positions is not None:
                x = obj.best_positions[1:-1].ravel()
            else:
                x = res.x
            step = max(0.3 * step, 1e-6 * params.sphere_radius)
            if res.nfev == 0:
                break
    return restart, obj.best_value, obj.best_positions, np.array(obj.history), obj.n_converged


def optimize_gamma0(
    params: ModelParams,
    master_seed: int = 0,
    restarts: int = 32,
    budget: int = 20_000,
    workers: int = 1,
    penalty_weight: float = 10.0,
) -> OptimizationResult:
    """Multi-start minimization of the zero-dephasing transfer time.

    Restart ``k`` starts from a random configuration drawn from its own
    stream, so the result is reproducible for any worker count. Ties between
    restarts go to the lowest index.

    Raises
    ------
    NoConvergedEvaluation
        If no evaluation converged in any restart.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    if budget < 100:
        raise ValueError("budget must be >= 100 evaluations")
    jobs = [(params, int(master_seed), k, int(budget), penalty_weight) for k in range(restarts)]
    if params.n_sites == 2:
        jobs = jobs[:1]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_restart, jobs))
    else:
        results = [_restart(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    best = None
    for restart, value, positions, _, _ in results:
        if positions is not None and (best is None or value < best[1]):
            best = (restart, value, positions)
    if best is None:
        raise NoConvergedEvaluation(
            f"no feasible converged evaluation in {len(results)} restarts")
    restart, value, positions = best
    config = Configuration(positions, seed_index=restart)
    # the reported optimum must pass the ordinary model checks
    build_model(config, params)
    return OptimizationResult(
        best_config=config,
        best_T=float(value),
        trace=[r[3] for r in results],
        restarts_used=len(results),
        best_restart=restart,
        restart_best=np.array([r[1] for r in results]),
        evaluations=int(sum(len(r[3]) for r in results)),
    )


def sweep_optimized(result: OptimizationResult | Configuration, grid: GammaGrid,
                    params: ModelParams | None = None,
                    max_transfer: float = DEFAULT_MAX_TRANSFER) -> OptimizedCurve:
    """Transfer time of the optimized configuration at every grid rate.

    Points whose solve did not converge are NaN, with the status kept.
    """
    config = result.best_config if isinstance(result, OptimizationResult) else result
    if params is None:
        params = ModelParams(n_sites=config.n_sites)
    model = build_model(config, params)
    ratios = np.asarray(grid.values if isinstance(grid, GammaGrid) else grid, dtype=float)
    t_over, _, _, status = transfer_times(model, ratios * model.sink_rate, max_transfer)
    ok = status == Status.CONVERGED
    return OptimizedCurve(ratios, np.where(ok, t_over, np.nan), status)
