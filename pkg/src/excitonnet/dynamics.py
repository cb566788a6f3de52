"""Master-equation dynamics on the single-excitation block.

The excited block ``rho`` (N x N) evolves under

    d rho / dt = -i [H, rho] - (Gamma/2) {|out><out|, rho} - 4 gamma offdiag(rho)

and the ground population grows as ``d p0 / dt = Gamma rho_out,out``. Starting
from ``|in><in|`` no ground/excited coherence is ever generated, so the block
plus ``p0`` is closed.

The mean absorption time is ``Gamma * int t rho_out,out dt``. For a stable
generator ``int exp(L t) dt = -L^-1`` and ``int t exp(L t) dt = L^-2``, so it
follows from two linear solves. The time-domain integrators in this module
exist to check that identity independently.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import BudgetExhausted, EmptyState
from .network import NetworkModel
from .superop import complex_generator, full_moments, real_split, unvec, vec

__all__ = [
    "Status",
    "ExcitedState",
    "Liouvillian",
    "TransferResult",
    "Trajectory",
    "build_liouvillian",
    "transfer_time",
    "transfer_times",
    "classify",
    "evolve_oracle",
    "purity",
    "eigenstate_report",
    "EigenstateReport",
    "two_site_transfer_time",
    "DEFAULT_MAX_TRANSFER",
    "RESIDUAL_TOL",
    "ABSORPTION_TOL",
]

DEFAULT_MAX_TRANSFER = 1e6  # in units of T
RESIDUAL_TOL = 1e-8
ABSORPTION_TOL = 1e-6


class Status(enum.Enum):
    CONVERGED = "Converged"
    DIVERGENT = "Divergent"
    ILL_CONDITIONED = "IllConditioned"


@dataclass(frozen=True)
class ExcitedState:
    """Excited block of the density matrix plus the ground population."""

    rho: np.ndarray
    ground_population: float = 0.0

    @property
    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    def check(self, herm_tol=1e-12, eig_tol=1e-9, trace_tol=1e-9) -> None:
        """Raise ``AssertionError`` if the state is unphysical."""
        rho = self.rho
        assert np.abs(rho - rho.conj().T).max() <= herm_tol, "rho not Hermitian"
        assert np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() >= -eig_tol, "negative eigenvalue"
        assert abs(self.trace + self.ground_population - 1.0) <= trace_tol, "trace not conserved"
        assert self.ground_population >= -eig_tol, "negative ground population"

    @classmethod
    def localized(cls, n: int, site: int = 0) -> "ExcitedState":
        rho = np.zeros((n, n), dtype=complex)
        rho[site, site] = 1.0
        return cls(rho, 0.0)


@dataclass(frozen=True, eq=False)
class Liouvillian:
    """Vectorized generator (column-major ``vec``) of the excited block."""

    generator: np.ndarray
    gamma: float
    sink_rate: float
    model: NetworkModel

    @property
    def n_sites(self) -> int:
        return self.model.n_sites

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """``d rho / dt`` for an ``N x N`` matrix."""
        return unvec(self.generator @ vec(rho), self.n_sites)

    def real_generator(self) -> np.ndarray:
        """The same generator in real Hermitian coordinates."""
        split = real_split(self.model.hamiltonian, self.sink_rate)
        return split.generators([self.gamma])[0]


def build_liouvillian(model: NetworkModel, gamma: float) -> Liouvillian:
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")
    gen = complex_generator(model.hamiltonian, model.sink_rate, gamma)
    gen.setflags(write=False)
    return Liouvillian(gen, float(gamma), model.sink_rate, model)


@dataclass(frozen=True)
class TransferResult:
    """Outcome of one transfer-time evaluation.

    ``transfer_time`` is in units of the direct transfer time ``T``.
    """

    transfer_time: float
    absorption_total: float
    status: Status
    residual: float
    gamma_over_sink: float = float("nan")
    seed_index: int = -1

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    def csv_row(self) -> str:
        return ",".join([
            str(self.seed_index),
            f"{self.gamma_over_sink:.17g}",
            f"{self.transfer_time:.17g}",
            self.status.value,
            f"{self.absorption_total:.17g}",
        ])

    CSV_HEADER = "seed_index,gamma_over_Gamma,T_over_T,status,absorption_total"


def classify(transfer_over_t, absorption, residual, max_transfer=DEFAULT_MAX_TRANSFER):
    """Vectorized status assignment shared by every solver path."""
    transfer_over_t = np.asarray(transfer_over_t, dtype=float)
    absorption = np.asarray(absorption, dtype=float)
    residual = np.asarray(residual, dtype=float)
    status = np.empty(transfer_over_t.shape, dtype=object)
    status[...] = Status.CONVERGED
    with np.errstate(invalid="ignore"):
        bad = ~np.isfinite(transfer_over_t) | ~np.isfinite(absorption) | ~(residual <= RESIDUAL_TOL)
        bad |= ~(np.abs(absorption - 1.0) <= ABSORPTION_TOL) | ~(transfer_over_t > 0)
        divergent = ~bad & (transfer_over_t > max_transfer)
    status[bad] = Status.ILL_CONDITIONED
    status[divergent] = Status.DIVERGENT
    return status


def _result(model, gamma, absorption, moment, residual, max_transfer, seed_index=None):
    t_over = moment / model.direct_time
    status = classify(t_over, absorption, residual, max_transfer)[()]
    if seed_index is None:
        seed_index = model.config.seed_index if model.config is not None else -1
    return TransferResult(float(t_over), float(absorption), status, float(residual),
                          gamma / model.sink_rate, int(seed_index))


def transfer_time(liouvillian: Liouvillian, method: str = "solve",
                  max_transfer: float = DEFAULT_MAX_TRANSFER) -> TransferResult:
    """Mean absorption time from ``rho(0) = |in><in|``.

    Parameters
    ----------
    method : {"solve", "eig", "real"}
        ``"solve"`` does two complex linear solves, ``"eig"`` goes through an
        eigendecomposition of the generator, ``"real"`` uses the real
        coordinates of the sweep engine.
    max_transfer : float
        Values above this many ``T`` are reported as divergent.
    """
    L = liouvillian.generator
    model = liouvillian.model
    n = model.n_sites
    gamma_sink = liouvillian.sink_rate
    out = (n - 1) * (n + 1)  # vec index of (out, out)
    rho0 = np.zeros(n * n, dtype=complex)
    rho0[0] = 1.0
    if method == "real":
        tau, sigma, r1, r2 = full_moments(liouvillian.real_generator()[None])
        return _result(model, liouvillian.gamma, gamma_sink * tau[0, n - 1],
                       gamma_sink * sigma[0, n - 1], max(r1[0], r2[0]), max_transfer)
    with np.errstate(all="ignore"):
        if method == "solve":
            try:
                tau = np.linalg.solve(L, -rho0)
                sigma = np.linalg.solve(L, -tau)
            except np.linalg.LinAlgError:
                return _result(model, liouvillian.gamma, np.nan, np.nan, np.inf, max_transfer)
        elif method == "eig":
            lam, vecs = np.linalg.eig(L)
            coef = np.linalg.solve(vecs, rho0)
            tau = -vecs @ (coef / lam)
            sigma = vecs @ (coef / lam**2)
        else:
            raise ValueError(f"unknown method {method!r}")
        r1 = np.linalg.norm(L @ tau + rho0)
        r2 = np.linalg.norm(L @ sigma + tau) / np.linalg.norm(tau)
    return _result(model, liouvillian.gamma, gamma_sink * tau[out].real,
                   gamma_sink * sigma[out].real, max(r1, r2), max_transfer)


def transfer_times(model: NetworkModel, gammas, max_transfer: float = DEFAULT_MAX_TRANSFER):
    """Transfer times of one model over many absolute dephasing rates.

    The commutator part is assembled once; only the diagonal changes with
    the rate. Returns ``(transfer_over_T, absorption, residual, status)``
    arrays.
    """
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    split = real_split(model.hamiltonian, model.sink_rate)
    tau, sigma, r1, r2 = full_moments(split.generators(gammas))
    out = model.n_sites - 1
    absorption = model.sink_rate * tau[:, out]
    t_over = model.sink_rate * sigma[:, out] / model.direct_time
    residual = np.maximum(r1, r2)
    return t_over, absorption, residual, classify(t_over, absorption, residual, max_transfer)


def two_site_transfer_time(v: float, sink_rate: float, gamma: float = 0.0) -> float:
    """Closed form for the bare dimer: ``2/Gamma + Gamma/(4 v^2) + 2 gamma / v^2``."""
    return 2.0 / sink_rate + sink_rate / (4.0 * v**2) + 2.0 * gamma / v**2


# ---------------------------------------------------------------- oracles


@dataclass
class Trajectory:
    """Time-domain solution with accumulated absorption moments.

    ``moment0 = int rho_out,out dt`` and ``moment1 = int t rho_out,out dt``
    over ``[0, times[-1]]``.
    """

    times: np.ndarray
    states: np.ndarray
    ground: np.ndarray
    moment0: float
    moment1: float
    sink_rate: float
    direct_time: float
    budget_exhausted: bool = False
    n_steps: int = 0
    method: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def absorption_total(self) -> float:
        return self.sink_rate * self.moment0

    @property
    def transfer_time(self) -> float:
        """``Gamma * moment1`` in units of ``T``."""
        return self.sink_rate * self.moment1 / self.direct_time

    def state(self, k: int) -> ExcitedState:
        return ExcitedState(self.states[k], float(self.ground[k]))

    @property
    def traces(self) -> np.ndarray:
        return np.einsum("kii->k", self.states).real

    def purities(self) -> np.ndarray:
        """Purity at every stored time; NaN once the excited block is drained."""
        out = np.full(len(self.times), np.nan)
        for k in range(len(self.times)):
            try:
                out[k] = purity(self.state(k))
            except EmptyState:
                pass
        return out


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])


def evolve_oracle(
    liouvillian: Liouvillian,
    t_end: float,
    tolerance: float = 1e-10,
    *,
    method: str = "dopri5",
    rho0: np.ndarray | None = None,
    run_to_absorption: bool = True,
    trace_floor: float = 1e-9,
    max_steps: int = 200_000,
    save_every: int = 1,
) -> Trajectory:
    """Integrate the master equation in the time domain.

    Parameters
    ----------
    t_end : float
        Earliest stopping time. With ``run_to_absorption`` the integration
        continues until the excited trace falls below ``trace_floor``;
        otherwise it stops exactly at ``t_end``.
    tolerance : float
        Local error target of the adaptive stepper (absolute and relative).
    method : {"dopri5", "propagator"}
        ``"dopri5"`` is an adaptive explicit Dormand-Prince 5(4) stepper with
        the moments carried as extra ODE components. ``"propagator"`` applies
        exact matrix-exponential panels (uniform up to ``t_end``, doubling
        afterwards) with the panel integrals obtained from one block
        exponential; it reaches long absorption times in a few dozen panels.
    max_steps : int
        Step (or panel) budget.

    Raises
    ------
    BudgetExhausted
        If the budget runs out first; ``err.partial`` holds the trajectory so far.
    """
    if not t_end > 0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    if not tolerance > 0:
        raise ValueError(f"tolerance must be positive, got {tolerance}")
    n = liouvillian.n_sites
    if rho0 is None:
        rho0 = ExcitedState.localized(n).rho
    rho0 = np.asarray(rho0, dtype=complex)
    if method == "dopri5":
        traj = _dopri5(liouvillian, rho0, t_end, tolerance, run_to_absorption,
                       trace_floor, max_steps, save_every)
    elif method == "propagator":
        traj = _propagator(liouvillian, rho0, t_end, run_to_absorption, trace_floor, max_steps)
    else:
        raise ValueError(f"unknown method {method!r}")
    if traj.budget_exhausted:
        raise BudgetExhausted(
            f"{method} stopped after {traj.n_steps} steps at t={traj.times[-1]:.6g} "
            f"with excited trace {traj.traces[-1]:.3e}", partial=traj)
    return traj


def _dopri5(liou, rho0, t_end, tol, to_absorption, trace_floor, max_steps, save_every):
    n = liou.n_sites
    gen = liou.generator
    sink = liou.sink_rate
    dim = n * n
    out = (n - 1) * (n + 1)
    diag = np.arange(n) * (n + 1)

    def rhs(t, y):
        f = np.empty_like(y)
        f[:dim] = gen @ y[:dim]
        p_out = y[out].real
        f[dim] = sink * p_out
        f[dim + 1] = p_out
        f[dim + 2] = t * p_out
        return f

    y = np.zeros(dim + 3, dtype=complex)
    y[:dim] = vec(rho0)
    t = 0.0
    times, states, ground = [0.0], [rho0.copy()], [0.0]
    norm = np.abs(gen).sum(axis=0).max() + 1e-300
    h = min(t_end, 0.01 / norm)
    k1 = rhs(t, y)
    steps = 0
    exhausted = False
    while True:
        if steps >= max_steps:
            exhausted = True
            break
        if not to_absorption and t + h > t_end:
            h = t_end - t
        ks = [k1]
        for s in range(1, 7):
            yi = y + h * sum(a * k for a, k in zip(_A[s], ks) if a != 0.0)
            ks.append(rhs(t + _C[s] * h, yi))
        y_new = yi  # FSAL: stage 7 is evaluated at the 5th-order solution
        err_vec = h * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
        scale = tol + tol * np.maximum(np.abs(y), np.abs(y_new))
        err = np.sqrt(np.mean(np.abs(err_vec / scale) ** 2))
        steps += 1
        if err <= 1.0:
            t += h
            y = y_new
            k1 = ks[6]
            if steps % save_every == 0:
                times.append(t)
                states.append(unvec(y[:dim], n).copy())
                ground.append(y[dim].real)
            trace = y[diag].real.sum()
            done = (t >= t_end and trace < trace_floor) if to_absorption else t >= t_end
            if done:
                break
        factor = 0.9 * err ** -0.2 if err > 0 else 5.0
        h *= min(5.0, max(0.2, factor))
    if times[-1] != t:
        times.append(t)
        states.append(unvec(y[:dim], n).copy())
        ground.append(y[dim].real)
    return Trajectory(np.array(times), np.array(states), np.array(ground),
                      float(y[dim + 1].real), float(y[dim + 2].real), sink,
                      liou.model.direct_time, exhausted, steps, "dopri5")


def _panel_operators(gen, h):
    """``exp(L h)``, ``int_0^h exp(L u) du`` and ``int_0^h u exp(L u) du``.

    Uses the block exponential of ``[[L, I, 0], [0, 0, I], [0, 0, 0]] h``
    whose top row is ``[E, F, G]`` with ``G = int_0^h (h - u) exp(L u) du``.
    """
    d = gen.shape[0]
    big = np.zeros((3 * d, 3 * d), dtype=complex)
    big[:d, :d] = gen
    big[:d, d:2 * d] = np.eye(d)
    big[d:2 * d, 2 * d:] = np.eye(d)
    ex = scipy.linalg.expm(big * h)
    e, f, g = ex[:d, :d], ex[:d, d:2 * d], ex[:d, 2 * d:]
    return e, f, h * f - g


def _propagator(liou, rho0, t_end, to_absorption, trace_floor, max_panels, n_uniform=64):
    n = liou.n_sites
    sink = liou.sink_rate
    out = (n - 1) * (n + 1)
    diag = np.arange(n) * (n + 1)
    h = t_end / n_uniform
    e, f, m = _panel_operators(liou.generator, h)
    x = vec(rho0).astype(complex)
    t, p0, mom0, mom1 = 0.0, 0.0, 0.0, 0.0
    times, states, ground = [0.0], [rho0.copy()], [0.0]
    panels = 0
    exhausted = False
    while True:
        if panels >= max_panels:
            exhausted = True
            break
        fx = f @ x
        mom0 += fx[out].real
        mom1 += t * fx[out].real + (m @ x)[out].real
        p0 += sink * fx[out].real
        x = e @ x
        t += h
        panels += 1
        times.append(t)
        states.append(unvec(x, n).copy())
        ground.append(p0)
        if t >= t_end * (1 - 1e-12):
            if not to_absorption or x[diag].real.sum() < trace_floor:
                break
            # panel doubling: [0, 2h] = [0, h] followed by [h, 2h]
            m = m + e @ (m + h * f)
            f = f + e @ f
            e = e @ e
            h *= 2.0
    return Trajectory(np.array(times), np.array(states), np.array(ground), mom0, mom1,
                      sink, liou.model.direct_time, exhausted, panels, "propagator")


def purity(state: ExcitedState) -> float:
    """``tr(rho^2) / tr(rho)^2``, insensitive to population lost to the sink."""
    rho = state.rho
    tr = np.trace(rho).real
    if tr < 1e-12:
        raise EmptyState(f"excited trace {tr:.3e} is too small for a purity")
    return float(np.einsum("ij,ji->", rho, rho).real / tr**2)


@dataclass(frozen=True)
class EigenstateReport:
    """Spectrum of ``H`` with the weight of every eigenstate on "in" and "out"."""

    energies: np.ndarray
    in_weight: np.ndarray
    out_weight: np.ndarray
    in_trapped: bool

    def __iter__(self):
        return iter(zip(self.energies.tolist(), self.in_weight.tolist(), self.out_weight.tolist()))

    def __len__(self):
        return len(self.energies)

    def format(self) -> str:
        lines = ["  energy            |<in|psi>|^2   |<out|psi>|^2"]
        for e, wi, wo in self:
            lines.append(f"  {e: .10e}  {wi:.6f}       {wo:.6e}")
        lines.append(f"  in-trapped: {self.in_trapped}")
        return "\n".join(lines)


def eigenstate_report(model: NetworkModel, in_threshold: float = 0.4,
                      out_threshold: float = 0.01) -> EigenstateReport:
    """Diagonalize ``H`` and flag eigenstates stuck on the injection site.

    A configuration is "in-trapped" when some eigenstate has weight above
    ``in_threshold`` on "in" and below ``out_threshold`` on "out". Such states
    barely reach the sink coherently.
    """
    energies, vecs = np.linalg.eigh(model.hamiltonian)
    w_in = np.abs(vecs[0]) ** 2
    w_out = np.abs(vecs[-1]) ** 2
    trapped = bool(np.any((w_in > in_threshold) & (w_out < out_threshold)))
    return EigenstateReport(energies, w_in, w_out, trapped)
