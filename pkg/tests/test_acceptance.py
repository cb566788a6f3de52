"""Acceptance criteria at their stated tolerances.

The landscape criteria share one desk-scale run (2e5 samples x 60 rates,
about 12 minutes on one core). Set ``EXCITONNET_ACCEPTANCE_CACHE`` to a file
path to keep that landscape between sessions; the cache is only reused when
its size and grid match.
"""

import io
import json
import os
from pathlib import Path

import numpy as np
import pytest

from excitonnet.cli import main
from excitonnet.dynamics import (
    Status,
    build_liouvillian,
    evolve_oracle,
    transfer_time,
    transfer_times,
    two_site_transfer_time,
)
from excitonnet.errors import BudgetExhausted
from excitonnet.landscape import Landscape, make_gamma_grid, run_landscape, summarize
from excitonnet.network import (
    Configuration,
    ModelParams,
    NetworkModel,
    build_model,
    rng_stream,
    sample_configuration,
    scale_configuration,
    scaled_params,
)
from excitonnet.optimizer import optimize_gamma0, sweep_optimized

N_BIG = 200_000
BIG_GRID = make_gamma_grid(1e-5, 1e3, 60)
TWO_SITE_T = 1.2132118364233779


def detail(request, text):
    request.node.user_properties.append(("detail", text))


def models(n, master_seed):
    p = ModelParams()
    return [build_model(sample_configuration(p, rng_stream(master_seed, i), i), p) for i in range(n)]


@pytest.fixture(scope="session")
def big_landscape():
    cache = os.environ.get("EXCITONNET_ACCEPTANCE_CACHE")
    if cache and Path(cache).exists():
        land = Landscape.from_dict(json.loads(Path(cache).read_text()))
        if land.n_samples == N_BIG and np.array_equal(land.grid.values, BIG_GRID.values):
            return land
    land = run_landscape(ModelParams(), BIG_GRID, N_BIG, master_seed=0,
                         workers=int(os.environ.get("EXCITONNET_WORKERS", "1")))
    if cache:
        Path(cache).write_text(land.to_json())
    return land


@pytest.fixture(scope="session")
def big_summary(big_landscape):
    return summarize(big_landscape)


@pytest.fixture(scope="session")
def optimized():
    return optimize_gamma0(ModelParams(), master_seed=0, restarts=32, budget=20_000,
                           workers=int(os.environ.get("EXCITONNET_WORKERS", "1")))


@pytest.mark.criterion(1, "two-site exactness, both solver paths and the time-domain oracle")
def test_criterion_1_two_site(request):
    p = ModelParams(n_sites=2)
    m = build_model(Configuration([[0, 0, 0.5], [0, 0, -0.5]]), p)
    closed = two_site_transfer_time(1.0, 20 / np.pi) / m.direct_time
    L = build_liouvillian(m, 0.0)
    errs = {meth: abs(transfer_time(L, meth).transfer_time / closed - 1) for meth in ("solve", "eig")}
    errs["dopri5"] = abs(evolve_oracle(L, 5.0, 1e-11, trace_floor=1e-13).transfer_time / closed - 1)
    errs["propagator"] = abs(evolve_oracle(L, 5.0, method="propagator",
                                           trace_floor=1e-15).transfer_time / closed - 1)
    detail(request, ", ".join(f"{k} {v:.1e}" for k, v in errs.items()))
    assert max(errs.values()) <= 1e-8


@pytest.mark.criterion(2, "oracle equivalence over 100 configurations x 10 rates")
def test_criterion_2_oracle_equivalence(request):
    ratios = np.geomspace(1e-5, 1e3, 10)
    worst, compared, skipped = 0.0, 0, 0
    dopri_worst, dopri_done, dopri_budget = 0.0, 0, 0
    for k, m in enumerate(models(100, master_seed=2)):
        for ratio in ratios:
            L = build_liouvillian(m, ratio * m.sink_rate)
            ref = transfer_time(L)
            if not ref.converged:
                skipped += 1
                continue
            traj = evolve_oracle(L, m.direct_time, method="propagator", trace_floor=1e-13,
                                 max_steps=500)
            worst = max(worst, abs(ref.transfer_time - traj.transfer_time) / traj.transfer_time)
            compared += 1
            # the explicit stepper is affordable only on a budgeted subset
            if k < 10:
                try:
                    tr = evolve_oracle(L, m.direct_time, 1e-10, trace_floor=1e-12, max_steps=5000)
                except BudgetExhausted:
                    dopri_budget += 1
                    continue
                dopri_done += 1
                dopri_worst = max(dopri_worst, abs(ref.transfer_time - tr.transfer_time) / tr.transfer_time)
    detail(request, f"propagator worst {worst:.1e} over {compared} converged cases, "
                    f"{skipped} not converged; dopri5 worst {dopri_worst:.1e} over {dopri_done} "
                    f"cases, {dopri_budget} over budget")
    assert compared >= 900
    assert worst <= 1e-6
    assert dopri_done > 0 and dopri_worst <= 1e-6


@pytest.mark.criterion(3, "physicality along 50 oracle trajectories")
def test_criterion_3_physicality(request):
    ms = models(25, master_seed=3)
    trace_err, min_eig = 0.0, np.inf
    for i, m in enumerate(ms):
        for ratio in (1e-2 * (1 + i), 1.0 + i):
            L = build_liouvillian(m, ratio * m.sink_rate)
            traj = evolve_oracle(L, 0.25 * m.direct_time, 1e-10, run_to_absorption=False)
            trace_err = max(trace_err, np.abs(traj.traces + traj.ground - 1).max())
            herm = 0.5 * (traj.states + np.conj(np.swapaxes(traj.states, 1, 2)))
            min_eig = min(min_eig, np.linalg.eigvalsh(herm).min())
            assert np.all(traj.ground >= -1e-9)
    # dephasing only: H = 0, no sink
    deph_err = 0.0
    for gamma in (0.1, 1.0, 10.0):
        bare = NetworkModel(np.zeros((7, 7)), np.pi / 2, 0.0, ModelParams())
        rho0 = np.zeros((7, 7), complex)
        rho0[:2, :2] = 0.5
        traj = evolve_oracle(build_liouvillian(bare, gamma), 2.0 / gamma, 1e-12, rho0=rho0,
                             run_to_absorption=False)
        deph_err = max(deph_err, np.abs(traj.states[:, 0, 1] - 0.5 * np.exp(-4 * gamma * traj.times)).max())
    detail(request, f"trace {trace_err:.1e}, min eigenvalue {min_eig:.1e}, coherence decay {deph_err:.1e}")
    assert trace_err <= 1e-9
    assert min_eig >= -1e-9
    assert deph_err <= 1e-8


@pytest.fixture(scope="session")
def gamma_one_pass():
    """Every sample of the big ensemble's first 1e4 seeds at exactly gamma = Gamma."""
    p = ModelParams()
    rows = []
    for i in range(10_000):
        m = build_model(sample_configuration(p, rng_stream(0, i), i), p)
        t, a, r, s = transfer_times(m, [m.sink_rate])
        rows.append((t[0], a[0], r[0], s[0]))
    return rows


@pytest.mark.criterion(4, "absorption normalization in 1e4 samples at gamma = Gamma")
def test_criterion_4_absorption(request, gamma_one_pass):
    absorption = np.array([a for _, a, _, s in gamma_one_pass if s is Status.CONVERGED])
    # independent of the status check, which itself uses the same threshold
    solved = np.array([a for _, a, r, _ in gamma_one_pass if r <= 1e-8 and np.isfinite(a)])
    detail(request, f"{absorption.size} converged, max |abs-1| {np.abs(solved - 1).max():.1e}")
    assert absorption.size == 10_000
    assert np.abs(absorption - 1).max() <= 1e-6
    assert np.abs(solved - 1).max() <= 1e-6


@pytest.mark.slow
@pytest.mark.criterion(5, "classical clustering of the median minimum")
def test_criterion_5_clustering(request, big_summary):
    med = big_summary.median
    k = int(np.nanargmin(med))
    g = BIG_GRID.values[k]
    detail(request, f"argmin gamma/Gamma {g:.3g}, median {med[k]:.3f} T")
    assert 0.1 <= g <= 10
    assert 0.3 <= med[k] <= 3


@pytest.mark.slow
@pytest.mark.criterion(6, "Zeno slope of the median over [1e2, 1e3] Gamma")
def test_criterion_6_zeno(request, big_summary):
    sel = (BIG_GRID.values >= 1e2 * (1 - 1e-12)) & (BIG_GRID.values <= 1e3 * (1 + 1e-12))
    med = big_summary.median[sel]
    assert np.all(np.isfinite(med))
    slope = np.polyfit(np.log(BIG_GRID.values[sel]), np.log(med), 1)[0]
    detail(request, f"slope {slope:.3f} over {sel.sum()} points")
    assert abs(slope - 1.0) <= 0.15


@pytest.mark.slow
@pytest.mark.criterion(7, "optimized configuration beats the median by a factor two")
def test_criterion_7_advantage(request, big_summary, optimized):
    curve = sweep_optimized(optimized, BIG_GRID)
    sel = BIG_GRID.values <= 1.0
    ok = curve.transfer[sel] <= 0.5 * big_summary.median[sel]
    frac = ok.mean()
    detail(request, f"best_T {optimized.best_T:.4f} T, factor-two at {frac:.0%} of {sel.sum()} points")
    assert frac >= 0.9
    assert optimized.best_T <= 0.5
    assert optimized.best_T < TWO_SITE_T


@pytest.mark.slow
@pytest.mark.criterion(8, "coherent sub-ensemble at gamma = Gamma, minimum below median")
def test_criterion_8_coherent(request, big_landscape, big_summary, gamma_one_pass):
    k = int(np.argmin(np.abs(np.log(BIG_GRID.values))))
    ratio = BIG_GRID.values[k]
    t_deph = 1 / (4 * ratio * 10.0)
    coherent = int(big_landscape.coherent[k])
    exact_min = min(t for t, _, _, s in gamma_one_pass if s is Status.CONVERGED)
    sel = BIG_GRID.values <= 1.0
    below = big_summary.minimum[sel] < big_summary.median[sel]
    detail(request, f"nearest grid rate {ratio:.3f} Gamma: {coherent} samples below T_deph = "
                    f"{t_deph:.4f} T, ensemble minimum {big_summary.minimum[k]:.4f} T; at exactly "
                    f"Gamma min over 1e4 = {exact_min:.4f} T vs 0.025 T; minimum < median at "
                    f"{below.sum()}/{sel.sum()} rates")
    assert np.all(below)
    assert coherent >= 1


@pytest.mark.criterion(9, "sample output identical for 1, 4 and 16 workers")
def test_criterion_9_determinism(request, tmp_path):
    blobs = []
    for w in (1, 4, 16):
        out = tmp_path / f"w{w}"
        assert main(["sample", "--n-samples", "1000", "--seed", "123", "--workers", str(w),
                     "-o", str(out)]) == 0
        blobs.append((out / "landscape.csv").read_bytes())
    detail(request, f"{len(blobs[0])} bytes each")
    assert blobs[0] == blobs[1] == blobs[2]


@pytest.mark.criterion(10, "scale invariance of T/T at fixed gamma/Gamma")
def test_criterion_10_scale(request):
    p = ModelParams()
    ratios = np.geomspace(1e-5, 1e3, 7)
    worst = 0.0
    for i in range(20):
        c = sample_configuration(p, rng_stream(10, i), i)
        m = build_model(c, p)
        base, _, _, s0 = transfer_times(m, ratios * m.sink_rate)
        for s in (0.5, 2.0):
            ms = build_model(scale_configuration(c, s), scaled_params(p, s))
            t, _, _, s1 = transfer_times(ms, ratios * ms.sink_rate)
            ok = (s0 == Status.CONVERGED) & (s1 == Status.CONVERGED)
            assert np.array_equal(s0, s1)
            worst = max(worst, np.max(np.abs(t[ok] / base[ok] - 1)))
    detail(request, f"worst relative difference {worst:.1e}")
    assert worst <= 1e-10
