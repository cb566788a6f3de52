"""Vectorized master-equation generators on the excited block.

Two representations are used:

* the complex ``N**2 x N**2`` generator acting on ``vec(rho)`` (column-major
  stacking, ``vec(A X B) = (B.T kron A) vec(X)``);
* a real ``N**2``-dimensional coordinate system for Hermitian matrices,
  ordered ``[populations, Re rho_ij (i<j), Im rho_ij (i<j)]``.

In real coordinates with a real symmetric Hamiltonian the generator splits as
``[[A, B], [C, D]]`` where the first block holds populations and real parts,
the second the imaginary parts, ``A`` and ``D`` are diagonal (sink and
dephasing only) and ``B``, ``C`` carry the commutator. The commutator blocks
are independent of the dephasing rate, so a sweep over rates only rewrites
the diagonal.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = [
    "vec",
    "unvec",
    "complex_generator",
    "real_basis",
    "RealSplit",
    "real_split",
    "full_moments",
]


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(v).reshape((n, n), order="F")


def complex_generator(h: np.ndarray, sink_rate: float, gamma: float, out: int = -1) -> np.ndarray:
    """Generator of ``-i[H, rho] - (Gamma/2){P_out, rho} - 4 gamma offdiag(rho)``."""
    n = h.shape[0]
    eye = np.eye(n)
    proj = np.zeros((n, n))
    proj[out, out] = 1.0
    gen = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    gen -= 0.5 * sink_rate * (np.kron(eye, proj) + np.kron(proj.T, eye))
    offdiag = 1.0 - vec(eye)
    gen -= np.diag(4.0 * gamma * offdiag)
    return gen


@lru_cache(maxsize=None)
def real_basis(n: int):
    """Maps between ``vec(rho)`` and real coordinates for size ``n``.

    Returns ``(to_real, to_vec, pairs)`` with ``x = to_real @ vec(rho)`` and
    ``vec(rho) = to_vec @ x`` for Hermitian ``rho``.
    """
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    m = len(pairs)
    dim = n * n
    to_real = np.zeros((dim, dim), dtype=complex)
    to_vec = np.zeros((dim, dim), dtype=complex)
    k = lambda i, j: i + n * j  # noqa: E731  column-major index of (i, j)
    for i in range(n):
        to_real[i, k(i, i)] = 1.0
        to_vec[k(i, i), i] = 1.0
    for p, (i, j) in enumerate(pairs):
        re, im = n + p, n + m + p
        to_real[re, k(i, j)] = 0.5
        to_real[re, k(j, i)] = 0.5
        to_real[im, k(i, j)] = -0.5j
        to_real[im, k(j, i)] = 0.5j
        to_vec[k(i, j), re] = 1.0
        to_vec[k(j, i), re] = 1.0
        to_vec[k(i, j), im] = 1.0j
        to_vec[k(j, i), im] = -1.0j
    for a in (to_real, to_vec):
        a.setflags(write=False)
    return to_real, to_vec, tuple(pairs)


@lru_cache(maxsize=None)
def _commutator_tensor(n: int) -> np.ndarray:
    """Real-coordinate commutator blocks for each symmetric unit coupling.

    Returns ``(b, c)`` with shapes ``(n_x, n_y, n_pairs)`` and
    ``(n_y, n_x, n_pairs)``; the diagonal blocks of a commutator vanish.
    """
    to_real, to_vec, pairs = real_basis(n)
    n_x = n + len(pairs)
    b = np.empty((n_x, len(pairs), len(pairs)))
    c = np.empty((len(pairs), n_x, len(pairs)))
    for p, (i, j) in enumerate(pairs):
        h = np.zeros((n, n))
        h[i, j] = h[j, i] = 1.0
        gen = to_real @ complex_generator(h, 0.0, 0.0) @ to_vec
        assert np.abs(gen.imag).max() < 1e-14
        assert np.abs(gen[:n_x, :n_x]).max() == 0 and np.abs(gen[n_x:, n_x:]).max() == 0
        b[:, :, p] = gen[:n_x, n_x:].real
        c[:, :, p] = gen[n_x:, :n_x].real
    b.setflags(write=False)
    c.setflags(write=False)
    return b, c


class RealSplit:
    """Gamma-independent pieces of the real generator for one Hamiltonian."""

    __slots__ = ("n", "n_x", "n_y", "b", "c", "sink_x", "sink_y", "deph_x", "out_index", "sink_rate")

    def __init__(self, h: np.ndarray, sink_rate: float):
        n = h.shape[0]
        _, _, pairs = real_basis(n)
        iu = np.array(pairs).T
        self.n = n
        self.n_y = len(pairs)
        self.n_x = n + self.n_y
        tb, tc = _commutator_tensor(n)
        hu = h[iu[0], iu[1]]
        self.b = tb @ hu
        self.c = tc @ hu
        out = n - 1
        self.out_index = out
        self.sink_rate = sink_rate
        pops = np.where(np.arange(n) == out, -sink_rate, 0.0)
        pair_sink = np.array([-0.5 * sink_rate * ((i == out) + (j == out)) for i, j in pairs])
        self.sink_x = np.concatenate([pops, pair_sink])
        self.sink_y = pair_sink
        self.deph_x = np.concatenate([np.zeros(n), np.ones(self.n_y)])

    def diagonals(self, gammas: np.ndarray):
        g = np.asarray(gammas, dtype=float)[:, None]
        return self.sink_x - 4.0 * g * self.deph_x, self.sink_y - 4.0 * g

    def generators(self, gammas) -> np.ndarray:
        """Dense real generators, shape ``(G, n*n, n*n)``."""
        a, d = self.diagonals(np.atleast_1d(gammas))
        G = a.shape[0]
        dim = self.n_x + self.n_y
        r = np.zeros((G, dim, dim))
        r[:, : self.n_x, self.n_x:] = self.b
        r[:, self.n_x:, : self.n_x] = self.c
        ix = np.arange(self.n_x)
        iy = np.arange(self.n_x, dim)
        r[:, ix, ix] = a
        r[:, iy, iy] = d
        return r


def real_split(h: np.ndarray, sink_rate: float) -> RealSplit:
    return RealSplit(np.asarray(h, dtype=float), float(sink_rate))


def full_moments(r: np.ndarray, x0: np.ndarray | None = None):
    """Two dense solves on stacked real generators ``r`` of shape ``(G, D, D)``.

    Returns the raw moment vectors ``tau``, ``sigma`` and the relative
    residuals. Rows whose generator is singular come back as NaN.
    """
    G, dim, _ = r.shape
    if x0 is None:
        x0 = np.zeros(dim)
        x0[0] = 1.0
    tau = np.full((G, dim), np.nan)
    sigma = np.full((G, dim), np.nan)
    try:
        tau[:] = np.linalg.solve(r, -np.broadcast_to(x0, (G, dim))[..., None])[..., 0]
        sigma[:] = np.linalg.solve(r, -tau[..., None])[..., 0]
    except np.linalg.LinAlgError:
        for g in range(G):
            try:
                tau[g] = np.linalg.solve(r[g], -x0)
                sigma[g] = np.linalg.solve(r[g], -tau[g])
            except np.linalg.LinAlgError:
                pass
    with np.errstate(invalid="ignore", over="ignore"):
        res1 = np.linalg.norm(np.einsum("gij,gj->gi", r, tau) + x0, axis=1) / np.linalg.norm(x0)
        res2 = np.linalg.norm(np.einsum("gij,gj->gi", r, sigma) + tau, axis=1) / np.linalg.norm(tau, axis=1)
    return tau, sigma, res1, res2
