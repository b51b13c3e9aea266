"""Monte Carlo backend: dephasing noise, stochastic trajectories, ensembles.

Pure dephasing enters as a random phase ``phi(t)``, a Wiener process with
``<dphi**2> = 2 gamma_p dt``, added to the emitter transition phase.  Each
realisation is a pure state, so two-time correlators factorise per
trajectory and the ensemble average is a plain mean over noise paths.

Integrator
----------
In the frame ``Et = E * exp(-1j (delta t + phi(t)))`` the deterministic
part is the constant 2x2 generator of :func:`model.system_matrix` and the
noise is a pure phase kick ``Et -> Et * exp(-1j dphi)``.  One step is the
symmetric composition

    kick(first half increment) . expm(M dt) . kick(second half increment)

with exact flows for both pieces.  This uses the phase at the step midpoint
(Stratonovich reading of the white-noise limit), is exact for
``gamma_p = 0``, reproduces ``E = exp(-gamma t)`` exactly for ``g0 = 0``,
and never increases ``|E|**2 + |C|**2`` because both flows are contractions.

Reproducibility
---------------
Trajectory ``i`` of an ensemble draws its noise from
``numpy.random.PCG64`` (128-bit state) seeded with a 64-bit integer derived
from ``SeedSequence(master_seed, spawn_key=(i,))``.  Results therefore do
not depend on batching or on the number of worker threads; batches are
reduced in index order.  Streams are stable for a given numpy version.
"""

from __future__ import annotations

import concurrent.futures
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import expm

from .model import AmplitudeTrajectory, CavitySpecError, NumericalGrid, SystemParams, default_dt, system_matrix


class StepTooLarge(CavitySpecError, ValueError):
    pass


# whole batches are grouped into chunks of about this many trajectories
_CHUNK = 1024
# noise is drawn this many steps at a time
_BLOCK = 1024
# the splitting has an O(dt**2) weak bias in the noise average; at the
# generic step it exceeds the batch scatter of a 2e4-trajectory ensemble
MC_STEP_DIVISOR = 4


@dataclass(frozen=True)
class NoisePath:
    """Cumulative dephasing phase ``phi`` sampled every ``dt`` ns, ``phi[0] = 0``."""

    seed: int
    dt: float
    phi: np.ndarray

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.phi)


@dataclass(frozen=True)
class EnsembleConfig:
    n_traj: int = 20_000
    master_seed: int = 20240601
    batch_count: int = 50

    def __post_init__(self):
        if self.n_traj < 1:
            raise ValueError("n_traj must be >= 1")
        if self.batch_count < 1 or self.n_traj % self.batch_count:
            raise ValueError("batch_count must divide n_traj")

    @property
    def batch_size(self) -> int:
        return self.n_traj // self.batch_count


@dataclass
class CorrelationGrid:
    """Two-time correlators ``<X(t+tau) X*(t)>`` on an outer-t by tau lattice.

    ``corr_e[i, k]`` holds ``<E(t_i + tau_k) E*(t_i)>`` in the interaction
    frame, ``corr_c`` the cavity analogue.  ``*_err`` are batch-mean
    standard errors (absolute value of the complex error), or None for
    deterministic backends.  ``batch_profile_*`` keep the t-integrated
    profile ``sum_i w_i corr[i, :]`` of every batch so spectral error bars
    can be formed without storing per-batch grids.
    """

    t: np.ndarray
    tau: np.ndarray
    corr_e: np.ndarray
    corr_c: np.ndarray
    corr_e_err: Optional[np.ndarray] = None
    corr_c_err: Optional[np.ndarray] = None
    batch_profile_e: Optional[np.ndarray] = None
    batch_profile_c: Optional[np.ndarray] = None
    backend: str = "unknown"
    meta: dict = field(default_factory=dict)

    @property
    def n_batches(self) -> int:
        return 0 if self.batch_profile_e is None else len(self.batch_profile_e)


def trajectory_seed(master_seed: int, index: int) -> int:
    """64-bit seed for trajectory ``index``; independent of execution order."""
    words = np.random.SeedSequence(master_seed, spawn_key=(index,)).generate_state(2, np.uint32)
    return int(words[0]) | (int(words[1]) << 32)


def _increments(gamma_p: float, dt: float, n_steps: int, seed: int) -> np.ndarray:
    if gamma_p == 0:
        return np.zeros(n_steps)
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.standard_normal(n_steps) * math.sqrt(2.0 * gamma_p * dt)


def generate_noise(gamma_p: float, dt: float, n_steps: int, seed: int) -> NoisePath:
    """Wiener phase path with ``n_steps`` increments of variance ``2 gamma_p dt``."""
    if gamma_p < 0:
        raise ValueError("gamma_p must be >= 0")
    if not dt > 0:
        raise ValueError("dt must be positive")
    phi = np.concatenate([[0.0], np.cumsum(_increments(gamma_p, dt, n_steps, seed))])
    return NoisePath(seed=int(seed), dt=float(dt), phi=phi)


def check_step(params: SystemParams, dt: float) -> None:
    fastest = max(params.g0, params.kappa, params.gamma, abs(params.delta), params.gamma_p)
    if dt * fastest > 0.1:
        raise StepTooLarge(
            f"dt={dt:g} ns too large: dt*max(rate)={dt * fastest:.3g} > 0.1"
        )


def default_mc_dt(params: SystemParams) -> float:
    """Default Monte Carlo step, finer than :func:`model.default_dt`."""
    return default_dt(params) / MC_STEP_DIVISOR


def _propagate(params: SystemParams, dt: float, n_steps: int, draw, n_traj: int, store_every: int = 1):
    """Advance ``n_traj`` trajectories by ``n_steps`` steps of ``dt``.

    ``draw(k)`` must return the phase increments of the next ``k`` steps,
    shape (n_traj, 2k), two half-step increments per step.  Returns the
    interaction-frame ``(E, C)`` at every ``store_every``-th step, each of
    shape (n_steps//store_every + 1, n_traj).
    """
    p = expm(system_matrix(params) * dt)
    p00, p01, p10, p11 = p[0, 0], p[0, 1], p[1, 0], p[1, 1]
    et = np.ones(n_traj, dtype=complex)
    c = np.zeros(n_traj, dtype=complex)
    phi = np.zeros(n_traj)
    n_store = n_steps // store_every + 1
    e_out = np.empty((n_store, n_traj), dtype=complex)
    c_out = np.empty((n_store, n_traj), dtype=complex)
    e_out[0] = et
    c_out[0] = c
    done = 0
    while done < n_steps:
        k = min(_BLOCK, n_steps - done)
        incs = draw(k)
        kicks = np.ascontiguousarray(np.exp(-1j * incs).T)
        phi_end = (phi[:, None] + np.cumsum(incs, axis=1)[:, 1::2]).T
        for m in range(k):
            et = et * kicks[2 * m]
            et, c = p00 * et + p01 * c, p10 * et + p11 * c
            et *= kicks[2 * m + 1]
            n = done + m + 1
            if n % store_every == 0:
                j = n // store_every
                e_out[j] = et * np.exp(1j * (params.delta * dt * n + phi_end[m]))
                c_out[j] = c
        phi = phi_end[-1]
        done += k
    return e_out, c_out


def integrate_trajectory(params: SystemParams, noise: NoisePath, t_grid) -> AmplitudeTrajectory:
    """Integrate one noise realisation from ``E(0) = 1, C(0) = 0``.

    ``t_grid`` must be uniform with step ``dt`` and ``noise`` must be sampled
    at ``dt/2`` with at least ``2*(len(t_grid) - 1)`` increments (the
    midpoint phase of every step is needed).
    """
    t = np.asarray(t_grid, dtype=float)
    if t[0] != 0:
        raise ValueError("t_grid must start at 0 (initial condition E(0) = 1)")
    dt = float(t[1] - t[0])
    if not np.allclose(np.diff(t), dt, rtol=1e-9, atol=0):
        raise ValueError("t_grid must be uniform")
    if not math.isclose(noise.dt, dt / 2, rel_tol=1e-9):
        raise ValueError("noise must be sampled at half the integration step")
    check_step(params, dt)
    n_steps = len(t) - 1
    incs = noise.increments
    if len(incs) < 2 * n_steps:
        raise ValueError("noise path too short for t_grid")
    cursor = [0]

    def draw(k):
        out = incs[cursor[0] : cursor[0] + 2 * k]
        cursor[0] += 2 * k
        return out[None, :]

    e, c = _propagate(params, dt, n_steps, draw, 1)
    return AmplitudeTrajectory(t=t, e=e[:, 0], c=c[:, 0])


def trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _chunk_sums(params, grid, seeds, batch_size):
    """Correlation sums for consecutive whole batches, one pair per batch."""
    dt = grid.dt
    s = grid.tau_stride
    r = grid.t_stride // s
    n_steps = grid.n_t + grid.n_tau
    n_outer = grid.n_t // grid.t_stride + 1
    n_tau = grid.n_tau // s + 1
    sigma = math.sqrt(params.gamma_p * dt)
    if params.gamma_p > 0:
        rngs = [np.random.Generator(np.random.PCG64(sd)) for sd in seeds]

        def draw(k):
            return np.stack([g.standard_normal(2 * k) for g in rngs]) * sigma
    else:

        def draw(k):
            return np.zeros((len(seeds), 2 * k))

    e, c = _propagate(params, dt, n_steps, draw, len(seeds), store_every=s)
    out = []
    for b0 in range(0, len(seeds), batch_size):
        rows = slice(b0, b0 + batch_size)
        sum_e = np.empty((n_outer, n_tau), dtype=complex)
        sum_c = np.empty((n_outer, n_tau), dtype=complex)
        for i in range(n_outer):
            j = i * r
            sum_e[i] = e[j : j + n_tau, rows] @ e[j, rows].conj()
            sum_c[i] = c[j : j + n_tau, rows] @ c[j, rows].conj()
        out.append((sum_e, sum_c))
    return out


def ensemble_correlations(
    params: SystemParams,
    config: EnsembleConfig,
    grid: NumericalGrid,
    workers: int = 1,
) -> CorrelationGrid:
    """Monte Carlo estimate of both two-time correlators.

    Batches run on ``workers`` threads; partial sums are folded in batch
    order so the result is bit-identical for any worker count.
    """
    check_step(params, grid.dt)
    seeds = [trajectory_seed(config.master_seed, i) for i in range(config.n_traj)]
    size = config.batch_size
    per_chunk = max(1, _CHUNK // size) * size
    chunks = [seeds[i : i + per_chunk] for i in range(0, len(seeds), per_chunk)]
    t_outer = grid.t_outer
    w_t = trapezoid_weights(len(t_outer), t_outer[1] - t_outer[0]) if len(t_outer) > 1 else np.ones(1)

    # squares are accumulated about the first batch mean (shifted data) so
    # that identical batches give a zero error without cancellation
    sum_e = sum_c = sq_e = sq_c = ref_e = ref_c = None
    prof_e, prof_c = [], []

    def run(chunk):
        return _chunk_sums(params, grid, chunk, size)

    def sq(x):
        return x.real**2 + 1j * x.imag**2

    pool = concurrent.futures.ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    results = pool.map(run, chunks) if pool is not None else map(run, chunks)
    try:
        for chunk_result in results:
            for be, bc in chunk_result:
                me, mc = be / size, bc / size
                if sum_e is None:
                    ref_e, ref_c = me.copy(), mc.copy()
                    sum_e, sum_c = np.zeros_like(me), np.zeros_like(mc)
                    sq_e, sq_c = np.zeros_like(me), np.zeros_like(mc)
                de, dc = me - ref_e, mc - ref_c
                sum_e += de
                sum_c += dc
                sq_e += sq(de)
                sq_c += sq(dc)
                prof_e.append(w_t @ me)
                prof_c.append(w_t @ mc)
    finally:
        if pool is not None:
            pool.shutdown()

    nb = config.batch_count
    corr_e, corr_c = ref_e + sum_e / nb, ref_c + sum_c / nb

    def stderr(shifted_sum, sqsum):
        if nb < 2:
            return None
        m = shifted_sum / nb
        var_r = np.maximum(sqsum.real / nb - m.real**2, 0.0) * nb / (nb - 1)
        var_i = np.maximum(sqsum.imag / nb - m.imag**2, 0.0) * nb / (nb - 1)
        return np.sqrt((var_r + var_i) / nb)

    return CorrelationGrid(
        t=t_outer,
        tau=grid.tau,
        corr_e=corr_e,
        corr_c=corr_c,
        corr_e_err=stderr(sum_e, sq_e),
        corr_c_err=stderr(sum_c, sq_c),
        batch_profile_e=np.array(prof_e),
        batch_profile_c=np.array(prof_c),
        backend="monte_carlo",
        meta={
            "n_traj": config.n_traj,
            "master_seed": config.master_seed,
            "batch_count": config.batch_count,
            "dt": grid.dt,
        },
    )
