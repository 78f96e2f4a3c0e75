"""Closed- and open-system time evolution, observables and 2D sweeps.

Both equations are integrated with the classical fixed-step fourth-order
Runge-Kutta scheme.  Evolution only touches the basis states reachable from
the initial state (through the Hamiltonian and, for the master equation, the
jump operators); everything outside that support stays exactly zero.

For small supports the per-step RK4 maps are built in batches and multiplied
together with a pairwise tree, which avoids a Python-level loop over 20000
tiny matrix products.  Larger supports fall back to the plain step loop.  Both
paths implement the same discrete scheme.
"""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .hilbert import BasisLabel, SpaceDescriptor, check_density, ket
from .models import reachable

logger = logging.getLogger(__name__)

BATCH_MAX_DIM = 20
DENSITY_VEC_MAX_DIM = 10
MIN_STEPS = 1000
CHUNK = 256


class IntegrationAccuracyError(RuntimeError):
    pass


class PositivityWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class EvolutionConfig:
    t_f: float
    n_steps: int = 20000
    record_every: int = 100

    def __post_init__(self):
        if self.t_f <= 0:
            raise ValueError("t_f must be positive")
        if self.n_steps < MIN_STEPS:
            raise ValueError(f"n_steps must be at least {MIN_STEPS}")
        if self.record_every < 1:
            raise ValueError("record_every must be positive")

    @property
    def step(self) -> float:
        return self.t_f / self.n_steps

    def refined(self, factor: int = 2) -> "EvolutionConfig":
        return EvolutionConfig(self.t_f, self.n_steps * factor, self.record_every * factor)


@dataclass(frozen=True)
class LindbladOperator:
    name: str
    rate: float
    matrix: np.ndarray

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError(f"rate of {self.name} must be non-negative")

    @property
    def op(self) -> np.ndarray:
        return np.sqrt(self.rate) * self.matrix


@dataclass(frozen=True)
class LindbladSet:
    operators: tuple[LindbladOperator, ...] = ()

    def active(self) -> list[LindbladOperator]:
        return [o for o in self.operators if o.rate > 0]


@dataclass(eq=False)
class TrajectoryRecord:
    space: SpaceDescriptor
    times: np.ndarray
    states: np.ndarray
    open_system: bool = False
    diagnostics: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def populations(self, labels: Sequence) -> np.ndarray:
        return populations(self, labels)


@dataclass(frozen=True)
class FidelityReport:
    fidelity_overlap: float
    fidelity_population: float
    target_label: str = ""


# --------------------------------------------------------------------- engine


def _rk4_maps(a0, terms, coeff, h):
    """RK4 one-step maps for ``dx/dt = (a0 + sum_k f_k(t) A_k) x``.

    ``coeff`` has shape ``(K, 2m + 1)``: pulse values on the half-step grid of
    ``m`` consecutive steps.  Returns an array of shape ``(m, D, D)``.
    """
    d = a0.shape[0]
    if terms.shape[0]:
        gens = a0[None] + np.einsum("kj,kab->jab", coeff, terms)
    else:
        gens = np.broadcast_to(a0, (coeff.shape[1], d, d))
    a1, a2, a3 = gens[0:-1:2], gens[1::2], gens[2::2]
    eye = np.eye(d)
    b1 = a1
    b2 = a2 @ (eye + 0.5 * h * b1)
    b3 = a2 @ (eye + 0.5 * h * b2)
    b4 = a3 @ (eye + h * b3)
    return eye + (h / 6.0) * (b1 + 2 * b2 + 2 * b3 + b4)


def _chain_product(maps):
    """``maps[-1] @ ... @ maps[0]`` via pairwise reduction."""
    eye = np.eye(maps.shape[1])[None]
    while maps.shape[0] > 1:
        if maps.shape[0] % 2:
            maps = np.concatenate([maps, eye], axis=0)
        maps = maps[1::2] @ maps[0::2]
    return maps[0]


def _rk4_loop(rhs, x, n, h, record_steps):
    """Plain RK4 with ``rhs(j, x)`` evaluated at half-step index ``j``; returns the later snapshots."""
    snaps = []
    nxt = 1
    for i in range(n):
        k1 = rhs(2 * i, x)
        k2 = rhs(2 * i + 1, x + 0.5 * h * k1)
        k3 = rhs(2 * i + 1, x + 0.5 * h * k2)
        k4 = rhs(2 * i + 2, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if i + 1 == record_steps[nxt]:
            snaps.append(x.copy())
            nxt += 1
    return snaps


def _pulse_grid(pulses, n, h):
    half_grid = np.arange(2 * n + 1) * (h / 2)
    if not pulses:
        return np.zeros((0, 2 * n + 1))
    return np.array([np.broadcast_to(p(half_grid), half_grid.shape) for p in pulses], dtype=float)


def _record_steps(config):
    return list(range(0, config.n_steps, config.record_every)) + [config.n_steps]


def integrate_linear(
    a0: np.ndarray,
    terms: Sequence[np.ndarray],
    pulses: Sequence[Callable],
    x0: np.ndarray,
    config: EvolutionConfig,
    batch: bool | None = None,
):
    """Fixed-step RK4 for a linear ODE with pulse-weighted generators.

    Returns ``(times, snapshots)``; snapshots are taken every ``record_every``
    steps and always include ``t = 0`` and ``t = t_f``.
    """
    n, h = config.n_steps, config.step
    coeff = _pulse_grid(pulses, n, h)
    terms_arr = np.array(terms, dtype=complex) if len(terms) else np.zeros((0,) + a0.shape, complex)
    d = a0.shape[0]
    if batch is None:
        batch = d <= BATCH_MAX_DIM

    record_steps = _record_steps(config)
    times = np.array(record_steps) * h
    x = np.array(x0, dtype=complex)
    snaps = [x.copy()]

    if batch:
        for s, e in zip(record_steps[:-1], record_steps[1:]):
            block = np.eye(d, dtype=complex)
            for cs in range(s, e, CHUNK):
                ce = min(cs + CHUNK, e)
                maps = _rk4_maps(a0, terms_arr, coeff[:, 2 * cs : 2 * ce + 1], h)
                block = _chain_product(maps) @ block
            x = block @ x
            snaps.append(x.copy())
    else:
        # one stacked product gives a0 x and every A_k x; weights pick the generator
        stacked = np.concatenate([a0[None], terms_arr]).reshape(-1, d)
        weights = np.vstack([np.ones((1, coeff.shape[1])), coeff]).T.astype(complex).copy()
        k = weights.shape[1]

        def rhs(j, v):
            return weights[j] @ (stacked @ v).reshape(k, d)

        snaps += _rk4_loop(rhs, x, n, h, record_steps)
    return times, np.array(snaps)


# ----------------------------------------------------------- Schrodinger


def _support_for(model, initial_indices, extra=()):
    return sorted(reachable(model, initial_indices, extra))


def schrodinger_evolve(model, initial: np.ndarray, config: EvolutionConfig, batch: bool | None = None) -> TrajectoryRecord:
    """Integrate ``i d|psi>/dt = H(t)|psi>`` over ``[0, t_f]``."""
    space = model.space
    initial = np.asarray(initial, dtype=complex)
    if initial.shape != (space.dim,):
        raise ValueError(f"initial state has shape {initial.shape}, expected ({space.dim},)")
    support = _support_for(model, np.flatnonzero(initial))
    idx = np.ix_(support, support)
    a0 = -1j * np.asarray(model.static)[idx]
    terms = [-1j * np.asarray(op)[idx] for _, op in model.drive_terms]
    pulses = [p for p, _ in model.drive_terms]
    times, snaps = integrate_linear(a0, terms, pulses, initial[support], config, batch)

    states = np.zeros((len(times), space.dim), complex)
    states[:, support] = snaps
    norms = np.linalg.norm(snaps, axis=1)
    drift = float(np.abs(norms - norms[0]).max())
    if not drift <= 1e-6:  # also catches nan from an unstable step
        raise IntegrationAccuracyError(f"norm drift {drift:.2e} exceeds 1e-6; increase n_steps")
    return TrajectoryRecord(space, times, states, False, {"norm_drift": drift, "support": len(support)})


# --------------------------------------------------------------- Lindblad


def _left(a):
    return np.kron(a, np.eye(a.shape[0]))


def _right(a):
    # row-major vec: vec(rho A) = (1 (x) A^T) vec(rho)
    return np.kron(np.eye(a.shape[0]), a.T)


def liouvillian_parts(h_static, drive_ops, jump_ops):
    """Superoperators of ``-i[H, .] + sum_k D[L_k]`` split into static and pulse-weighted parts."""
    a0 = -1j * (_left(h_static) - _right(h_static))
    for l in jump_ops:
        ld = l.conj().T
        ldl = ld @ l
        a0 = a0 + np.kron(l, l.conj()) - 0.5 * _left(ldl) - 0.5 * _right(ldl)
    terms = [-1j * (_left(s) - _right(s)) for s in drive_ops]
    return a0, terms


def integrate_density(h_static, drive_ops, pulses, jump_ops, rho0, config: EvolutionConfig):
    """RK4 on ``rho`` itself: ``K rho + rho K^dag + sum_k L_k rho L_k^dag`` with ``K = -iH - LdL/2``.

    Same scheme and time grid as :func:`integrate_linear` on the Liouvillian,
    at ``O(d^3)`` instead of ``O(d^4)`` work per stage.
    """
    n, h = config.n_steps, config.step
    coeff = _pulse_grid(pulses, n, h)
    d = h_static.shape[0]
    ldl = sum((l.conj().T @ l for l in jump_ops), np.zeros((d, d), complex))
    k0 = -1j * h_static - 0.5 * ldl
    ks = np.array([-1j * op for op in drive_ops], dtype=complex).reshape(-1, d, d)
    jumps = np.array(jump_ops, dtype=complex).reshape(-1, d, d)
    jumps_dag = jumps.conj().transpose(0, 2, 1)

    def rhs(j, r):
        k = k0 + np.tensordot(coeff[:, j], ks, axes=1) if len(ks) else k0
        out = k @ r + r @ k.conj().T
        if len(jumps):
            out = out + (jumps @ r @ jumps_dag).sum(axis=0)
        return out

    record_steps = _record_steps(config)
    x = np.array(rho0, dtype=complex)
    snaps = [x.copy()] + _rk4_loop(rhs, x, n, h, record_steps)
    return np.array(record_steps) * h, np.array(snaps)


def lindblad_evolve(
    model,
    lindblad: LindbladSet | None,
    initial: np.ndarray,
    config: EvolutionConfig,
    batch: bool | None = None,
    vectorized: bool | None = None,
) -> TrajectoryRecord:
    """Integrate ``drho/dt = -i[H, rho] + sum_k (L rho L^dag - {L^dag L, rho}/2)``.

    A ket is accepted as ``initial`` and turned into its projector.
    ``vectorized`` selects the Liouvillian form (default for small supports)
    over stepping ``rho`` as a matrix; both run the same RK4 scheme.
    """
    space = model.space
    rho0 = np.asarray(initial, dtype=complex)
    if rho0.ndim == 1:
        rho0 = np.outer(rho0, rho0.conj())
    check_density(rho0, 1e-9)
    jumps = [o.op for o in (lindblad.active() if lindblad else [])]
    occupied = np.flatnonzero(np.abs(rho0).sum(axis=1) > 0)
    support = _support_for(model, occupied, jumps)
    idx = np.ix_(support, support)
    d = len(support)
    h0 = np.asarray(model.static)[idx]
    drive_ops = [np.asarray(op)[idx] for _, op in model.drive_terms]
    jumps = [j[idx] for j in jumps]
    pulses = [p for p, _ in model.drive_terms]
    if vectorized is None:
        vectorized = d <= DENSITY_VEC_MAX_DIM
    if vectorized:
        a0, terms = liouvillian_parts(h0, drive_ops, jumps)
        times, snaps = integrate_linear(a0, terms, pulses, rho0[idx].reshape(-1), config, batch)
    else:
        times, snaps = integrate_density(h0, drive_ops, pulses, jumps, rho0[idx], config)

    rhos = snaps.reshape(len(times), d, d)
    rhos = 0.5 * (rhos + rhos.conj().transpose(0, 2, 1))
    states = np.zeros((len(times), space.dim, space.dim), complex)
    states[(slice(None),) + np.ix_(support, support)] = rhos

    traces = np.trace(rhos, axis1=1, axis2=2).real
    drift = float(np.abs(traces - traces[0]).max())
    if not drift <= 1e-5:
        raise IntegrationAccuracyError(f"trace drift {drift:.2e} exceeds 1e-5; increase n_steps")
    min_eig = float(min(np.linalg.eigvalsh(r).min() for r in rhos))
    if min_eig < -1e-6:
        warnings.warn(f"density matrix eigenvalue {min_eig:.2e} < -1e-6", PositivityWarning, stacklevel=2)
    return TrajectoryRecord(
        space, times, states, True, {"trace_drift": drift, "min_eigenvalue": min_eig, "support": d}
    )


# --------------------------------------------------------- jump-operator sets


def spontaneous_emission_set(space: SpaceDescriptor, gamma: float, atom: int = 0) -> LindbladSet:
    """``|4>`` decays to ``|1>`` and ``|2>`` with rate ``gamma/2`` each."""
    from .hilbert import transition_op

    return LindbladSet(
        tuple(
            LindbladOperator(f"|{i}>_{atom + 1}<4|", gamma / 2, transition_op(space, atom, i, 4))
            for i in (1, 2)
        )
    )


def cavity_step_decay_set(
    space: SpaceDescriptor, kappa: float, gamma: float, atoms: Sequence[int] = (0, 1)
) -> LindbladSet:
    """Cavity leakage ``sqrt(kappa) a`` plus ``|3> -> |1>, |2>`` decay at rate ``gamma`` on each atom."""
    from .hilbert import annihilation_op, transition_op

    ops = [LindbladOperator("a", kappa, annihilation_op(space))]
    for k in atoms:
        for j in (1, 2):
            ops.append(LindbladOperator(f"|{j}>_{k + 1}<3|", gamma, transition_op(space, k, j, 3)))
    return LindbladSet(tuple(ops))


# ---------------------------------------------------------------- observables


def populations(record: TrajectoryRecord, labels: Sequence) -> np.ndarray:
    """Shape ``(len(times), len(labels))``."""
    idx = [record.space.index(lab) for lab in labels]
    if record.open_system:
        return np.stack([record.states[:, i, i].real for i in idx], axis=1)
    return np.abs(record.states[:, idx]) ** 2


def fidelity(state: np.ndarray, target: np.ndarray, target_label: str = "") -> FidelityReport:
    """Overlap and population fidelity of ``state`` (ket or density matrix) with a target ket."""
    if state.ndim == 1:
        amp = np.vdot(target, state)
        return FidelityReport(float(amp.real), float(abs(amp) ** 2), target_label)
    pop = np.vdot(target, state @ target)
    return FidelityReport(float(abs(pop)), float(pop.real), target_label)


def step_halving_distance(evolve: Callable[[EvolutionConfig], TrajectoryRecord], config: EvolutionConfig) -> float:
    """Distance between final states at ``n_steps`` and ``2 n_steps``."""
    a = evolve(config).final
    b = evolve(config.refined()).final
    return float(np.linalg.norm(a - b))


# --------------------------------------------------------------------- sweeps


class SweepCellError(RuntimeError):
    def __init__(self, x, y, cause):
        super().__init__(f"cell (x={x}, y={y}) failed: {cause}")
        self.x, self.y, self.cause = x, y, cause


@dataclass(eq=False)
class SweepGrid:
    x: np.ndarray
    y: np.ndarray
    overlap: np.ndarray
    population: np.ndarray
    errors: dict = field(default_factory=dict)


def _run_cell(args):
    factory, x, y, target = args
    try:
        model, initial, config, lindblad = factory(x, y)
        if lindblad is None:
            final = schrodinger_evolve(model, initial, config).final
        else:
            final = lindblad_evolve(model, lindblad, initial, config).final
        rep = fidelity(final, target)
        return rep.fidelity_overlap, rep.fidelity_population, None
    except Exception as exc:  # noqa: BLE001 - reported with coordinates
        return np.nan, np.nan, repr(exc)


def sweep_2d(
    model_factory: Callable,
    x_grid: Sequence[float],
    y_grid: Sequence[float],
    fidelity_target: np.ndarray,
    workers: int = 1,
    raise_errors: bool = True,
) -> SweepGrid:
    """Evaluate ``model_factory(x, y) -> (model, initial, config, lindblad_or_None)`` on a grid.

    Cells are independent; the result does not depend on execution order.  With
    ``workers > 1`` the factory must be picklable.
    """
    x_grid, y_grid = np.asarray(x_grid, float), np.asarray(y_grid, float)
    if not len(x_grid) or not len(y_grid):
        raise ValueError("grids must be non-empty")
    cells = [(model_factory, x, y, fidelity_target) for x in x_grid for y in y_grid]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_cell, cells))
    else:
        results = [_run_cell(c) for c in cells]
    shape = (len(x_grid), len(y_grid))
    overlap = np.array([r[0] for r in results]).reshape(shape)
    pop = np.array([r[1] for r in results]).reshape(shape)
    errors = {(c[1], c[2]): r[2] for c, r in zip(cells, results) if r[2] is not None}
    if errors and raise_errors:
        (x, y), msg = next(iter(errors.items()))
        raise SweepCellError(x, y, msg)
    return SweepGrid(x_grid, y_grid, overlap, pop, errors)
