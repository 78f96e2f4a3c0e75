"""Time-dependent Hamiltonians for each protocol step, plus Zeno reduction.

Every model has the form ``H(t) = H_cav + sum_k Omega_k(t) (T_k + T_k^dag)`` where
``H_cav = g sum_atoms (a |3><2| + h.c.)`` is static.  The dynamics module only uses
``space``, ``static`` and ``drive_terms``, so effective (projected) Hamiltonians
plug into the same integrators.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .hilbert import (
    BasisLabel,
    SpaceDescriptor,
    as_label,
    cavity_coupling_op,
    ket,
    transition_op,
)

ALLOWED_TRANSITIONS = {(1, 4), (2, 4), (1, 3), (0, 3)}
ZERO_TOL = 1e-9


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class DriveSpec:
    atom: int
    lower: int
    upper: int
    pulse: Callable

    def __post_init__(self):
        if (self.lower, self.upper) not in ALLOWED_TRANSITIONS:
            raise ModelError(f"transition |{self.lower}> -> |{self.upper}> is not laser driven")


@dataclass(frozen=True)
class CouplingSpec:
    atom: int
    g: float = 1.0


def _frozen(m: np.ndarray) -> np.ndarray:
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class HamiltonianModel:
    space: SpaceDescriptor
    drives: tuple[DriveSpec, ...] = ()
    couplings: tuple[CouplingSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "drives", tuple(self.drives))
        object.__setattr__(self, "couplings", tuple(self.couplings))
        for d in self.drives:
            if not 0 <= d.atom < self.space.n_atoms:
                raise ModelError(f"drive on atom {d.atom} outside the space")
        for c in self.couplings:
            if not 0 <= c.atom < self.space.n_atoms:
                raise ModelError(f"coupling on atom {c.atom} outside the space")

    @cached_property
    def static(self) -> np.ndarray:
        h = np.zeros((self.space.dim, self.space.dim), complex)
        for c in self.couplings:
            op = c.g * cavity_coupling_op(self.space, c.atom)
            h += op + op.conj().T
        return _frozen(h)

    @cached_property
    def drive_terms(self) -> tuple[tuple[Callable, np.ndarray], ...]:
        terms = []
        for d in self.drives:
            op = transition_op(self.space, d.atom, d.upper, d.lower)
            terms.append((d.pulse, _frozen(op + op.conj().T)))
        return tuple(terms)

    def drive_part(self, t: float) -> np.ndarray:
        h = np.zeros((self.space.dim, self.space.dim), complex)
        for pulse, op in self.drive_terms:
            h += float(pulse(t)) * op
        return h

    def evaluate(self, t: float) -> np.ndarray:
        return self.static + self.drive_part(t)

    def with_coupling(self, g: float) -> "HamiltonianModel":
        return HamiltonianModel(
            self.space, self.drives, tuple(CouplingSpec(c.atom, g) for c in self.couplings)
        )


@dataclass(frozen=True, eq=False)
class EffectiveHamiltonian:
    """Drive terms projected onto the zero-eigenspace of the cavity coupling."""

    space: SpaceDescriptor
    projector: np.ndarray
    drive_terms: tuple[tuple[Callable, np.ndarray], ...]

    @cached_property
    def static(self) -> np.ndarray:
        return _frozen(np.zeros((self.space.dim, self.space.dim), complex))

    def evaluate(self, t: float) -> np.ndarray:
        h = np.zeros((self.space.dim, self.space.dim), complex)
        for pulse, op in self.drive_terms:
            h += float(pulse(t)) * op
        return h


def _all_cavity_couplings(space: SpaceDescriptor, g: float) -> tuple[CouplingSpec, ...]:
    if space.photon_cutoff == 0:
        return ()
    return tuple(CouplingSpec(k, g) for k in range(space.n_atoms))


def one_qubit_hamiltonian(pulses, space: SpaceDescriptor | None = None, atom: int = 0) -> HamiltonianModel:
    """``Omega_1 |4><1| + Omega_2 |4><2| + h.c.`` with no cavity coupling."""
    space = space or SpaceDescriptor(1, 0)
    return HamiltonianModel(
        space,
        (DriveSpec(atom, 1, 4, pulses.first), DriveSpec(atom, 2, 4, pulses.second)),
    )


def transfer_hamiltonian(space: SpaceDescriptor, atom: int, pulses, g: float = 1.0) -> HamiltonianModel:
    """Single-atom ``|1>,|2> <-> |4>`` drive inside the multi-atom cavity."""
    return HamiltonianModel(
        space,
        (DriveSpec(atom, 1, 4, pulses.first), DriveSpec(atom, 2, 4, pulses.second)),
        _all_cavity_couplings(space, g),
    )


def zeno_step_hamiltonian(
    space: SpaceDescriptor,
    driven: Sequence[tuple[int, Callable]],
    driven_lower_level: int,
    g: float = 1.0,
) -> HamiltonianModel:
    """Drives ``|lower> -> |3>`` on the listed atoms plus cavity coupling on every atom."""
    if space.photon_cutoff < 1:
        raise ModelError("cavity-assisted steps need photon_cutoff >= 1")
    atoms = [a for a, _ in driven]
    if len(set(atoms)) != len(atoms):
        raise ModelError("each atom may be driven once per step")
    drives = tuple(DriveSpec(a, driven_lower_level, 3, p) for a, p in driven)
    return HamiltonianModel(space, drives, _all_cavity_couplings(space, g))


def pair_step_hamiltonian(
    space: SpaceDescriptor,
    atom_a: int,
    atom_b: int,
    pulse_a: Callable,
    pulse_b: Callable,
    driven_lower_level: int = 1,
    g: float = 1.0,
) -> HamiltonianModel:
    if atom_a == atom_b:
        raise ModelError("pair step needs two distinct atoms")
    return zeno_step_hamiltonian(space, [(atom_a, pulse_a), (atom_b, pulse_b)], driven_lower_level, g)


def conserved_charge(space: SpaceDescriptor) -> np.ndarray:
    """Diagonal ``sum_k [level_k in {0,1,3}] + n``, conserved by the cavity-assisted steps."""
    levels = space.atom_levels()
    q = np.isin(levels, (0, 1, 3)).sum(axis=1) + space.photon_numbers()
    return np.diag(q.astype(float))


def adjacency(model, extra: Sequence[np.ndarray] = ()) -> np.ndarray:
    pattern = np.abs(model.static) > 0
    for _, op in model.drive_terms:
        pattern |= np.abs(op) > 0
    for op in extra:
        pattern |= np.abs(op) > 0
    return pattern


def reachable(model, start: Sequence[int], extra: Sequence[np.ndarray] = ()) -> list[int]:
    """Flat indices connected to ``start`` by any term, in breadth-first order."""
    adj = adjacency(model, extra)
    seen = list(dict.fromkeys(int(i) for i in start))
    visited = set(seen)
    queue = deque(seen)
    while queue:
        i = queue.popleft()
        for j in np.flatnonzero(adj[:, i]):
            if j not in visited:
                visited.add(int(j))
                seen.append(int(j))
                queue.append(int(j))
    return seen


def _is_ground(label: BasisLabel) -> bool:
    return label.photon_number == 0 and all(l <= 2 for l in label.atom_levels)


def _gram_schmidt(vectors: Sequence[np.ndarray], tol: float = 1e-8) -> list[np.ndarray]:
    basis: list[np.ndarray] = []
    for v in vectors:
        w = v.astype(complex).copy()
        for b in basis:
            w -= np.vdot(b, w) * b
        n = np.linalg.norm(w)
        if n > tol:
            basis.append(w / n)
    return basis


def kernel_projector(h: np.ndarray, tol: float = ZERO_TOL) -> np.ndarray:
    vals, vecs = np.linalg.eigh(h)
    k = vecs[:, np.abs(vals) < tol]
    return k @ k.conj().T


def effective_model(model: HamiltonianModel, tol: float = ZERO_TOL) -> EffectiveHamiltonian:
    """Quantum-Zeno limit of ``model``: drives sandwiched by the cavity-coupling kernel projector."""
    p = kernel_projector(np.asarray(model.static), tol)
    terms = tuple((pulse, _frozen(p @ op @ p)) for pulse, op in model.drive_terms)
    return EffectiveHamiltonian(model.space, _frozen(p), terms)


@dataclass(frozen=True, eq=False)
class ZenoReduction:
    """Reachable sector of one initial state and its Zeno-limited dynamics.

    ``subspace_basis`` lists the sector in breadth-first order from the initial
    state (for ``|12>|0>_c`` under the pair step this is ``phi_1 .. phi_5``).
    ``reduced_basis`` holds the slow ground states followed by the excited
    zero modes of the coupling; ``bright_state`` is the first of those modes.
    """

    space: SpaceDescriptor
    subspace_basis: tuple[BasisLabel, ...]
    slow_states: tuple[BasisLabel, ...]
    excited_zero_modes: tuple[np.ndarray, ...]
    reduced_basis: np.ndarray
    model: HamiltonianModel
    frozen: bool
    diagnostics: tuple[str, ...] = field(default=())

    @property
    def bright_state(self) -> np.ndarray | None:
        return self.excited_zero_modes[0] if self.excited_zero_modes else None

    def subspace_kets(self) -> list[np.ndarray]:
        return [ket(self.space, lab) for lab in self.subspace_basis]

    def reduced_hamiltonian(self, t: float) -> np.ndarray:
        b = self.reduced_basis
        if self.frozen:
            return np.zeros((b.shape[1], b.shape[1]), complex)
        return b.conj().T @ self.model.drive_part(t) @ b

    def effective_hamiltonian(self, t: float) -> np.ndarray:
        """Reduced Hamiltonian embedded back into the full space."""
        b = self.reduced_basis
        return b @ self.reduced_hamiltonian(t) @ b.conj().T


def zeno_reduce(model: HamiltonianModel, initial_label, tol: float = ZERO_TOL) -> ZenoReduction:
    space = model.space
    label = as_label(initial_label)
    order = reachable(model, [space.index(label)])
    labels = tuple(space.label(i) for i in order)
    h_cav = np.asarray(model.static)[np.ix_(order, order)]
    vals, vecs = np.linalg.eigh(h_cav)
    kernel = vecs[:, np.abs(vals) < tol]
    proj = kernel @ kernel.conj().T

    slow_pos = [p for p, lab in enumerate(labels) if _is_ground(lab)]
    slow = tuple(labels[p] for p in slow_pos)
    for p in slow_pos:
        e = np.zeros(len(order))
        e[p] = 1.0
        proj -= np.outer(e, e)

    # deterministic orthonormalization in flat-index order
    by_index = sorted(range(len(order)), key=lambda p: order[p])
    candidates = [proj[:, p] for p in by_index]
    modes_local = _gram_schmidt(candidates)

    modes = []
    for m in modes_local:
        full = np.zeros(space.dim, complex)
        full[order] = m
        modes.append(full)

    cols = [ket(space, lab) for lab in slow] + modes
    basis = np.column_stack(cols) if cols else np.zeros((space.dim, 0), complex)
    diagnostics = []
    frozen = not modes
    if frozen:
        diagnostics.append(
            f"no excited zero mode reachable from {label}: effective Hamiltonian is zero"
        )
    return ZenoReduction(
        space, labels, slow, tuple(modes), basis, model, frozen, tuple(diagnostics)
    )


def dark_state(model: HamiltonianModel, initial_label, t: float | None = None, omega: float | None = None) -> np.ndarray:
    """Normalized ``g |phi_1> - Omega |phi_3>`` for a single driven atom.

    ``phi_1`` is the initial label and ``phi_3`` has the driven atom moved to
    ``|2>`` with one extra photon.  ``omega`` overrides the pulse value at ``t``.
    """
    space = model.space
    label = as_label(initial_label)
    space.check_label(label)
    matches = [d for d in model.drives if label.atom_levels[d.atom] == d.lower]
    if len(matches) != 1:
        raise ModelError(f"{label} must have exactly one driven atom, found {len(matches)}")
    drive = matches[0]
    if omega is None:
        if t is None:
            raise ModelError("pass a time or an explicit pulse value")
        omega = float(drive.pulse(t))
    g = next((c.g for c in model.couplings if c.atom == drive.atom), 0.0)
    if g == 0 and omega == 0:
        raise ModelError("dark state undefined when g and Omega both vanish")
    levels = list(label.atom_levels)
    levels[drive.atom] = 2
    phi3 = BasisLabel(tuple(levels), label.photon_number + 1)
    psi = g * ket(space, label) - omega * ket(space, phi3)
    return psi / np.linalg.norm(psi)
