"""Basis bookkeeping and linear algebra for N five-level atoms in one cavity mode.

States and operators are plain numpy arrays; the :class:`SpaceDescriptor` they
live on is passed alongside.  Flat indices put atom 1 in the most significant
digit and the photon number in the least significant one, so ``|12>|0>_c`` in a
two-atom, ``n_max = 1`` space sits at index ``(1*5 + 2)*2 + 0 = 14``.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

LEVELS = 5


class RangeError(ValueError):
    """A level, atom or photon index outside the declared space."""


class ShapeError(ValueError):
    """Arrays that do not belong to the same space."""


@dataclass(frozen=True)
class BasisLabel:
    atom_levels: tuple[int, ...]
    photon_number: int = 0

    def __post_init__(self):
        object.__setattr__(self, "atom_levels", tuple(int(l) for l in self.atom_levels))
        object.__setattr__(self, "photon_number", int(self.photon_number))

    @classmethod
    def parse(cls, text: str) -> "BasisLabel":
        """Read labels such as ``"12"``, ``"12,1"`` or ``"|12>|1>_c"``."""
        cleaned = text.strip().replace("_c", "")
        for ch in "|> ":
            cleaned = cleaned.replace(ch, ",")
        parts = [p for p in cleaned.split(",") if p]
        if not parts or not parts[0].isdigit():
            raise ValueError(f"cannot parse basis label {text!r}")
        photon = int(parts[1]) if len(parts) > 1 else 0
        return cls(tuple(int(c) for c in parts[0]), photon)

    def __str__(self) -> str:
        return "|" + "".join(map(str, self.atom_levels)) + f">|{self.photon_number}>_c"


@dataclass(frozen=True)
class SpaceDescriptor:
    n_atoms: int
    photon_cutoff: int = 1

    def __post_init__(self):
        if self.n_atoms < 1:
            raise RangeError("n_atoms must be positive")
        if self.photon_cutoff < 0:
            raise RangeError("photon_cutoff must be non-negative")

    @property
    def levels_per_atom(self) -> int:
        return LEVELS

    @property
    def n_photon_states(self) -> int:
        return self.photon_cutoff + 1

    @property
    def dim(self) -> int:
        return LEVELS**self.n_atoms * self.n_photon_states

    def check_label(self, label: BasisLabel) -> None:
        if len(label.atom_levels) != self.n_atoms:
            raise RangeError(
                f"label {label} has {len(label.atom_levels)} atoms, space has {self.n_atoms}"
            )
        for level in label.atom_levels:
            if not 0 <= level < LEVELS:
                raise RangeError(f"atom level {level} outside 0..{LEVELS - 1}")
        if not 0 <= label.photon_number <= self.photon_cutoff:
            raise RangeError(
                f"photon number {label.photon_number} outside 0..{self.photon_cutoff}"
            )

    def index(self, label: BasisLabel | Sequence[int] | str) -> int:
        label = as_label(label)
        self.check_label(label)
        i = 0
        for level in label.atom_levels:
            i = i * LEVELS + level
        return i * self.n_photon_states + label.photon_number

    def label(self, index: int) -> BasisLabel:
        if not 0 <= index < self.dim:
            raise RangeError(f"index {index} outside 0..{self.dim - 1}")
        index, photons = divmod(index, self.n_photon_states)
        levels = []
        for _ in range(self.n_atoms):
            index, level = divmod(index, LEVELS)
            levels.append(level)
        return BasisLabel(tuple(reversed(levels)), photons)

    @cached_property
    def _level_table(self) -> np.ndarray:
        # (dim, n_atoms) atomic levels and photon numbers for every flat index
        table = np.array(
            list(itertools.product(range(LEVELS), repeat=self.n_atoms)), dtype=int
        )
        return np.repeat(table, self.n_photon_states, axis=0)

    def atom_levels(self) -> np.ndarray:
        return self._level_table

    def photon_numbers(self) -> np.ndarray:
        return np.tile(np.arange(self.n_photon_states), LEVELS**self.n_atoms)

    def labels(self) -> list[BasisLabel]:
        return [self.label(i) for i in range(self.dim)]


def as_label(label) -> BasisLabel:
    if isinstance(label, BasisLabel):
        return label
    if isinstance(label, str):
        return BasisLabel.parse(label)
    return BasisLabel(tuple(label), 0)


def ket(space: SpaceDescriptor, label) -> np.ndarray:
    """Unit vector on ``label``."""
    psi = np.zeros(space.dim, dtype=complex)
    psi[space.index(label)] = 1.0
    return psi


def superposition(space: SpaceDescriptor, terms: dict) -> np.ndarray:
    """Normalized sum of ``{label: amplitude}``."""
    psi = np.zeros(space.dim, dtype=complex)
    for label, amp in terms.items():
        psi[space.index(label)] += amp
    return psi / np.linalg.norm(psi)


def _check_atom(space: SpaceDescriptor, atom: int) -> None:
    if not 0 <= atom < space.n_atoms:
        raise RangeError(f"atom index {atom} outside 0..{space.n_atoms - 1}")


def _check_level(level: int) -> None:
    if not 0 <= level < LEVELS:
        raise RangeError(f"atom level {level} outside 0..{LEVELS - 1}")


def transition_op(space: SpaceDescriptor, atom: int, upper: int, lower: int) -> np.ndarray:
    """``|upper><lower|`` on atom ``atom`` (0-based), identity elsewhere."""
    _check_atom(space, atom)
    _check_level(upper)
    _check_level(lower)
    levels = space.atom_levels()
    cols = np.flatnonzero(levels[:, atom] == lower)
    stride = LEVELS ** (space.n_atoms - 1 - atom) * space.n_photon_states
    rows = cols + (upper - lower) * stride
    op = np.zeros((space.dim, space.dim), dtype=complex)
    op[rows, cols] = 1.0
    return op


def annihilation_op(space: SpaceDescriptor) -> np.ndarray:
    """Cavity ``a`` acting on the photon factor."""
    a = np.diag(np.sqrt(np.arange(1, space.n_photon_states)), k=1).astype(complex)
    return np.kron(np.eye(LEVELS**space.n_atoms), a)


def cavity_coupling_op(space: SpaceDescriptor, atom: int) -> np.ndarray:
    """``a |3><2|`` on atom ``atom``; the Hermitian conjugate is added by the model builder."""
    _check_atom(space, atom)
    if space.photon_cutoff == 0:
        warnings.warn(
            "photon_cutoff=0: cavity coupling operator is identically zero", stacklevel=2
        )
    return transition_op(space, atom, 3, 2) @ annihilation_op(space)


def number_op(space: SpaceDescriptor) -> np.ndarray:
    return np.kron(np.eye(LEVELS**space.n_atoms), np.diag(np.arange(space.n_photon_states)))


def _check_pair(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[0] != b.shape[0]:
        raise ShapeError(f"dimension mismatch: {a.shape} vs {b.shape}")


def inner_product(bra: np.ndarray, ket_: np.ndarray) -> complex:
    _check_pair(bra, ket_)
    return complex(np.vdot(bra, ket_))


def norm(psi: np.ndarray) -> float:
    return float(np.linalg.norm(psi))


def matrix_apply(op: np.ndarray, psi: np.ndarray) -> np.ndarray:
    if op.shape[1] != psi.shape[0]:
        raise ShapeError(f"dimension mismatch: {op.shape} vs {psi.shape}")
    return op @ psi


def expectation(op: np.ndarray, state: np.ndarray) -> complex:
    """``<psi|op|psi>`` for a ket or ``Tr(op rho)`` for a density matrix."""
    if op.shape[1] != state.shape[0]:
        raise ShapeError(f"dimension mismatch: {op.shape} vs {state.shape}")
    if state.ndim == 1:
        return complex(np.vdot(state, op @ state))
    return complex(np.trace(op @ state))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise ShapeError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a @ b - b @ a


def dagger(op: np.ndarray) -> np.ndarray:
    return op.conj().T


def hermiticity_defect(op: np.ndarray) -> float:
    return float(np.abs(op - op.conj().T).max()) if op.size else 0.0


def is_hermitian(op: np.ndarray, atol: float = 1e-12) -> bool:
    return hermiticity_defect(op) < atol


def density_matrix(psi: np.ndarray) -> np.ndarray:
    return np.outer(psi, psi.conj())


def check_density(rho: np.ndarray, atol: float = 1e-7) -> None:
    """Raise ``ValueError`` unless ``rho`` is Hermitian, unit-trace and positive."""
    if hermiticity_defect(rho) > atol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > atol:
        raise ValueError(f"density matrix trace {np.trace(rho).real:.3g} != 1")
    if np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() < -atol:
        raise ValueError("density matrix has negative eigenvalues")


def restrict(op: np.ndarray, support: Iterable[int]) -> np.ndarray:
    idx = np.asarray(list(support))
    return op[np.ix_(idx, idx)]
