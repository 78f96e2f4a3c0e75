"""Lewis-Riesenfeld invariant machinery for the three-level {|1>, |2>, |4>} drive.

The invariant family is parameterized by two angles, a constant ``gamma = epsilon``
and an affine ``beta(t)``.  Pulses come from inverting the auxiliary equations,
the LR phases are integrated numerically, and :func:`epsilon_for_phase_condition`
picks the angle that makes the accumulated phase a multiple of ``2 pi``.

Units: hbar = 1, frequencies in units of g, times in units of 1/g.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .hilbert import SpaceDescriptor, commutator, transition_op


class ParameterError(ValueError):
    pass


class QuadratureError(RuntimeError):
    def __init__(self, message: str, estimate: float):
        super().__init__(message)
        self.estimate = estimate


class UnsupportedTrajectoryError(ValueError):
    pass


class NoSolutionError(ValueError):
    pass


SINGLE_ATOM = SpaceDescriptor(1, 0)


@dataclass(frozen=True)
class AuxiliaryTrajectory:
    """Constant ``gamma = epsilon`` and ``beta`` sweeping linearly over ``[0, t_f]``."""

    epsilon: float
    beta_start: float = 0.0
    beta_end: float = math.pi
    t_f: float = 10.0
    chi: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.epsilon < math.pi / 2:
            raise ParameterError(f"epsilon={self.epsilon} must lie in (0, pi/2)")
        if self.t_f <= 0:
            raise ParameterError("t_f must be positive")

    @property
    def delta_beta(self) -> float:
        return self.beta_end - self.beta_start

    @property
    def beta_dot(self) -> float:
        return self.delta_beta / self.t_f

    gamma_dot = 0.0

    def beta(self, t):
        return self.beta_start + self.beta_dot * np.asarray(t, dtype=float)

    def gamma(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.epsilon)


@dataclass(frozen=True)
class PulseComponent:
    """One Rabi frequency ``amplitude * sin(phase0 + rate * t)``, picklable."""

    amplitude: float
    rate: float
    phase0: float

    def __call__(self, t):
        return self.amplitude * np.sin(self.phase0 + self.rate * np.asarray(t, dtype=float))


@dataclass(frozen=True)
class PulsePair:
    """Closed-form (Omega_1, Omega_2) schedule.

    ``omega1 = A sin(beta(t))`` drives ``|1> <-> |4>`` and ``omega2 = A cos(beta(t))``
    drives ``|2> <-> |4>`` with ``A = beta_dot * cot(epsilon)``.  ``swapped`` exchanges
    the two roles, which is how the inverse transfer ``|2> -> -|1>`` is driven.
    """

    t_f: float
    amplitude: float
    beta_start: float
    beta_rate: float
    swapped: bool = False

    def _sin(self) -> PulseComponent:
        return PulseComponent(self.amplitude, self.beta_rate, self.beta_start)

    def _cos(self) -> PulseComponent:
        return PulseComponent(self.amplitude, self.beta_rate, self.beta_start + math.pi / 2)

    @property
    def first(self) -> PulseComponent:
        return self._cos() if self.swapped else self._sin()

    @property
    def second(self) -> PulseComponent:
        return self._sin() if self.swapped else self._cos()

    def omega1(self, t):
        return self.first(t)

    def omega2(self, t):
        return self.second(t)

    def __call__(self, t):
        return self.omega1(t), self.omega2(t)

    def swap(self) -> "PulsePair":
        return PulsePair(self.t_f, self.amplitude, self.beta_start, self.beta_rate, not self.swapped)

    def scaled(self, factor: float) -> "PulsePair":
        return PulsePair(self.t_f, self.amplitude * factor, self.beta_start, self.beta_rate, self.swapped)

    @property
    def peak(self) -> float:
        return abs(self.amplitude)

    def sample(self, n: int = 1001) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        t = np.linspace(0.0, self.t_f, n)
        return t, self.omega1(t), self.omega2(t)


def pulses_from_trajectory(traj: AuxiliaryTrajectory) -> PulsePair:
    """Invert the auxiliary equations for constant gamma.

    With ``gamma_dot = 0`` the general inversion
    ``Omega_1 = beta_dot cot(gamma) sin(beta) + gamma_dot cos(beta)`` and
    ``Omega_2 = beta_dot cot(gamma) cos(beta) - gamma_dot sin(beta)`` reduces to
    a sine/cosine pair of amplitude ``beta_dot cot(epsilon)``.
    """
    if not 0.0 < traj.epsilon < math.pi / 2:
        raise ParameterError(f"epsilon={traj.epsilon} must lie in (0, pi/2)")
    amplitude = traj.beta_dot / math.tan(traj.epsilon)
    return PulsePair(traj.t_f, amplitude, traj.beta_start, traj.beta_dot)


def _embed(space: SpaceDescriptor, atom: int):
    def op(u, l):
        return transition_op(space, atom, u, l)

    return op


def _invariant_core(traj, t, space, atom):
    op = _embed(space, atom)
    g = float(traj.gamma(t))
    b = float(traj.beta(t))
    m = traj.chi * (
        math.cos(g) * math.sin(b) * op(4, 1)
        + math.cos(g) * math.cos(b) * op(4, 2)
        + 1j * math.sin(g) * op(2, 1)
    )
    return m + m.conj().T


def invariant_matrix(
    traj: AuxiliaryTrajectory, t: float, space: SpaceDescriptor = SINGLE_ATOM, atom: int = 0
) -> np.ndarray:
    return _invariant_core(traj, t, space, atom)


def invariant_time_derivative(
    traj: AuxiliaryTrajectory, t: float, space: SpaceDescriptor = SINGLE_ATOM, atom: int = 0
) -> np.ndarray:
    op = _embed(space, atom)
    g = float(traj.gamma(t))
    b = float(traj.beta(t))
    d_beta = traj.chi * traj.beta_dot * (
        math.cos(g) * math.cos(b) * op(4, 1) - math.cos(g) * math.sin(b) * op(4, 2)
    )
    d_gamma = traj.chi * traj.gamma_dot * (
        -math.sin(g) * math.sin(b) * op(4, 1)
        - math.sin(g) * math.cos(b) * op(4, 2)
        + 1j * math.cos(g) * op(2, 1)
    )
    m = d_beta + d_gamma
    return m + m.conj().T


def drive_matrix(pulses, t: float, space: SpaceDescriptor = SINGLE_ATOM, atom: int = 0) -> np.ndarray:
    """``Omega_1 |4><1| + Omega_2 |4><2| + h.c.`` at time ``t``."""
    op = _embed(space, atom)
    m = float(pulses.omega1(t)) * op(4, 1) + float(pulses.omega2(t)) * op(4, 2)
    return m + m.conj().T


def invariant_residual(traj: AuxiliaryTrajectory, pulses, t: float) -> float:
    """Max-entry norm of ``i dI/dt - [H, I]``; zero when the pulses match the trajectory."""
    inv = invariant_matrix(traj, t)
    dinv = invariant_time_derivative(traj, t)
    ham = drive_matrix(pulses, t)
    return float(np.abs(1j * dinv - commutator(ham, inv)).max())


def _eigvecs(g: float, b: float):
    cg, sg, cb, sb = math.cos(g), math.sin(g), math.cos(b), math.sin(b)
    r = 1 / math.sqrt(2)
    phi0 = np.zeros(5, complex)
    phi0[[1, 2, 4]] = [cg * cb, -cg * sb, -1j * sg]
    out = [phi0]
    for s in (+1, -1):
        v = np.zeros(5, complex)
        v[[1, 2, 4]] = [r * (sg * cb + s * 1j * sb), -r * (sg * sb - s * 1j * cb), r * 1j * cg]
        out.append(v)
    return out


def _eigvec_beta_derivatives(g: float, b: float):
    cg, sg, cb, sb = math.cos(g), math.sin(g), math.cos(b), math.sin(b)
    r = 1 / math.sqrt(2)
    d0 = np.zeros(5, complex)
    d0[[1, 2]] = [-cg * sb, -cg * cb]
    out = [d0]
    for s in (+1, -1):
        v = np.zeros(5, complex)
        v[[1, 2]] = [r * (-sg * sb + s * 1j * cb), -r * (sg * cb + s * 1j * sb)]
        out.append(v)
    return out


def _eigvec_gamma_derivatives(g: float, b: float):
    cg, sg, cb, sb = math.cos(g), math.sin(g), math.cos(b), math.sin(b)
    r = 1 / math.sqrt(2)
    d0 = np.zeros(5, complex)
    d0[[1, 2, 4]] = [-sg * cb, sg * sb, -1j * cg]
    dpm = np.zeros(5, complex)
    dpm[[1, 2, 4]] = [r * cg * cb, -r * cg * sb, -r * 1j * sg]
    return [d0, dpm, dpm.copy()]


def invariant_eigenstates(traj: AuxiliaryTrajectory, t: float):
    """``(Phi_0, Phi_plus, Phi_minus)`` with eigenvalues ``0, +chi, -chi``."""
    return tuple(_eigvecs(float(traj.gamma(t)), float(traj.beta(t))))


@dataclass(frozen=True)
class LRPhaseResult:
    alpha_plus: float
    alpha_minus: float
    alpha_zero: float
    error_estimate: float


def lr_phase_integrands(traj: AuxiliaryTrajectory, pulses, t: np.ndarray) -> np.ndarray:
    """``<Phi_n| i d/dt - H |Phi_n>`` for n = 0, +, - on the grid ``t``; shape (3, len(t))."""
    out = np.empty((3, len(t)))
    for j, tj in enumerate(t):
        g, b = float(traj.gamma(tj)), float(traj.beta(tj))
        vecs = _eigvecs(g, b)
        dvecs = [
            traj.beta_dot * db + traj.gamma_dot * dg
            for db, dg in zip(_eigvec_beta_derivatives(g, b), _eigvec_gamma_derivatives(g, b))
        ]
        ham = drive_matrix(pulses, tj)
        for n in range(3):
            val = 1j * np.vdot(vecs[n], dvecs[n]) - np.vdot(vecs[n], ham @ vecs[n])
            out[n, j] = val.real
    return out


def lr_phase_quadrature(
    traj: AuxiliaryTrajectory,
    pulses,
    n_points: int = 129,
    tol: float = 1e-8,
    max_points: int = 64001,
) -> LRPhaseResult:
    """Composite Simpson over ``[0, t_f]`` with step halving until two estimates agree to ``tol``."""
    n = n_points if n_points % 2 else n_points + 1

    def integrate(npts):
        t = np.linspace(0.0, traj.t_f, npts)
        return simpson(lr_phase_integrands(traj, pulses, t), x=t, axis=1)

    coarse = integrate(n)
    while True:
        fine_n = 2 * n - 1
        fine = integrate(fine_n)
        err = float(np.abs(fine - coarse).max())
        if err < tol:
            return LRPhaseResult(float(fine[1]), float(fine[2]), float(fine[0]), err)
        if fine_n >= max_points:
            raise QuadratureError(
                f"LR phase quadrature not converged ({err:.2e} > {tol:.0e})", float(fine[1])
            )
        n, coarse = fine_n, fine


def closed_form_final_state(traj: AuxiliaryTrajectory) -> np.ndarray:
    """Final single-atom state for initial ``|1>`` after a full sweep, with alpha = pi / sin(eps)."""
    if not math.isclose(traj.delta_beta, math.pi, rel_tol=1e-12) or traj.beta_start != 0.0:
        raise UnsupportedTrajectoryError("closed form only holds for beta: 0 -> pi")
    e = traj.epsilon
    alpha = math.pi / math.sin(e)
    s, c = math.sin(e), math.cos(e)
    psi = np.zeros(5, complex)
    psi[1] = -(c**2) - s**2 * math.cos(alpha)
    psi[4] = -1j * s * c + 1j * s * c * math.cos(alpha)
    psi[2] = -s * math.sin(alpha)
    return psi


def epsilon_for_phase_condition(delta_beta: float, n: int = 1, zeno_scale: float = 1.0) -> float:
    """Angle giving an accumulated LR phase of exactly ``2 pi n``.

    ``zeno_scale`` divides the effective cot(epsilon); pass ``sqrt(2)`` for drives
    that act through the Zeno-reduced Hamiltonian, whose couplings carry 1/sqrt(2).
    """
    if n < 1:
        raise ParameterError("n must be a positive integer")
    if zeno_scale < 1:
        raise ParameterError("zeno_scale must be >= 1")
    ratio = delta_beta / (2 * math.pi * n)
    if not 0 < ratio < 1:
        raise NoSolutionError(f"delta_beta/(2 pi n) = {ratio:.3g} has no solution")
    eps_eff = math.asin(ratio)
    return math.atan(math.tan(eps_eff) / zeno_scale)
