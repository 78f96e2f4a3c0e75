"""Acceptance criteria 1-11, each at its stated tolerance and runtime budget.

Every test prints one PASS/FAIL line; the terminal summary repeats them.
Criteria that the model cannot reach are still asserted at full strength.
"""

import csv
import math

import numpy as np
import pytest

import shortcut_gates.cli as cli
import shortcut_gates.dynamics as dynamics
import shortcut_gates.gates as gates
from shortcut_gates.dynamics import (
    EvolutionConfig,
    cavity_step_decay_set,
    fidelity,
    spontaneous_emission_set,
    step_halving_distance,
)
from shortcut_gates.gates import sweep_pulses
from shortcut_gates.hilbert import SpaceDescriptor, ket
from shortcut_gates.invariant import (
    AuxiliaryTrajectory,
    closed_form_final_state,
    invariant_residual,
    lr_phase_quadrature,
    pulses_from_trajectory,
)
from shortcut_gates.models import effective_model, one_qubit_hamiltonian, pair_step_hamiltonian, zeno_reduce

SINGLE = SpaceDescriptor(1, 0)
PAIR = SpaceDescriptor(2, 1)
T_ZENO = 20 * math.sqrt(2)

# oracle regression values (tests/oracle.py)
TWO_FIXED_DIAG = [1.0, 0.999967169818, 0.998176175394, -0.78379834133]
PAIR_OPEN_CLOSED = 0.615066636667658

pytestmark = pytest.mark.filterwarnings("ignore::shortcut_gates.gates.ZenoRegimeWarning")

# diagnostics of every evolution run in this module, for criterion 10
RUNS = {"norm": [], "trace": [], "min_eig": []}


def _recording(fn, open_system):
    def wrapper(*args, **kwargs):
        rec = fn(*args, **kwargs)
        if open_system:
            RUNS["trace"].append(rec.diagnostics["trace_drift"])
            RUNS["min_eig"].append(rec.diagnostics["min_eigenvalue"])
        else:
            RUNS["norm"].append(rec.diagnostics["norm_drift"])
        return rec

    return wrapper


@pytest.fixture(scope="module", autouse=True)
def record_diagnostics():
    s = _recording(dynamics.schrodinger_evolve, False)
    l = _recording(dynamics.lindblad_evolve, True)
    with pytest.MonkeyPatch.context() as mp:
        for mod in (dynamics, gates, cli):
            mp.setattr(mod, "schrodinger_evolve", s)
            mp.setattr(mod, "lindblad_evolve", l)
        yield


def one_qubit_model(eps=0.25, t_f=10.0):
    return one_qubit_hamiltonian(sweep_pulses(eps, t_f, math.pi), SINGLE)


def pair_model(eps=0.25, g=1.0):
    p = sweep_pulses(eps, T_ZENO, math.pi)
    return pair_step_hamiltonian(PAIR, 0, 1, p.first, p.second, g=g)


def test_criterion_01_one_qubit_fixed_angle(criterion):
    c = criterion(1, "one-qubit gate, eps = 0.25, t_f = 10/g", limit_s=1.0)
    rec = dynamics.schrodinger_evolve(one_qubit_model(), ket(SINGLE, "1"), EvolutionConfig(10.0))
    f = fidelity(rec.final, -ket(SINGLE, "1")).fidelity_population
    analytic = abs(closed_form_final_state(AuxiliaryTrajectory(0.25))[1]) ** 2
    c.check(f"population fidelity {f:.6f} >= 0.99", f >= 0.99)
    c.check(f"closed form {analytic:.6f} ~ 0.9990 and matched within 1e-4 ({abs(f - analytic):.1e})",
            abs(f - analytic) < 1e-4 and abs(analytic - 0.9990) < 1e-3)
    c.finish()


def test_criterion_02_one_qubit_exact(criterion):
    c = criterion(2, "one-qubit gate, exact eps = arcsin(0.25)", limit_s=1.0)
    eps = math.asin(0.25)
    rec = dynamics.schrodinger_evolve(one_qubit_model(eps), ket(SINGLE, "1"), EvolutionConfig(10.0))
    dist = float(np.linalg.norm(rec.final + ket(SINGLE, "1")))
    c.check(f"|psi(t_f) + |1>| = {dist:.1e} < 1e-4", dist < 1e-4)
    report = gates.execute_plan(gates.one_qubit_phase_plan(exact=True))
    err = float(np.abs(report.realized_matrix - np.diag([1, -1])).max())
    c.check(f"gate matrix within {err:.1e} < 1e-3 of diag(1, -1)", err < 1e-3)
    c.finish()


def test_criterion_03_lr_phase(criterion):
    c = criterion(3, "LR phase quadrature |alpha| = pi/sin(eps)", limit_s=1.0)
    for eps in (0.1, 0.25, 0.5, 1.0):
        traj = AuxiliaryTrajectory(eps)
        r = lr_phase_quadrature(traj, pulses_from_trajectory(traj))
        err = max(abs(abs(r.alpha_plus) - math.pi / math.sin(eps)), abs(abs(r.alpha_minus) - math.pi / math.sin(eps)))
        c.check(f"eps={eps}: error {err:.1e} < 1e-6", err < 1e-6)
    c.finish()


def test_criterion_04_invariant_defect(criterion):
    c = criterion(4, "invariant defect ||i dI/dt - [H, I]||", limit_s=1.0)
    traj = AuxiliaryTrajectory(0.25)
    pulses = pulses_from_trajectory(traj)
    worst = max(invariant_residual(traj, pulses, t) for t in np.linspace(0, traj.t_f, 100))
    c.check(f"max defect over 100 times {worst:.1e} < 1e-10", worst < 1e-10)
    c.finish()


def test_criterion_05_open_one_qubit(criterion):
    c = criterion(5, "open one-qubit gate, gamma in [0, 0.1 g], 30 points", limit_s=30.0)
    gammas = np.linspace(0.0, 0.1, 30)
    fids = []
    for gamma in gammas:
        rec = dynamics.lindblad_evolve(
            one_qubit_model(), spontaneous_emission_set(SINGLE, gamma), ket(SINGLE, "1"), EvolutionConfig(10.0)
        )
        fids.append(fidelity(rec.final, -ket(SINGLE, "1")).fidelity_overlap)
    fids = np.array(fids)
    bad = gammas[fids < 0.997]
    c.check(
        f"F >= 0.997 at every point (min {fids.min():.5f} at gamma={gammas[fids.argmin()]:.3f}; "
        f"{len(bad)} of 30 points below, from gamma={bad.min() if len(bad) else float('nan'):.4f})",
        fids.min() >= 0.997,
    )
    c.check("F decreases with gamma", np.all(np.diff(fids) < 0))
    c.finish()


def test_criterion_06_zeno_reduction(criterion):
    c = criterion(6, "Zeno reduction of the cavity-assisted step", limit_s=10.0)
    model = pair_model()
    z = zeno_reduce(model, "12")
    mu = (-ket(PAIR, "32") + ket(PAIR, "23")) / math.sqrt(2)
    overlap = np.vdot(mu, z.bright_state)
    c.check(f"bright state = (-phi2 + phi4)/sqrt2 ({abs(abs(overlap) - 1):.1e})", abs(abs(overlap) - 1) < 1e-10)
    p = sweep_pulses(0.25, T_ZENO, math.pi)
    coupling_err = 0.0
    for t in np.linspace(0, T_ZENO, 50):
        h = z.reduced_hamiltonian(t) * overlap
        coupling_err = max(
            coupling_err,
            abs(h[0, 2] + p.first(t) / math.sqrt(2)),
            abs(h[1, 2] - p.second(t) / math.sqrt(2)),
            abs(h[0, 1]),
        )
    c.check(f"couplings -Omega1/sqrt2, Omega2/sqrt2 within {coupling_err:.1e} < 1e-10", coupling_err < 1e-10)

    infid = []
    for ratio in (5, 10, 20):
        m = pair_model(g=ratio * p.peak)
        cfg = EvolutionConfig(T_ZENO, 40000)
        full = dynamics.schrodinger_evolve(m, ket(PAIR, "12"), cfg).final
        eff = dynamics.schrodinger_evolve(effective_model(m), ket(PAIR, "12"), cfg).final
        infid.append(1 - abs(np.vdot(eff, full)) ** 2)
    c.check(
        "full-vs-effective infidelity strictly decreasing over g/Omega_max = 5, 10, 20 ("
        + ", ".join(f"{v:.2e}" for v in infid) + ")",
        infid[0] > infid[1] > infid[2],
    )
    c.finish()


def test_criterion_07_two_qubit(criterion):
    c = criterion(7, "two-qubit CZ, fixed angle vs exact angle", limit_s=60.0)
    fixed = gates.execute_plan(gates.two_qubit_cz_plan())
    exact = gates.execute_plan(gates.two_qubit_cz_plan(exact=True))
    fids = fixed.state_fidelity
    c.check(
        "fixed-angle per-state population fidelity >= 0.95 (" + ", ".join(f"{f:.4f}" for f in fids) + ")",
        fids.min() >= 0.95,
    )
    c.check(f"|11> phase within 0.15 rad of pi (error {fixed.phase_error():.2e})", fixed.phase_error() < 0.15)
    diag_err = float(np.abs(np.diag(fixed.realized_matrix).real - TWO_FIXED_DIAG).max())
    c.check(f"oracle regression diagonal within {diag_err:.1e}", diag_err < 1e-7)
    c.check(
        f"exact mode strictly improves the |11> phase error ({exact.phase_error():.2e} vs {fixed.phase_error():.2e}; "
        f"amplitude error {abs(exact.realized_matrix[3, 3] + 1):.4f} vs {abs(fixed.realized_matrix[3, 3] + 1):.4f})",
        exact.phase_error() < fixed.phase_error(),
    )
    c.finish()


def _fig5_finals(tmp_path, figure):
    out = tmp_path / f"{figure}.csv"
    code = cli.run(["figure", figure, "--out", str(out), "--no-timestamp"])
    assert code == cli.EXIT_OK
    with open(out, encoding="utf-8") as fh:
        rows = list(csv.reader(l for l in fh if not l.startswith("#")))[1:]
    finals = {}
    for row in rows:
        finals[float(row[0])] = float(row[2])  # rows run forward in time per rate
    rates = np.array(sorted(finals))
    return rates, np.array([finals[r] for r in rates])


def test_criterion_08_open_two_qubit_step(criterion, tmp_path):
    c = criterion(8, "cavity-assisted step with cavity/atomic decay", limit_s=300.0)
    kappas, f_kappa = _fig5_finals(tmp_path, "fig5a")
    gammas, f_gamma = _fig5_finals(tmp_path, "fig5b")
    c.check("30 x 30 sweeps", len(kappas) == 30 and len(gammas) == 30)
    c.check("F(t_f) decreasing in kappa over [0, 0.1 g]", np.all(np.diff(f_kappa) < 0))
    c.check("F(t_f) decreasing in gamma over [0, 0.1 g]", np.all(np.diff(f_gamma) < 0))
    closed = dynamics.schrodinger_evolve(pair_model(), ket(PAIR, "12"), EvolutionConfig(T_ZENO)).final
    f_closed = fidelity(closed, -ket(PAIR, "12")).fidelity_population
    c.check(
        f"kappa = gamma = 0 equals closed value {f_closed:.9f} ({abs(f_kappa[0] - f_closed):.1e} < 1e-6)",
        abs(f_kappa[0] - f_closed) < 1e-6 and abs(f_gamma[0] - f_closed) < 1e-6,
    )
    c.check(f"closed value matches oracle {PAIR_OPEN_CLOSED:.9f}", abs(f_closed - PAIR_OPEN_CLOSED) < 1e-8)
    rec = dynamics.lindblad_evolve(
        pair_model(), cavity_step_decay_set(PAIR, 3.5 / 750, 2.62 / 750), ket(PAIR, "12"), EvolutionConfig(T_ZENO)
    )
    f_cited = fidelity(rec.final, -ket(PAIR, "12")).fidelity_overlap
    c.check(f"F at (kappa, gamma) = (3.5, 2.62)/750 g is {f_cited:.5f} >= 0.99", f_cited >= 0.99)
    c.finish()


def test_criterion_09_three_qubit(criterion):
    c = criterion(9, "three-qubit CCZ, exact mode, dimension 250", limit_s=600.0)
    r = gates.execute_plan(gates.three_qubit_ccz_plan(exact=True))
    m = r.realized_matrix
    phases = np.angle(np.diag(m))
    sign_ok = abs(abs(phases[-1]) - math.pi) < 0.15 and np.all(np.abs(phases[:-1]) < 0.15)
    c.check("-1 phase only on |111> (phases " + ", ".join(f"{p:.3f}" for p in phases) + ")", sign_ok)
    c.check(
        "per-state population fidelity >= 0.95 (" + ", ".join(f"{f:.3f}" for f in r.state_fidelity) + ")",
        r.state_fidelity.min() >= 0.95,
    )
    c.check(f"step-boundary excitation/photon population {r.max_boundary_population:.2e} < 1e-3",
            r.max_boundary_population < 1e-3)
    c.finish()


def test_criterion_11_tf_independence(criterion):
    c = criterion(11, "one-qubit fidelity independent of t_f", limit_s=5.0)
    fids = []
    for t_f in (5.0, 10.0, 20.0, 50.0):
        rec = dynamics.schrodinger_evolve(one_qubit_model(0.25, t_f), ket(SINGLE, "1"), EvolutionConfig(t_f))
        fids.append(fidelity(rec.final, -ket(SINGLE, "1")).fidelity_population)
    spread = max(fids) - min(fids)
    c.check(f"spread over g t_f = 5, 10, 20, 50 is {spread:.1e} < 1e-6", spread < 1e-6)
    c.finish()


def test_criterion_10_conservation(criterion):
    # runs last in this module so it sees every recorded evolution
    c = criterion(10, "conservation and step-halving suite")
    halving = {
        "one-qubit": step_halving_distance(
            lambda cfg: dynamics.schrodinger_evolve(one_qubit_model(), ket(SINGLE, "1"), cfg), EvolutionConfig(10.0)
        ),
        "cavity step": step_halving_distance(
            lambda cfg: dynamics.schrodinger_evolve(pair_model(), ket(PAIR, "12"), cfg), EvolutionConfig(T_ZENO)
        ),
        "open one-qubit": step_halving_distance(
            lambda cfg: dynamics.lindblad_evolve(
                one_qubit_model(), spontaneous_emission_set(SINGLE, 0.1), ket(SINGLE, "1"), cfg
            ),
            EvolutionConfig(10.0),
        ),
        "open cavity step": step_halving_distance(
            lambda cfg: dynamics.lindblad_evolve(
                pair_model(), cavity_step_decay_set(PAIR, 0.1, 0.1), ket(PAIR, "12"), cfg
            ),
            EvolutionConfig(T_ZENO),
        ),
    }
    norm, trace, eig = RUNS["norm"], RUNS["trace"], RUNS["min_eig"]
    c.check(f"closed norm drift max {max(norm):.1e} < 1e-9 over {len(norm)} runs", max(norm) < 1e-9)
    c.check(f"open trace drift max {max(trace):.1e} < 1e-7 over {len(trace)} runs", max(trace) < 1e-7)
    c.check(f"open min eigenvalue {min(eig):.1e} > -1e-6", min(eig) > -1e-6)
    for name, d in halving.items():
        c.check(f"step halving {name} {d:.1e} < 1e-8", d < 1e-8)
    c.finish()
