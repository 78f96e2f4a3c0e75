"""Single-atom phase gate: pulses, populations and the fidelity landscape in eps."""

import math

import numpy as np

from shortcut_gates.dynamics import EvolutionConfig, fidelity, schrodinger_evolve
from shortcut_gates.gates import sweep_pulses
from shortcut_gates.hilbert import SpaceDescriptor, ket
from shortcut_gates.invariant import epsilon_for_phase_condition
from shortcut_gates.models import one_qubit_hamiltonian

space = SpaceDescriptor(1, 0)
t_f = 10.0
target = -ket(space, "1")

pulses = sweep_pulses(0.25, t_f, math.pi)
print(f"peak Rabi frequency at eps=0.25: {pulses.peak:.4f} g")

rec = schrodinger_evolve(one_qubit_hamiltonian(pulses, space), ket(space, "1"), EvolutionConfig(t_f, record_every=2000))
for t, (p1, p2, p4) in zip(rec.times, rec.populations(["1", "2", "4"])):
    print(f"t={t:5.1f}  P1={p1:.4f}  P2={p2:.4f}  P4={p4:.4f}")

print("\n  eps     F(-|1>)")
exact = epsilon_for_phase_condition(math.pi, 2)
for eps in sorted([0.1, 0.2, 0.25, 0.3, 0.5, 1.0, exact]):
    model = one_qubit_hamiltonian(sweep_pulses(eps, t_f, math.pi), space)
    f = fidelity(schrodinger_evolve(model, ket(space, "1"), EvolutionConfig(t_f)).final, target)
    mark = "  <- phase condition" if np.isclose(eps, exact) else ""
    print(f"{eps:7.4f}  {f.fidelity_population:.8f}{mark}")
