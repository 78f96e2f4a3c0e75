"""How fast the cavity-assisted step approaches its Zeno-limited dynamics as g grows."""

import math
import warnings

import numpy as np

from shortcut_gates.dynamics import EvolutionConfig, schrodinger_evolve
from shortcut_gates.gates import ZenoRegimeWarning, sweep_pulses
from shortcut_gates.hilbert import SpaceDescriptor, ket
from shortcut_gates.invariant import epsilon_for_phase_condition
from shortcut_gates.models import effective_model, pair_step_hamiltonian, zeno_reduce

warnings.simplefilter("ignore", ZenoRegimeWarning)
space = SpaceDescriptor(2, 1)
t_f = 20 * math.sqrt(2)
eps = epsilon_for_phase_condition(math.pi, 2, math.sqrt(2))
pulses = sweep_pulses(eps, t_f, math.pi)

z = zeno_reduce(pair_step_hamiltonian(space, 0, 1, pulses.first, pulses.second), "12")
print("reachable sector:", ", ".join(map(str, z.subspace_basis)))
nz = np.flatnonzero(np.abs(z.bright_state) > 1e-12)
print("bright state:", " + ".join(f"{z.bright_state[i].real:+.4f}{space.label(i)}" for i in nz))

print("\n g/Omega_max   <12|psi>      infidelity vs Zeno limit")
for ratio in (1, 2, 5, 10, 20, 40):
    model = pair_step_hamiltonian(space, 0, 1, pulses.first, pulses.second, g=ratio * pulses.peak)
    cfg = EvolutionConfig(t_f, 40000)
    full = schrodinger_evolve(model, ket(space, "12"), cfg).final
    eff = schrodinger_evolve(effective_model(model), ket(space, "12"), cfg).final
    amp = full[space.index("12")].real
    print(f"{ratio:10d}   {amp:+.6f}   {1 - abs(np.vdot(eff, full)) ** 2:.3e}")
