"""Two- and three-atom controlled-phase gates in fixed and exact angle modes."""

import warnings

import numpy as np

from shortcut_gates.gates import ZenoRegimeWarning, execute_plan, three_qubit_ccz_plan, two_qubit_cz_plan

warnings.simplefilter("ignore", ZenoRegimeWarning)


def show(name, report):
    print(f"\n{name}: gate fidelity {report.gate_fidelity:.5f}")
    for lab, f, ph, leak in zip(report.labels, report.state_fidelity, report.phases, report.leakage):
        bits = "".join(map(str, lab.atom_levels))
        print(f"  |{bits}>  F={f:.5f}  phase={ph:+.4f}  leakage={leak:.2e}")
    print(f"  max step-boundary excitation {report.max_boundary_population:.2e}")


show("CZ, eps = 0.25", execute_plan(two_qubit_cz_plan()))
show("CZ, exact angles", execute_plan(two_qubit_cz_plan(exact=True)))
show("CZ, exact angles, Zeno limit", execute_plan(two_qubit_cz_plan(exact=True), use_effective=True))
for g in (1.0, 4.0):
    show(f"CCZ, exact angles, g = {g}", execute_plan(three_qubit_ccz_plan(exact=True, g=g)))
