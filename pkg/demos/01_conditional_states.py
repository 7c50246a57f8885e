# Conditional subsystem states
#
# A two-qubit Bell state, with a pointer beable on qubit 2. Splitting the
# state by the pointer value gives two branches. Each branch has a weight
# and a conditional state for qubit 1.

import numpy as np

from reldec import (
    BeableObservable,
    Ket,
    SubsystemLayout,
    branch_decompose,
    conditional_subsystem_state,
    luders_conditioning,
    partial_trace,
)

layout = SubsystemLayout([2, 2], ["1", "2"])
psi = Ket(np.array([1, 0, 0, 1]) / np.sqrt(2), layout)
pointer = BeableObservable.computational("2", 2, value_names=["up", "down"], name="pointer")

for b in branch_decompose(psi, pointer):
    print(pointer.value_name(b.value_index), "weight", round(b.weight, 6))

# The weighted conditional states add up to the ordinary reduced state of qubit 1.

total = np.zeros((2, 2), dtype=complex)
for q in pointer.projectors:
    w, rho = conditional_subsystem_state(psi, q)
    print("w =", round(w, 6))
    print(rho.matrix.real)
    total += w * rho.matrix
print("matches Tr_2:", np.allclose(total, partial_trace(psi, ["1"]).matrix))

# The same conditional state follows from the ideal-measurement (Lüders)
# update on the whole system followed by a partial trace.

w, after = luders_conditioning(psi, pointer.projectors[0])
print("Lüders then trace:")
print(partial_trace(after, ["1"]).matrix.real)
