# Witnessing the coherence between branches
#
# For the Bell state the pure state and the decohered mixture give the
# same statistics on each qubit. They differ on coincidences P1 P2. The
# optimizer searches rank-1 pairs for the largest difference. The grid
# certificate is an independent check of the same maximum.

import numpy as np

from reldec import BeableObservable, Ket, Projector, SubsystemLayout, grid_certificate, interference_term
from reldec import optimize_witness

layout = SubsystemLayout([2, 2], ["1", "2"])
bell = Ket(np.array([1, 0, 0, 1]) / np.sqrt(2), layout)
pointer = BeableObservable.computational("2", 2, name="pointer")

plus = np.array([1, 1]) / np.sqrt(2)
p1, p2 = Projector.onto([plus], "1"), Projector.onto([plus], "2")
print("interference for |+><+| on both sides:", round(interference_term(bell, pointer, p1, p2), 6))

res = optimize_witness(bell, pointer, restarts=8, steps=200, seed=0)
print("optimizer gap:", round(res.gap, 6))
print("grid certificate (resolution 64):", round(grid_certificate(bell, pointer, resolution=64), 6))

# A product state has a single branch, so there is nothing to witness.

product = Ket(np.kron(plus, [1, 0]), layout)
res = optimize_witness(product, pointer)
print("product state gap:", res.gap, "|", res.note)
