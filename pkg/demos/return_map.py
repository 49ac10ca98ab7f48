"""One block of the perturbed map against its quadratic closed form.

Builds the construction for k = 1..3 with all-zero free codes, then sends a
handful of offsets around the first return centre through the whole block
by direct iteration and compares with the closed form, once exactly and
once in multiprecision.
"""

import random

from gmpy2 import mpq

from tangency_lab import linking as lk
from tangency_lab import params as P
from tangency_lab import perturbation as pt
from tangency_lab import wandering as wd

ref = P.reference_instance()
eps = mpq(1, 1000)

states = lk.build_linked_sequence(ref, eps, 4)
alignments = lk.build_alignments(ref, ref.L, ["0" * k * k for k in range(1, 4)], eps, states)
schedule = pt.build_schedule(alignments, ref, ref.L)

for a in alignments:
    c = a.code
    print(f"k = {a.k}: |gamma| = {c.n_hat} ({c.n_hat0} zeros, {c.n_hat1} ones), "
          f"|t| = {float(max(map(abs, a.translation))):.3e}")

rng = random.Random(1)
for a, nxt in zip(alignments, alignments[1:]):
    hx, hy = wd.tangency_offsets(a, ref)
    offsets = [(hx * mpq(rng.randint(-99, 99), 100), hy * mpq(rng.randint(-99, 99), 100),
                mpq(rng.randint(-19, 19), 10), mpq(rng.randint(-19, 19), 10)) for _ in range(5)]
    exact = wd.return_map_error(schedule, a, nxt, offsets, ref, exact=True)
    approx = wd.return_map_error(schedule, a, nxt, offsets, ref)
    bits = wd.working_bits(a.code, ref)
    print(f"block {a.k}: exact mismatch {exact}, mpfr relative error {approx:.2e} "
          f"(bits per coordinate {bits})")
