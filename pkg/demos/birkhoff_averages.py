"""Running averages of x_u along the orbit of the first return centre.

Uses the exploration depth L = 10, so the perturbation is not small enough
for the C^r bound; the run says so.  The majority table shows why the
averages stay near the branch-1 side: the linking prefixes are mostly ones.
"""

from tangency_lab import params as P
from tangency_lab import statistics as S

ref = P.reference_instance()

rep = S.run(ref, "historic", eras=3, enforce_majority=False)
print(f"L = {rep.L}, rigorous {rep.rigorous}, era starts {rep.eras.starts}")
print(f"{len(rep.series.averages)} steps, worst centre defect {max(rep.defects):.1e}")
print("k  zeros  ones")
for r in rep.majority:
    print(f"{r['k']}  {r['zeros']:5d}  {r['ones']:4d}")
print("era  last step  average")
for era, n, avg in rep.series.era_end_averages():
    print(f"{era:3d}  {n:9d}  {avg:+.4f}")
print("verdict:", rep.verdict.verdict if rep.verdict else f"inconclusive {rep.inconclusive['gaps']}")
