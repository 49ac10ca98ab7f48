"""The seed rectangle and its branch-1 iteration.

Two rectangles are on offer: one symmetric about y_s = 1 and one recentred so
its image spans the whole unstable y side.  The script walks both through
twenty refinement steps and prints which of the four relations hold.
"""

from tangency_lab import dynamics as D
from tangency_lab import params as P

ref = P.reference_instance()

for label, centered in (("symmetric", False), ("recentred", True)):
    rows = D.star_chain(ref, 20, centered)
    print(f"{label} rectangle")
    for r in rows[:4] + rows[-1:]:
        y = r["rect"][1]
        missing = [k for k, v in r.items() if v is False and k != "holds"]
        print(f"  n = {r['n']:2d}  y_s in [{float(y.lo):.6f}, {float(y.hi):.6f}]  "
              + ("all relations hold" if r["holds"] else f"fails: {', '.join(missing)}"))
    print()
