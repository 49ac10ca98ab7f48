"""Era schedules, free-code generators, orbit simulation and Birkhoff averages.

The orbit that matters is the one through the return centres: block k
carries c_k onto c_(k+1) exactly, so the simulation traces each block in
``mpfr`` and restarts the next block from the exact centre.  Averages are
accumulated as exact rationals of the sampled doubles.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from gmpy2 import mpfr, mpq

from . import dynamics as dyn
from . import linking as lk
from . import perturbation as pt
from . import wandering as wd
from .errors import Inconclusive, MajorityViolation, OutsideDomain
from .params import minimal_L

EXPLORATION_L = 10
VARIANTS = ("historic", "convergent")


# --- eras and free codes ----------------------------------------------------------

def _square_sum(lo: int, hi: int) -> int:
    """Sum of k^2 for lo <= k < hi."""
    f = lambda n: (n - 1) * n * (2 * n - 1) // 6
    return f(hi) - f(lo) if hi > lo else 0


@dataclass(frozen=True)
class EraSchedule:
    """Era s covers the indices starts[s-1] .. starts[s] - 1 (1-based eras)."""

    starts: tuple

    @property
    def s_max(self) -> int:
        return len(self.starts) - 1

    def era_of(self, k: int) -> int:
        if not self.starts[0] <= k:
            raise ValueError(f"index {k} precedes the first era")
        for s in range(1, len(self.starts)):
            if k < self.starts[s]:
                return s
        return len(self.starts)

    def holds(self, s: int) -> bool:
        """The growth inequality for era s."""
        k = self.starts
        return _square_sum(k[s - 1], k[s]) > s * _square_sum(k[0], k[s - 1])


def era_schedule(s_max: int, k1: int = 1) -> EraSchedule:
    """Greedy-minimal era starts: each era is the shortest that beats s times all earlier ones."""
    if s_max < 1:
        raise ValueError("s_max must be at least 1")
    starts = [k1]
    for s in range(1, s_max + 1):
        need = s * _square_sum(k1, starts[-1])
        nxt, acc = starts[-1], 0
        while True:
            acc += nxt * nxt
            nxt += 1
            if acc > need:
                break
        starts.append(nxt)
    return EraSchedule(tuple(starts))


def code_condition_u(k: int, schedule: EraSchedule) -> str:
    """k^2 symbols, zeros first: three quarters of them in odd eras, seven eighths in even ones."""
    n = k * k
    zeros = 3 * n // 4 if schedule.era_of(k) % 2 else 7 * n // 8
    return "0" * zeros + "1" * (n - zeros)


def convergent_condition_u(k: int) -> str:
    return "0" * (k * k)


def u_codes(variant: str, k_max: int, schedule: EraSchedule | None = None) -> list[str]:
    if variant == "historic":
        return [code_condition_u(k, schedule) for k in range(1, k_max + 1)]
    if variant == "convergent":
        return [convergent_condition_u(k) for k in range(1, k_max + 1)]
    raise ValueError(f"variant must be one of {VARIANTS}")


def majority_rows(alignments) -> list[dict]:
    return [{"k": a.k, "zeros": a.code.n_hat0, "ones": a.code.n_hat1, "ok": a.code.majority}
            for a in alignments]


def check_majority(alignments) -> list[dict]:
    """Raise MajorityViolation if any gamma code has more ones than zeros."""
    rows = majority_rows(alignments)
    bad = [r for r in rows if not r["ok"]]
    if bad:
        worst = max(bad, key=lambda r: r["ones"] - r["zeros"])
        raise MajorityViolation(
            f"majority condition fails at k = {[r['k'] for r in bad]} "
            f"(worst k = {worst['k']}: {worst['zeros']} zeros, {worst['ones']} ones)", rows)
    return rows


# --- orbits -----------------------------------------------------------------------

def simulate_orbit(schedule, x0, n_steps: int):
    """Yield x0, G(x0), ..., G^n_steps(x0) in the arithmetic of x0."""
    p = x0
    yield p
    for i in range(n_steps):
        try:
            p = pt.G_map(schedule, p)
        except OutsideDomain as exc:
            raise OutsideDomain(f"orbit left the domain at step {i}: {exc}", point=p, step=i) from None
        yield p


@dataclass(frozen=True)
class OrbitStep:
    n: int
    k: int
    point: tuple
    region: dyn.Region


def centre_orbit(schedule, alignments, params, defects: list | None = None):
    """The orbit of the first centre through every block, one OrbitStep per iterate.

    Each block is traced at its working precision from the exact centre;
    the tangency image is compared with the next centre (the largest
    coordinate gap goes to ``defects`` when given) and the next block starts
    from the exact centre.  The last step is the final centre.
    """
    n = 0
    for a, nxt in zip(alignments, alignments[1:]):
        bits = wd.working_bits(a.code, params)
        pts = wd.trace_block(a.center, a.code, params, bits)
        for p in pts:
            yield OrbitStep(n, a.k, p, dyn.region_of(p, params))
            n += 1
        with wd._ctx(max(bits.values())):
            landed = pt.G_map(schedule, pts[-1])
            gap = max(abs(float(u - mpfr(v))) for u, v in zip(landed, nxt.center))
        if defects is not None:
            defects.append(gap)
    last = alignments[-1]
    yield OrbitStep(n, last.k, last.center, dyn.region_of(last.center, params))


def phi_x_u(p) -> float:
    return float(p[0])


def phi_near(point, radius: float = 0.1):
    """Smoothed indicator of the ball of ``radius`` around ``point``."""
    centre = np.array([float(v) for v in point])

    def phi(p):
        d = math.dist([float(v) for v in p], centre)
        return float(pt.bump_base(-d / radius)) if d < radius else 0.0

    return phi


# --- averages ---------------------------------------------------------------------

@dataclass
class EmpiricalSeries:
    """Running averages A_n of a test function along an orbit, with per-step tags.

    ``era_marks`` holds the steps where a new era begins.
    """

    averages: np.ndarray
    values: np.ndarray
    tags: list = field(default_factory=list)
    eras: list = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.averages))

    @property
    def era_marks(self) -> list[int]:
        return [n for n in range(1, len(self.eras)) if self.eras[n] != self.eras[n - 1]]

    def era_end_averages(self) -> list[tuple[int, int, float]]:
        """(era, last step, A at that step) for every era the series has left."""
        return [(self.eras[n - 1], n - 1, float(self.averages[n - 1])) for n in self.era_marks]

    def within_range(self) -> bool:
        if not len(self.values):
            return True
        return bool(np.all(self.averages >= self.values.min()) and np.all(self.averages <= self.values.max()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "A_n", "region", "era"])
        for n, a in enumerate(self.averages):
            tag = self.tags[n] if n < len(self.tags) else ""
            era = self.eras[n] if n < len(self.eras) else ""
            w.writerow([n, repr(float(a)), tag, era])
        return buf.getvalue()

    def plot_data(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["era", "n", "A_n"])
        for era, n, a in self.era_end_averages():
            w.writerow([era, n, repr(a)])
        return buf.getvalue()


def partial_averages(values, tags=(), eras=()) -> EmpiricalSeries:
    """A_n = (v_0 + ... + v_n) / (n + 1), with the sums kept exact."""
    vals = np.asarray(list(values), dtype=float)
    total = Fraction(0)
    out = np.empty(len(vals))
    for n, v in enumerate(vals.tolist()):
        total += Fraction(v)
        out[n] = total / (n + 1)
    return EmpiricalSeries(out, vals, list(tags), list(eras))


def orbit_series(steps, phi=phi_x_u, era_of=None) -> EmpiricalSeries:
    steps = list(steps)
    eras = [era_of(s.k) for s in steps] if era_of else []
    return partial_averages([phi(s.point) for s in steps], [s.region.value for s in steps], eras)


# --- verdicts ---------------------------------------------------------------------

@dataclass(frozen=True)
class Verdict:
    verdict: str
    era_ends: tuple
    gaps: tuple
    first_gap: float
    tail_oscillation: float | None
    limit: float | None


def _alternating(gaps) -> bool:
    return all(g != 0 for g in gaps) and all((a > 0) != (b > 0) for a, b in zip(gaps, gaps[1:]))


def dichotomy_report(series: EmpiricalSeries, target=None, min_eras: int = 3, min_steps: int = 10_000,
                     tol: float = 1e-3, limit_tol: float = 1e-2) -> Verdict:
    """Historic if the era-end averages alternate with gaps of at least half the first one;
    convergent if the last half of the series moves less than ``tol`` (and ends within
    ``limit_tol`` of ``target`` when one is given).  Inconclusive otherwise.
    """
    ends = tuple(a for _, _, a in series.era_end_averages())
    gaps = tuple(b - a for a, b in zip(ends, ends[1:]))
    first = abs(gaps[0]) if gaps else 0.0
    n = len(series.averages)
    osc = limit = None
    if n:
        tail = series.averages[n // 2:]
        osc, limit = float(tail.max() - tail.min()), float(series.averages[-1])
    if len(ends) >= min_eras and len(gaps) >= 2 and _alternating(gaps) \
            and all(abs(g) >= first / 2 for g in gaps):
        return Verdict("historic", ends, gaps, first, osc, limit)
    if n >= min_steps and osc < tol and (target is None or abs(limit - float(target)) < limit_tol):
        return Verdict("convergent", ends, gaps, first, osc, limit)
    raise Inconclusive("neither the historic nor the convergent criterion holds",
                       {"steps": n, "era_ends": ends, "gaps": gaps, "tail_oscillation": osc,
                        "limit": limit, "target": target})


# --- a whole run ------------------------------------------------------------------

@dataclass
class RunReport:
    variant: str
    L: int
    rigorous: bool
    eras: EraSchedule | None
    majority: list
    series: EmpiricalSeries
    defects: list
    verdict: Verdict | None
    inconclusive: dict | None


def run(params, variant: str, eras: int = 3, k_max: int | None = None, L: int | None = None,
        eps=mpq(1, 1000), enforce_majority: bool = True, min_steps: int = 10_000, phi=phi_x_u) -> RunReport:
    """Build the codes for ``variant``, simulate the centre orbit and classify its averages.

    The historic variant covers ``eras`` complete eras; the convergent one
    runs blocks 1..k_max (default 12).  ``L`` defaults to the exploration
    value, and the report says whether it reaches the rigorous minimum.
    With ``enforce_majority`` a code with too many ones aborts the run.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    L = EXPLORATION_L if L is None else L
    sched = era_schedule(eras)
    if k_max is None:
        k_max = sched.starts[-1] if variant == "historic" else 12
    codes = u_codes(variant, k_max, sched)
    states = lk.build_linked_sequence(params, eps, k_max + 1)
    alignments = lk.build_alignments(params, L, codes, eps, states)
    rows = check_majority(alignments) if enforce_majority else majority_rows(alignments)
    schedule = pt.build_schedule(alignments, params, L)
    defects = []
    series = orbit_series(centre_orbit(schedule, alignments, params, defects), phi, sched.era_of)
    target = phi(dyn.fixed_points(params)[0]) if variant == "convergent" else None
    try:
        verdict, extra = dichotomy_report(series, target, min_steps=min_steps), None
    except Inconclusive as exc:
        verdict, extra = None, exc.details
    return RunReport(variant, L, L >= minimal_L(params), sched, rows, series, defects, verdict, extra)
