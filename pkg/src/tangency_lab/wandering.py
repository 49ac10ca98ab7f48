"""Wandering boxes around the return centres, the block return map and nesting checks.

Box scales are astronomically small (b_k is below e^-1000 already at the
first index), so every scale lives in the log domain as an ``mpfr`` and box
bounds are exact rationals converted from it.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import gmpy2
import numpy as np
from gmpy2 import mpfr, mpq

from . import dynamics as dyn
from .errors import InsufficientDepth, OutsideDomain
from .intervals import Box, Interval
from .perturbation import G_map

LOG_BITS = 256


def _ctx(bits):
    return gmpy2.context(gmpy2.get_context(), precision=bits)


def _ln(v):
    return gmpy2.log(mpfr(v))


# --- exponent sums ----------------------------------------------------------------

def exponent_sums(gammas, k: int, end: int, start: int = 1):
    """Exact sums over j = k..end of (zeros, ones, length) of gamma^(j), weighted by 2^(k-j)."""
    s0 = s1 = mpq(0)
    for j in range(k, end + 1):
        g = gammas[j - start]
        w = mpq(1, 2 ** (j - k))
        s0 += g.n_hat0 * w
        s1 += g.n_hat1 * w
    return s0, s1, s0 + s1


def growth_ratio(gammas, k: int, end: int, start: int = 1) -> mpq:
    """Largest observed n_hat_(j+1) / n_hat_j for k <= j < end."""
    ratios = [mpq(gammas[j + 1 - start].n_hat, gammas[j - start].n_hat) for j in range(k, end)]
    return max(ratios, default=mpq(1))


def tail_bound(gammas, k: int, end: int, start: int = 1):
    """Bound on the weighted length sum beyond ``end``, from the observed growth ratio.

    Returns None when the ratio is 2 or more and the geometric bound diverges.
    """
    q = growth_ratio(gammas, k, end, start) / 2
    if q >= 1:
        return None
    return gammas[end - start].n_hat * mpq(1, 2 ** (end - k)) * q / (1 - q)


@dataclass(frozen=True)
class Scales:
    """Natural logs of b_k and of the y-side scale, with the tail they leave out.

    ``tail_x`` and ``tail_y`` bound the omitted part of each log (None if the
    growth ratio gives no bound).  ``certified`` is True when both bounds are
    below the tolerance the scales were requested with.
    """

    k: int
    log_b: mpfr
    log_b_bar: mpfr
    end: int
    tail_x: float | None
    tail_y: float | None
    certified: bool

    @property
    def b(self) -> mpfr:
        with _ctx(LOG_BITS):
            return gmpy2.exp(self.log_b)

    @property
    def b_bar(self) -> mpfr:
        with _ctx(LOG_BITS):
            return gmpy2.exp(self.log_b_bar)

    def mantissas(self):
        """(m, e) pairs with scale = m * 2**e and 0.5 <= m < 1, as plain floats and ints."""
        out = []
        for lg in (self.log_b, self.log_b_bar):
            e = math.floor(float(lg / gmpy2.log(2))) + 1
            with _ctx(LOG_BITS):
                m = gmpy2.exp(lg - e * gmpy2.log(2))
            out.append((float(m), e))
        return tuple(out)


def _scales_at(gammas, k, end, params, start):
    p = params
    s0, s1, s = exponent_sums(gammas, k, end, start)
    tail = tail_bound(gammas, k, end, start)
    with _ctx(LOG_BITS):
        log_b = -(s0 * _ln(p.lambda_cu0) + s1 * _ln(p.lambda_cu1))
        log_b_bar = -_ln(p.a1) - s * _ln(p.lambda_u)
        if tail is None:
            tx = ty = None
        else:
            tx = float(tail * max(_ln(p.lambda_cu0), _ln(p.lambda_cu1)))
            ty = float(tail * _ln(p.lambda_u))
    return log_b, log_b_bar, tx, ty


def box_scales(gammas, k: int, params, tail_tol=None, start: int = 1) -> Scales:
    """Scales for index k from the gamma codes ``gammas`` (the first one has index ``start``).

    With ``tail_tol`` the sums stop at the first index whose tail bound on
    both logs is below it, and InsufficientDepth is raised if none is.
    Without it the sums run to the last available index (finite horizon);
    the result then satisfies the one-step recursion exactly but is not
    certified against the infinite sums.
    """
    last = start + len(gammas) - 1
    if not start <= k <= last:
        raise InsufficientDepth(f"no gamma code for index {k}")
    if tail_tol is None:
        log_b, log_b_bar, tx, ty = _scales_at(gammas, k, last, params, start)
        return Scales(k, log_b, log_b_bar, last, tx, ty, False)
    for end in range(k, last + 1):
        log_b, log_b_bar, tx, ty = _scales_at(gammas, k, end, params, start)
        if tx is not None and tx < tail_tol and ty < tail_tol:
            return Scales(k, log_b, log_b_bar, end, tx, ty, True)
    raise InsufficientDepth(
        f"codes up to index {last} cannot bound the tail of index {k} below {tail_tol} "
        f"(tail bounds {tx}, {ty})")


def block_factors(code, params):
    """Exact linear factors of one block: unstable x, unstable y, stable x, stable y."""
    p = params
    n0, n1, n = code.n_hat0, code.n_hat1, code.n_hat
    return (p.lambda_cu0 ** n0 * p.lambda_cu1 ** n1, p.lambda_u ** n,
            p.lambda_s ** n, p.lambda_cs0 ** n0 * p.lambda_cs1 ** n1)


def log_factors(code, params):
    p = params
    n0, n1, n = code.n_hat0, code.n_hat1, code.n_hat
    with _ctx(LOG_BITS):
        return (n0 * _ln(p.lambda_cu0) + n1 * _ln(p.lambda_cu1), n * _ln(p.lambda_u),
                n * _ln(p.lambda_s), n0 * _ln(p.lambda_cs0) + n1 * _ln(p.lambda_cs1))


def recursion_residual(s_k: Scales, s_next: Scales, code, params):
    """Log-domain defects of the one-step recursions linking index k to k + 1."""
    lx, lu, _, _ = log_factors(code, params)
    with _ctx(LOG_BITS):
        dx = s_next.log_b - 2 * (lx + s_k.log_b)
        dy = s_next.log_b_bar - (_ln(params.a1) + 2 * lu + 2 * s_k.log_b_bar)
    return dx, dy


# --- the boxes --------------------------------------------------------------------

Y_STAR_VARIANTS = ("a2", "a1")


@dataclass(frozen=True)
class WanderingBox:
    k: int
    scales: Scales
    center: tuple
    log_x_star: mpfr
    log_y_star: mpfr
    box: Box

    @property
    def b(self):
        return self.scales.b

    @property
    def b_bar(self):
        return self.scales.b_bar

    @property
    def x_star(self):
        with _ctx(LOG_BITS):
            return gmpy2.exp(self.log_x_star)

    @property
    def y_star(self):
        with _ctx(LOG_BITS):
            return gmpy2.exp(self.log_y_star)

    @property
    def log_diam(self):
        # the four half-widths are far apart in size, so the largest side decides
        with _ctx(LOG_BITS):
            return max(self.scales.log_b, self.scales.log_b_bar,
                       self.log_x_star + gmpy2.log(2), self.log_y_star + gmpy2.log(2))


def w_box(alignment, scales: Scales, params, y_star: str = "a2") -> WanderingBox:
    """X_k x Y_k around the centre of ``alignment``, sides ordered (x_u, y_u, x_s, y_s)."""
    if y_star not in Y_STAR_VARIANTS:
        raise ValueError(f"y_star variant must be one of {Y_STAR_VARIANTS}")
    p = params
    with _ctx(LOG_BITS):
        log20 = gmpy2.log(20)
        lxs = log20 + _ln(p.a2) + scales.log_b / 2
        if y_star == "a2":
            lys = log20 - _ln(p.a2) + scales.log_b_bar / 2
        else:
            lys = log20 - _ln(p.a1) / 2 + scales.log_b_bar / 2
        half_b = mpq(gmpy2.exp(scales.log_b)) / 2
        half_bb = mpq(gmpy2.exp(scales.log_b_bar)) / 2
        xs, ys = mpq(gmpy2.exp(lxs)), mpq(gmpy2.exp(lys))
    cx, cy = mpq(alignment.center[0]), mpq(alignment.center[1])
    box = Box([Interval(cx - half_b, cx + half_b), Interval(cy - half_bb, cy + half_bb),
               Interval(-xs, xs), Interval(-ys, ys)])
    return WanderingBox(alignment.k, scales, alignment.center[:2], lxs, lys, box)


def build_boxes(alignments, params, y_star: str = "a2", tail_tol=None) -> list[WanderingBox]:
    """One box per alignment, scales from the alignments' own gamma codes."""
    gammas = [a.code for a in alignments]
    start = alignments[0].k
    return [w_box(a, box_scales(gammas, a.k, params, tail_tol, start), params, y_star)
            for a in alignments]


# --- the block return map ---------------------------------------------------------

def return_map_projection(alignment, next_alignment, offsets, params, printed: bool = False,
                          factors=None):
    """Image after one block and one tangency step, as two planar points.

    ``offsets`` = (x_u, y_u, x_s, y_s): the unstable pair is measured from the
    centre, the stable pair is absolute.  Returns ((x_u', x_s'), (y_u', y_s')).
    ``printed`` adds the constant terms that the displayed closed form keeps
    outside the centre; they shift the zero-offset image off the centre.
    ``factors`` may carry ``block_factors`` of the alignment's code, in any
    arithmetic, to avoid recomputing them.
    """
    p = params
    xu, yu, xs, ys = offsets
    lx, lu, ls, lcs = factors or block_factors(alignment.code, p)
    cx, cy = next_alignment.center[0], next_alignment.center[1]
    ex = lx * xu
    ey = lu * yu
    x_out = cx - ex * ex + ls * xs / p.lambda_star
    y_out = cy - p.a1 * ey * ey + p.mu_star * lcs * ys
    if printed:
        x_out += 1 - p.a_s / p.lambda_star
        y_out += p.a_u - p.mu_star
    return (x_out, p.a2 * ex), (y_out, ey)


def _branch_tables(params):
    """Per-coordinate affine pieces (slope, shift) of the two branches, plus their domains."""
    p = params
    two = p.lambda_s * 0 + 2
    ex = [dyn.expanding_box(b, p) for b in (0, 1)]
    return {
        "xu": [((p.lambda_cu0, p.lambda_cu0), ex[0][0]),
               ((p.lambda_cu1, 1 - p.lambda_cu1), ex[1][0])],
        "yu": [((p.lambda_u, p.lambda_u), ex[0][1]), ((p.lambda_u, -p.lambda_u), ex[1][1])],
        "xs": [((p.lambda_s, -1 + 0 * two), Interval(-two, two)),
               ((p.lambda_s, 1 + 0 * two), Interval(-two, two))],
        "ys": [((p.lambda_cs0, -1 + 0 * two), Interval(-two, two)),
               ((p.lambda_cs1, 1 - p.lambda_cs1), Interval(-two, two))],
    }


def _affine_step(slope, shift, bits):
    """(multiplier, addend, divisor) with x -> (x * multiplier + addend) / divisor.

    At high precision a small exact slope becomes an integer multiply and
    divide, which cost linear time instead of a full product.
    """
    if bits > 1500 and isinstance(slope, type(mpq(0))) \
            and max(slope.numerator.bit_length(), slope.denominator.bit_length()) < 64:
        den = int(slope.denominator)
        return int(slope.numerator), mpfr(shift * den), den
    return mpfr(slope), mpfr(shift), 1


def _run_column(values, code, pieces, bits, watch=None, only=None):
    """Iterate one coordinate of many points along ``code``, all in lock step.

    Values are held in a numpy object array so each step is one pass over
    the batch.  Raises OutsideDomain at the first step where any value
    leaves the branch domain.  ``watch`` = (lo, hi) maps each step where
    some value lies strictly inside it to the boolean mask of those values;
    ``only`` restricts the watch to a set of steps.
    """
    hits = {}
    with _ctx(bits):
        steps = [_affine_step(s, c, bits) + (mpfr(d.lo), mpfr(d.hi)) for (s, c), d in pieces]
        # x = z / scale: the integer divisors go into one scalar instead of every value
        z = np.empty(len(values), dtype=object)
        z[:] = [mpfr(v) for v in values]
        scale = mpfr(1)
        for j, sym in enumerate(code):
            m, c, d, lo, hi = steps[sym]
            if (z < lo * scale).any() or (z > hi * scale).any():
                raise OutsideDomain(f"coordinate left branch {sym} at step {j}", step=j)
            if watch is not None and (only is None or j in only):
                mask = (z > watch[0] * scale) & (z < watch[1] * scale)
                if mask.any():
                    hits[j] = mask
            z = z * m + c * scale
            if d != 1:
                scale = scale * d
        x = z / scale
    return list(x), hits


def working_bits(code, params, margin: int = 96, resolve=None) -> dict:
    """Precision per coordinate so a block iterate keeps ``margin`` bits after expansion.

    The stable x coordinate has to resolve its landing inside the stable
    cylinder of the next omega code, which is as deep as that code is long.
    With ``resolve`` = (log x-scale, log y-scale) the result is also accurate
    to a fraction of those scales, which box membership tests need.
    """
    lx, lu, _, _ = log_factors(code, params)
    log2 = math.log(2)
    depth = len(code.omega_next) * -math.log2(float(params.lambda_s))
    bits = {"xu": int(float(lx) / log2) + margin, "yu": int(float(lu) / log2) + margin,
            "xs": int(depth) + margin, "ys": margin}
    if resolve is not None:
        fine_x = math.ceil(-float(resolve[0]) / log2)
        fine_y = math.ceil(-float(resolve[1]) / log2)
        for name, extra in (("xu", fine_x), ("xs", fine_x), ("yu", fine_y), ("ys", fine_y)):
            bits[name] += extra
    return bits


def direct_blocks(schedule, points, code, params, extra: int = 0, bits=None) -> list[tuple]:
    """G applied n_hat + 1 + extra times to each of ``points`` by direct iteration in ``mpfr``.

    ``code`` is the GammaCode of the block.  The block steps follow its
    symbols: each coordinate moves through its own branch piece at a
    precision matched to its expansion, and every step is checked against
    the branch domain and against the bump collar (where G would differ
    from F).  The tangency step and any extra steps go through ``G_map``.
    """
    p = params
    tables = _branch_tables(p)
    syms = [int(ch) for ch in code.gamma]
    bits = bits or working_bits(code, p)
    collar = 3 * p.delta / 2
    columns, hits = [], {}
    for i, name in enumerate(("xu", "yu", "xs", "ys")):
        watch = (-collar, collar) if name in ("xu", "yu") else None
        # y_u only matters where some x_u is already inside the collar
        only = hits["xu"].keys() if name == "yu" else None
        col, h = _run_column([pt[i] for pt in points], syms, tables[name], bits[name], watch, only)
        columns.append(col)
        hits[name] = h
    for j in sorted(hits["xu"].keys() & hits["yu"].keys()):
        if (hits["xu"][j] & hits["yu"][j]).any():
            raise OutsideDomain(f"block step {j} lies in the bump collar", step=j)
    out = []
    with _ctx(max(bits.values())):
        for q in zip(*columns):
            for _ in range(1 + extra):
                q = G_map(schedule, q)
            out.append(q)
    return out


def direct_block(schedule, point, code, params, extra: int = 0, bits=None):
    """``direct_blocks`` for a single point."""
    return direct_blocks(schedule, [point], code, params, extra, bits)[0]


def trace_block(point, code, params, bits=None) -> list[tuple]:
    """Every iterate of ``point`` along the block of ``code``, endpoint included.

    Same per-coordinate precision as ``direct_block``; returns n_hat + 1
    points, the last one being the point that enters the tangency step.
    """
    tables = _branch_tables(params)
    bits = bits or working_bits(code, params)
    syms = [int(ch) for ch in code.gamma]
    columns = []
    for name, value in zip(("xu", "yu", "xs", "ys"), point):
        with _ctx(bits[name]):
            steps = [_affine_step(s, c, bits[name]) for (s, c), _ in tables[name]]
            x = mpfr(value)
            col = [x]
            for j, sym in enumerate(syms):
                dom = tables[name][sym][1]
                if not dom.lo <= x <= dom.hi:
                    raise OutsideDomain(f"{name} left branch {sym} at step {j}", step=j)
                m, c, d = steps[sym]
                x = (x * m + c) / d
                col.append(x)
        columns.append(col)
    return list(zip(*columns))


def exact_block(schedule, point, steps: int):
    """G iterated ``steps`` times through ``G_map`` in the point's own arithmetic."""
    q = point
    for j in range(steps):
        try:
            q = G_map(schedule, q)
        except OutsideDomain as exc:
            raise OutsideDomain(str(exc), point=q, step=j) from None
    return q


def tangency_offsets(alignment, params, fraction=mpq(1)):
    """Half-widths (x_u, y_u) of the offsets whose block iterate lands in the tangency box."""
    lx, lu, _, _ = block_factors(alignment.code, params)
    return fraction * params.delta / lx, fraction * params.delta / lu


def return_map_error(schedule, alignment, next_alignment, offsets, params, exact=False):
    """Largest relative gap between the closed form and direct iteration over ``offsets``.

    ``exact`` iterates ``G_map`` on rationals and returns 0 or 1 (any
    mismatch); otherwise both sides run in ``mpfr`` at the block's working
    precision.
    """
    cx, cy = alignment.center[0], alignment.center[1]
    factors = block_factors(alignment.code, params)
    if exact:
        for off in offsets:
            xu, yu, xs, ys = off
            got = exact_block(schedule, (cx + xu, cy + yu, xs, ys), alignment.code.n_hat + 1)
            (fx, fxs), (fy, fys) = return_map_projection(alignment, next_alignment, off, params,
                                                         factors=factors)
            if got != (fx, fy, fxs, fys):
                return 1
        return 0
    bits = working_bits(alignment.code, params)
    # the centres are rationals with huge denominators: round them once per coordinate
    with _ctx(bits["xu"]):
        cxm = mpfr(cx)
    with _ctx(bits["yu"]):
        cym = mpfr(cy)
    starts = []
    for xu, yu, xs, ys in offsets:
        with _ctx(bits["xu"]):
            px = cxm + mpfr(xu)
        with _ctx(bits["yu"]):
            py = cym + mpfr(yu)
        starts.append((px, py, xs, ys))
    ends = direct_blocks(schedule, starts, alignment.code, params, bits=bits)
    worst = 0.0
    with _ctx(max(bits.values())):
        factors = tuple(mpfr(f) for f in factors)
        for off, got in zip(offsets, ends):
            (fx, fxs), (fy, fys) = return_map_projection(
                alignment, next_alignment, tuple(mpfr(v) for v in off), params, factors=factors)
            for a, b in ((got[0], fx), (got[2], fxs), (got[1], fy), (got[3], fys)):
                scale = abs(b) if b != 0 else 1
                worst = max(worst, float(abs(a - b) / scale))
    return worst


# --- nesting ----------------------------------------------------------------------

AXES = ("x_u", "y_u", "x_s", "y_s")


@dataclass(frozen=True)
class NestingRow:
    k: int
    axis: str
    margin: float
    bound_ratio: float
    exponent: int
    holds: bool


@dataclass
class NestingReport:
    rows: list = field(default_factory=list)

    def holds(self, k=None, exponent=None) -> bool:
        rows = [r for r in self.rows
                if (k is None or r.k == k) and (exponent is None or r.exponent == exponent)]
        return bool(rows) and all(r.holds for r in rows)

    def verified_exponent(self, k):
        for e in (1, 2):
            if self.holds(k, e):
                return e
        return None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "axis", "margin", "bound_ratio", "verified_exponent"])
        for r in self.rows:
            e = self.verified_exponent(r.k)
            w.writerow([r.k, r.axis, repr(r.margin), repr(r.bound_ratio), "" if e is None else e])
        return buf.getvalue()


def _rel_margin(lo, hi, half):
    # how far inside (-half, half) the interval [lo, hi] sits, in units of half
    return float(min(half - hi, lo + half) / half)


def image_offsets(box: WanderingBox, code, params):
    """Offset intervals, relative to the next centre, of the one-block image of ``box``.

    Each interval is (lo, hi) in ``mpfr``; the extremes come from the corners
    of the closed form (the parabola endpoints and the stable extremes).
    """
    p = params
    lx, lu, ls, lcs = (mpfr(v) for v in log_factors(code, p))
    with _ctx(LOG_BITS):
        b, bb, xs, ys = box.b, box.b_bar, box.x_star, box.y_star
        ex = gmpy2.exp(lx) * b / 2
        ey = gmpy2.exp(lu) * bb / 2
        sx = gmpy2.exp(ls) * xs / mpfr(p.lambda_star)
        sy = mpfr(p.mu_star) * gmpy2.exp(lcs) * ys
        return {
            "x_u": (-ex * ex - sx, sx),
            "y_u": (-mpfr(p.a1) * ey * ey - sy, sy),
            "x_s": (-mpfr(p.a2) * ex, mpfr(p.a2) * ex),
            "y_s": (-ey, ey),
        }


def bound_ratios(box: WanderingBox, nxt: WanderingBox, code, params) -> dict:
    """Contraction bounds per axis: 1/2 plus the stable share for the unstable axes."""
    p = params
    lx, lu, ls, lcs = (mpfr(v) for v in log_factors(code, p))
    with _ctx(LOG_BITS):
        rx = 0.5 + float(gmpy2.exp(ls + box.log_x_star - nxt.scales.log_b) * 2)
        ry = 0.5 + float(mpfr(p.mu_star) * gmpy2.exp(lcs + box.log_y_star - nxt.scales.log_b_bar) * 2)
        r3 = float(mpfr(p.a2) * gmpy2.exp(lx + box.scales.log_b - nxt.log_x_star) / 2)
        r4 = float(gmpy2.exp(lu + box.scales.log_b_bar - nxt.log_y_star) / 2)
    return {"x_u": rx, "y_u": ry, "x_s": r3, "y_s": r4}


def _one_step_image(intervals, center, sym, params):
    """Offset intervals after one more branch step, relative to the same centre."""
    tables = _branch_tables(params)
    names = {"x_u": "xu", "y_u": "yu", "x_s": "xs", "y_s": "ys"}
    out = {}
    for i, axis in enumerate(AXES):
        (slope, shift), _ = tables[names[axis]][sym]
        base = center[i]
        lo, hi = intervals[axis]
        with _ctx(LOG_BITS):
            moved = mpfr(base) * mpfr(slope) + mpfr(shift) - mpfr(base)
            out[axis] = (lo * mpfr(slope) + moved, hi * mpfr(slope) + moved)
    return out


def check_nesting(boxes, alignments, params, exponents=(1, 2), report=None) -> NestingReport:
    """Closed-form nesting of each box in the next one, per axis and exponent."""
    report = report or NestingReport()
    for box, nxt, a, a_next in zip(boxes, boxes[1:], alignments, alignments[1:]):
        img = image_offsets(box, a.code, params)
        ratios = bound_ratios(box, nxt, a.code, params)
        halves = {"x_u": nxt.b / 2, "y_u": nxt.b_bar / 2, "x_s": nxt.x_star, "y_s": nxt.y_star}
        for e in exponents:
            cur = img
            if e == 2:
                center = (a_next.center[0], a_next.center[1], 0, 0)
                cur = _one_step_image(img, center, int(a_next.code.gamma[0]), params)
            for axis in AXES:
                lo, hi = cur[axis]
                with _ctx(LOG_BITS):
                    m = _rel_margin(lo, hi, halves[axis])
                report.rows.append(NestingRow(box.k, axis, m, ratios[axis], e, m > 0))
    return report


def sweep_points(box: WanderingBox, alignment, params, per_side: int = 1):
    """Corners and edge midpoints of the box, as exact points."""
    sides = [box.box[i] for i in range(4)]
    grids = []
    for s in sides:
        grids.append([s.lo + (s.hi - s.lo) * mpq(i, 2 * per_side) for i in range(2 * per_side + 1)])
    pts = [(x, y, u, v) for x in grids[0] for y in grids[1] for u in grids[2] for v in grids[3]]
    return pts


def sweep_nesting(schedule, boxes, alignments, params, per_side: int = 1) -> list[dict]:
    """Direct iteration of the corner and edge sample of each box through one block.

    One row per index: how many sample images land in the next box, per axis.
    """
    rows = []
    for box, nxt, a in zip(boxes, boxes[1:], alignments):
        pts = sweep_points(box, a, params, per_side)
        bits = working_bits(a.code, params, resolve=(nxt.scales.log_b, nxt.scales.log_b_bar))
        inside = dict.fromkeys(AXES, 0)
        for q in direct_blocks(schedule, pts, a.code, params, bits=bits):
            for i, axis in enumerate(AXES):
                if nxt.box[i].contains_open(mpq(q[i])):
                    inside[axis] += 1
        rows.append({"k": box.k, "samples": len(pts), **inside})
    return rows


def orbit_disjointness(schedule, boxes, alignments, params, samples=()) -> dict:
    """Pairwise disjointness of the boxes and the itinerary of sample points through them.

    Each rational sample starts in the first box and is iterated exactly;
    the report lists, per sample, the indices whose box it visited before
    leaving the chain.  Exact iteration is needed here: the block return
    squares offsets, so the precision a sample needs doubles per block, and
    a y_s rounding error is amplified by mu_star times a stable factor that
    outgrows the next y-scale.
    """
    pairs = [(i, j) for i in range(len(boxes)) for j in range(i + 1, len(boxes))]
    overlapping = [(boxes[i].k, boxes[j].k) for i, j in pairs if boxes[i].box.intersects(boxes[j].box)]
    visits = []
    for pt in samples:
        seen = [boxes[0].k] if boxes[0].box.contains(pt) else []
        q = pt
        for box, nxt, a in zip(boxes, boxes[1:], alignments):
            if not seen or seen[-1] != box.k:
                break
            try:
                q = exact_block(schedule, q, a.code.n_hat + 1)
            except OutsideDomain:
                break
            if nxt.box.contains(q):
                seen.append(nxt.k)
        visits.append(seen)
    log_diams = [b.log_diam for b in boxes]
    return {
        "disjoint": not overlapping,
        "overlapping": overlapping,
        "visits": visits,
        "diam_decreasing": all(b < a for a, b in zip(log_diams, log_diams[1:])),
        "log_diams": [float(v) for v in log_diams],
    }


def scale_bounds(boxes, alignments, params) -> list[dict]:
    """b_k below lambda_cu1^(-2 n_hat_k) and the y-side analogue, in logs."""
    p = params
    rows = []
    for box, a in zip(boxes, alignments):
        n = a.code.n_hat
        with _ctx(LOG_BITS):
            bx = -2 * n * _ln(p.lambda_cu1)
            by = gmpy2.log(1 - 2 / mpfr(p.lambda_u)) - 2 * n * _ln(p.lambda_u)
        rows.append({"k": box.k, "b_ok": box.scales.log_b < bx, "b_bar_ok": box.scales.log_b_bar < by})
    return rows
