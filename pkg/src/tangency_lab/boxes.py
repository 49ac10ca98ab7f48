"""Cylinder boxes addressed by 0/1 codes, plus the blender sub-rectangles.

Codes are plain strings over ``"01"``.  All boxes are closed-form images of
the square under compositions of affine branch inverses; iterating the map
is reserved for the membership oracles at the bottom of this module.
"""

from __future__ import annotations

import csv
import io

from . import dynamics as dyn
from .errors import EmptyCylinder
from .intervals import Box, Interval


def check_code(w: str) -> str:
    if any(ch not in "01" for ch in w):
        raise ValueError(f"code {w!r} has symbols outside 0/1")
    return w


def reverse(w: str) -> str:
    return w[::-1]


def related_children(w: str) -> tuple[str, str]:
    """The two one-symbol extensions, ordered (spare, main)."""
    return w + "0", w + "1"


def _map_box(box: Box, fn) -> Box:
    # every branch map is affine and increasing in each coordinate
    lo = fn(tuple(s.lo for s in box.sides))
    hi = fn(tuple(s.hi for s in box.sides))
    return Box.from_bounds(*zip(lo, hi))


def u_box(w: str, params) -> Box:
    box = dyn.square(params)
    for sym in reversed(check_code(w)):
        box = _map_box(box, lambda p, b=int(sym): dyn.f_contract(p, b, params))
    return box


def stable_cylinder(w: str, params) -> Box:
    """Points of the stable plane whose forward g-itinerary follows ``w``."""
    box = dyn.square(params)
    for sym in reversed(check_code(w)):
        box = _map_box(box, lambda p, b=int(sym): dyn.g_contract(p, b, params))
    return box


def s_box(w: str, params) -> Box:
    return _map_box(stable_cylinder(w, params), lambda p: dyn.f_star(p, params))


def u_box4(w: str, params) -> Box:
    return u_box(w, params) * dyn.square(params)


def s_box4(w: str, params) -> Box:
    return dyn.square(params) * stable_cylinder(w, params)


def unstable_itinerary_map(w: str, params):
    """The affine map sending u_box(w) onto the square (composition of f branches)."""
    def fn(p):
        for sym in w:
            p = dyn.f_expand(p, int(sym), params)
        return p
    return fn


def tangency_cylinder(w: str, params) -> Box:
    """Points of the u-box whose |w|-th iterate lands in the tangency box."""
    check_code(w)
    d = params.delta
    if d < 0:
        raise EmptyCylinder(f"tangency window is empty for delta = {d}")
    window = Box.from_bounds((-d, d), (-d, d))
    # f_w maps u_box(w) onto the whole square, so the preimage of the window is never cut
    inner = window
    for sym in reversed(w):
        inner = _map_box(inner, lambda p, b=int(sym): dyn.f_contract(p, b, params))
    if u_box(w, params).intersection(inner) is None:
        raise EmptyCylinder(f"code {w!r} misses the tangency box")
    return inner * dyn.square(params)


def tangency_center(w: str, params) -> tuple:
    c = tangency_cylinder(w, params).center
    zero = params.delta * 0
    return c[0], c[1], zero, zero


def tangency_image(w: str, params) -> Box:
    """Image of the tangency cylinder under |w| iterates, via its corners."""
    box = tangency_cylinder(w, params)

    def fn(p):
        for sym in w:
            p = dyn.branch_step(p, int(sym), params)
        return p

    return _map_box(box, fn)


# --- blender sub-rectangles ---------------------------------------------------

def blender_rectangles(params, variant: str = "conjugate") -> dict:
    """The frame rectangles A, A~ and the branch pieces R0, R1, R~0, R~1.

    ``conjugate`` builds each piece as the branch preimage of its frame, which
    is what the covering argument needs.  ``printed`` reproduces the branch-1
    pieces literally from the source formulas for comparison.
    """
    p = params
    c = p.c
    two = dyn._two(p)
    frame_u = Interval(-p.a_cu + c, 1 - c)
    frame_s = Interval(-p.a_cs + c, 1 - c)
    v = [dyn.expanding_box(i, p) for i in (0, 1)]
    vt = [dyn.contracting_box(i, p) for i in (0, 1)]
    r0 = Box([frame_u.affine(1 / p.lambda_cu0, -1), v[0][1]])
    rt0 = Box([vt[0][0], frame_s.affine(p.lambda_cs0, -1)])
    if variant == "conjugate":
        r1 = Box([frame_u.affine(1 / p.lambda_cu1, 1 - 1 / p.lambda_cu1), v[1][1]])
        rt1 = Box([vt[1][0], frame_s.affine(p.lambda_cs1, 1 - p.lambda_cs1)])
    elif variant == "printed":
        r1 = Box([frame_u.affine(1 / p.lambda_cu1, 1), Interval(1 - 2 / p.lambda_u, 1 + 1 / p.lambda_u)])
        rt1 = Box([Interval(1 - 2 * p.lambda_s, 1 + p.lambda_s), frame_s.affine(p.lambda_cs1, 1)])
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return {
        "A": Box([frame_u, Interval(-two, two)]),
        "A~": Box([Interval(-two, two), frame_s]),
        "R": (r0, r1),
        "R~": (rt0, rt1),
    }


def _covers(pieces, target: Interval) -> bool:
    lo, hi = sorted(pieces, key=lambda s: s.lo), target.lo
    for piece in lo:
        if piece.lo > hi:
            break
        hi = max(hi, piece.hi)
    return lo[0].lo <= target.lo and hi >= target.hi


def covering_report(params, variant: str = "conjugate") -> dict:
    rects = blender_rectangles(params, variant)
    return {
        "x_u pieces cover frame": _covers([r[0] for r in rects["R"]], rects["A"][0]),
        "y_s pieces cover frame": _covers([r[1] for r in rects["R~"]], rects["A~"][1]),
        "pieces inside branch boxes": all(
            r.subset_of(dyn.expanding_box(i, params)) for i, r in enumerate(rects["R"])
        ) and all(r.subset_of(dyn.contracting_box(i, params)) for i, r in enumerate(rects["R~"])),
    }


def restricted_u(w: str, params, variant: str = "conjugate") -> Box | None:
    """Points of A whose f-itinerary stays in the R pieces named by ``w``."""
    rects = blender_rectangles(params, variant)
    region = None
    for sym in reversed(check_code(w)):
        piece = rects["R"][int(sym)]
        if region is not None:
            region = _map_box(region, lambda p, b=int(sym): dyn.f_contract(p, b, params))
            region = region.intersection(piece)
            if region is None:
                return None
        else:
            region = piece
    if region is None:
        return rects["A"]
    return rects["A"].intersection(region)


def restricted_stable(w: str, params, variant: str = "conjugate") -> Box | None:
    rects = blender_rectangles(params, variant)
    region = None
    for sym in reversed(check_code(w)):
        piece = rects["R~"][int(sym)]
        if region is not None:
            region = _map_box(region, lambda p, b=int(sym): dyn.g_contract(p, b, params))
            region = region.intersection(piece)
            if region is None:
                return None
        else:
            region = piece
    if region is None:
        return rects["A~"]
    return rects["A~"].intersection(region)


def restricted_s(w: str, params, variant: str = "conjugate") -> Box | None:
    """The stable-side restricted rectangle, carried into the unstable plane by f_star."""
    inner = restricted_stable(w, params, variant)
    return None if inner is None else _map_box(inner, lambda p: dyn.f_star(p, params))


# --- definition-based membership ---------------------------------------------

def u_member(x, w: str, params) -> bool:
    """Iterate the map and check each itinerary box."""
    sq = dyn.square(params) * dyn.square(params)
    if not sq.contains(x):
        return False
    domains = [dyn.branch_domain(i, params) for i in (0, 1)]
    for sym in w:
        if not domains[int(sym)].contains(x):
            return False
        x = dyn.branch_step(x, int(sym), params)
    return True


def s_member(x, w: str, params) -> bool:
    sq = dyn.square(params) * dyn.square(params)
    if not sq.contains(x):
        return False
    images = [dyn.branch_image(i, params) for i in (0, 1)]
    for sym in w:
        if not images[int(sym)].contains(x):
            return False
        x = dyn.F_branch_inverse(x, int(sym), params, checked=False)
    return True


def sample_grid(box: Box, fractions=None):
    """Rational sample points placed relative to ``box``, some just outside it."""
    import itertools
    from gmpy2 import mpq

    if fractions is None:
        fractions = (mpq(-1, 16), mpq(0), mpq(1, 3), mpq(2, 3), mpq(1), mpq(17, 16))
    axes = [[s.lo + s.width * t if s.width else s.lo + t - mpq(1, 2) for t in fractions] for s in box.sides]
    return itertools.product(*axes)


# --- export -------------------------------------------------------------------

def boxes_to_csv(entries) -> str:
    """Rows (code, axis, lower, upper) for each (code, Box) pair."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["code", "axis", "lower", "upper"])
    for code, box in entries:
        for axis, side in enumerate(box.sides):
            writer.writerow([code, axis, side.lo, side.hi])
    return buf.getvalue()
