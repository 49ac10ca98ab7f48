"""Planar expanding maps, the tangency projection and the piecewise 4D map.

Points are plain tuples.  Every function works in whichever arithmetic the
parameter set carries: exact rationals for a ``ParameterSet`` built from
``mpq`` values, doubles for ``params.as_float()``.
"""

from __future__ import annotations

import enum

from .errors import DomainViolation, OutsideDomain
from .intervals import Box, Interval


class Region(enum.Enum):
    V0 = "V0"
    V1 = "V1"
    VStar = "VStar"
    Outside = "Outside"


def _two(params):
    # 2 in the arithmetic of the parameter set
    return params.lambda_s * 0 + 2


def square(params) -> Box:
    two = _two(params)
    return Box.from_bounds((-two, two), (-two, two))


def expanding_box(branch: int, params) -> Box:
    """Domain of the unstable-plane branch ``branch``."""
    p = params
    if branch == 0:
        return Box.from_bounds((-1 - 2 / p.lambda_cu0, -1 + 2 / p.lambda_cu0),
                               (-1 - 2 / p.lambda_u, -1 + 2 / p.lambda_u))
    return Box.from_bounds((1 - 3 / p.lambda_cu1, 1 + 1 / p.lambda_cu1),
                           (1 - 2 / p.lambda_u, 1 + 2 / p.lambda_u))


def contracting_box(branch: int, params) -> Box:
    """Domain of the stable-plane branch ``branch`` (image of the 4D branch)."""
    p = params
    if branch == 0:
        return Box.from_bounds((-1 - 2 * p.lambda_s, -1 + 2 * p.lambda_s),
                               (-1 - 2 * p.lambda_cs0, -1 + 2 * p.lambda_cs0))
    return Box.from_bounds((1 - 2 * p.lambda_s, 1 + 2 * p.lambda_s),
                           (1 - 3 * p.lambda_cs1, 1 + p.lambda_cs1))


def branch_domain(branch: int, params) -> Box:
    return expanding_box(branch, params) * square(params)


def branch_image(branch: int, params) -> Box:
    return square(params) * contracting_box(branch, params)


def tangency_domain(params) -> Box:
    d = params.delta
    return Box.from_bounds((-d, d), (-d, d)) * square(params)


def region_of(p, params) -> Region:
    for branch, tag in ((0, Region.V0), (1, Region.V1)):
        if branch_domain(branch, params).contains(p):
            return tag
    if tangency_domain(params).contains(p):
        return Region.VStar
    return Region.Outside


# --- planar maps ------------------------------------------------------------

def f_expand(p, branch: int, params, checked: bool = False):
    if checked and not expanding_box(branch, params).contains(p):
        raise DomainViolation(f"{p} not in unstable branch {branch}")
    x, y = p
    if branch == 0:
        return params.lambda_cu0 * (x + 1), params.lambda_u * (y + 1)
    return params.lambda_cu1 * (x - 1) + 1, params.lambda_u * (y - 1)


def f_contract(p, branch: int, params):
    """Inverse of ``f_expand`` on one branch."""
    x, y = p
    if branch == 0:
        return x / params.lambda_cu0 - 1, y / params.lambda_u - 1
    return (x - 1) / params.lambda_cu1 + 1, y / params.lambda_u + 1


def g_expand(p, branch: int, params, checked: bool = False):
    # branch 1 is the exact inverse of the stable part of the 4D map, so that
    # both branches send their box onto the full square
    if checked and not contracting_box(branch, params).contains(p):
        raise DomainViolation(f"{p} not in stable branch {branch}")
    x, y = p
    if branch == 0:
        return (x + 1) / params.lambda_s, (y + 1) / params.lambda_cs0
    return (x - 1) / params.lambda_s, (y - 1) / params.lambda_cs1 + 1


def g_contract(p, branch: int, params):
    x, y = p
    if branch == 0:
        return params.lambda_s * x - 1, params.lambda_cs0 * y - 1
    return params.lambda_s * x + 1, params.lambda_cs1 * (y - 1) + 1


def f_star(p, params):
    x, y = p
    return (x - params.a_s) / params.lambda_star + 1, params.mu_star * (y - 1) + params.a_u


def f_star_inverse(p, params):
    x, y = p
    return params.lambda_star * (x - 1) + params.a_s, (y - params.a_u) / params.mu_star + 1


# --- the 4D map -------------------------------------------------------------

def tangency_step(p, params, offset=None):
    """The quadratic branch; ``offset`` translates its unstable-plane output."""
    xu, yu, xs, ys = p
    out_x = -xu * xu + (xs - params.a_s) / params.lambda_star + 1
    out_y = -params.a1 * yu * yu + params.mu_star * (ys - 1) + params.a_u
    if offset is not None:
        out_x, out_y = out_x + offset[0], out_y + offset[1]
    return out_x, out_y, params.a2 * xu, yu


def branch_step(p, branch: int, params):
    return f_expand(p[:2], branch, params) + g_contract(p[2:], branch, params)


def F_map(p, params, offset=None):
    region = region_of(p, params)
    if region is Region.V0:
        return branch_step(p, 0, params)
    if region is Region.V1:
        return branch_step(p, 1, params)
    if region is Region.VStar:
        return tangency_step(p, params, offset)
    raise OutsideDomain(f"{p} lies outside every branch", point=p)


def F_branch_inverse(p, branch: int, params, checked: bool = True):
    if checked and not branch_image(branch, params).contains(p):
        raise DomainViolation(f"{p} not in the image of branch {branch}")
    return f_contract(p[:2], branch, params) + g_expand(p[2:], branch, params)


def fixed_points(params):
    """The saddle fixed points in the branch-0 and branch-1 boxes."""
    p = params
    return (-p.a_cu, -p.a_u, -p.a_s, -p.a_cs), (p.lambda_s * 0 + 1, p.a_u, p.a_s, p.lambda_s * 0 + 1)


def orbit(p, params, steps: int):
    """Forward orbit of length ``steps + 1``; stops with OutsideDomain carrying the step."""
    out = [p]
    for k in range(steps):
        try:
            p = F_map(p, params)
        except OutsideDomain as exc:
            raise OutsideDomain(str(exc), point=p, step=k) from None
        out.append(p)
    return out


# --- the tangency rectangle -------------------------------------------------

def star_rectangle(params, centered: bool = False) -> Box:
    """Rectangle in the stable plane seeding the linking iteration.

    The default is symmetric about y_s = 1; ``centered`` recentres it so its
    image under ``f_star`` spans the full y_u side.
    """
    two = _two(params)
    if centered:
        mid = 1 - params.a_u / params.mu_star
        half = two / params.mu_star
    else:
        mid = two / 2
        half = (two - params.a_u) / params.mu_star
    return Box([Interval(-two, two), Interval(mid - half, mid + half)])


def _increasing_image(rect: Box, fn) -> Box:
    # every planar map here is affine, coordinate-wise and increasing
    lo = fn((rect[0].lo, rect[1].lo))
    hi = fn((rect[0].hi, rect[1].hi))
    return Box.from_bounds((lo[0], hi[0]), (lo[1], hi[1]))


def star_image(rect: Box, params) -> Box:
    return _increasing_image(rect, lambda p: f_star(p, params))


def _seed_relations(rect: Box, image: Box, params) -> dict:
    full = Interval(-_two(params), _two(params))
    return {
        "y_s inside stable branch 1": rect[1].inside_interior_of(contracting_box(1, params)[1]),
        "x_s spans square": rect[0] == full,
        "x_u inside unstable branch 1": image[0].inside_interior_of(expanding_box(1, params)[0]),
        "y_u spans square": image[1] == full,
    }


def star_inclusions(params, centered: bool = False) -> dict:
    """Which of the four seed relations hold for the chosen rectangle."""
    rect = star_rectangle(params, centered)
    return _seed_relations(rect, star_image(rect, params), params)


def star_chain(params, n_max: int, centered: bool = False) -> list[dict]:
    """Iterate the seed rectangle through branch 1 and report the seed relations at each step.

    Step n+1 keeps the part of R_n that stays in stable branch 1 and whose
    image lands in unstable branch 1, pushes it forward by the stable
    expansion, and conjugates the map by one step of each branch.  Row n
    holds the relations for (R_n, f_n) with R_0 the seed rectangle.  The
    chain stops early if the kept part is empty.
    """
    fwd = [lambda p: f_star(p, params)]
    inv = [lambda p: f_star_inverse(p, params)]
    rect = star_rectangle(params, centered)
    rows = []
    for n in range(n_max + 1):
        f_n, f_n_inv = fwd[-1], inv[-1]
        rel = _seed_relations(rect, _increasing_image(rect, f_n), params)
        rows.append({"n": n, "rect": rect, **rel, "holds": all(rel.values())})
        if n == n_max:
            break
        kept = _increasing_image(expanding_box(1, params), f_n_inv).intersection(rect)
        kept = kept and kept.intersection(contracting_box(1, params))
        if kept is None:
            break
        rect = _increasing_image(kept, lambda p: g_expand(p, 1, params))
        fwd.append(lambda p, f=f_n: f_expand(f(g_contract(p, 1, params)), 1, params))
        inv.append(lambda p, f=f_n_inv: g_expand(f(f_contract(p, 1, params)), 1, params))
    return rows


def star_inclusions(params, centered: bool = False) -> dict:
    """Which of the four seed relations hold for the chosen rectangle."""
    rect = star_rectangle(params, centered)
    image = star_image(rect, params)
    full = Interval(-_two(params), _two(params))
    return {
        "y_s inside stable branch 1": rect[1].inside_interior_of(contracting_box(1, params)[1]),
        "x_s spans square": rect[0] == full,
        "x_u inside unstable branch 1": image[0].inside_interior_of(expanding_box(1, params)[0]),
        "y_u spans square": image[1] == full,
    }
