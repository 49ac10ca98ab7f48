"""Linked u/s box pairs and the code construction that keeps them linked.

A pair is tracked in normalised coordinates.  ``along`` sends the stable
box's own x-coordinate (the square side [-2, 2]) into the unstable box's
normalised x-coordinate, and ``across`` sends the unstable box's normalised
y-coordinate into the stable box's.  The pair is linked exactly when both
images of [-2, 2] sit strictly inside (-2, 2).  Extending either code, or
translating the stable box, updates these affine maps in O(1).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import gmpy2
from gmpy2 import mpq

from . import boxes as bx
from . import dynamics as dyn
from .errors import RefinementFailure
from .intervals import Box, Interval

# affine maps are (slope, offset) pairs: x -> slope*x + offset


def _compose(outer, inner):
    return outer[0] * inner[0], outer[0] * inner[1] + outer[1]


def _invert(m):
    return 1 / m[0], -m[1] / m[0]


def _image(m, lo, hi) -> Interval:
    a, b = m[0] * lo + m[1], m[0] * hi + m[1]
    return Interval(a, b) if a <= b else Interval(b, a)


def _u_branch(i, params):
    """x- and y-parts of the unstable branch i."""
    p = params
    if i == 0:
        return (p.lambda_cu0, p.lambda_cu0), (p.lambda_u, p.lambda_u)
    return (p.lambda_cu1, 1 - p.lambda_cu1), (p.lambda_u, -p.lambda_u)


def _s_branch(j, params):
    """x- and y-parts of the stable contraction j."""
    p = params
    if j == 0:
        return (p.lambda_s, -1 + p.lambda_s * 0), (p.lambda_cs0, -1 + p.lambda_s * 0)
    return (p.lambda_s, 1 + p.lambda_s * 0), (p.lambda_cs1, 1 - p.lambda_cs1)


# --- predicates on explicit boxes -------------------------------------------

def is_linked(s: Box, u: Box) -> bool:
    return (s.intersects(u)
            and s[0].inside_interior_of(u[0])
            and u[1].inside_interior_of(s[1]))


def is_proportional(s: Box, u: Box, kappa) -> bool:
    return kappa * u.norm < s.norm <= u.norm


# --- pairs in normalised coordinates ----------------------------------------

@dataclass(frozen=True)
class Pair:
    u_code: str
    s_code: str
    along: tuple
    across: tuple
    u_widths: tuple
    s_widths: tuple
    shift: tuple
    params: object = field(repr=False, compare=False)

    @classmethod
    def from_codes(cls, u_code: str, s_code: str, params, shift=None) -> "Pair":
        p = params
        zero = p.lambda_s * 0
        pair = cls("", "", (p.lambda_s * 0 + 1, zero), (p.lambda_s * 0 + 1, zero),
                   (zero + 4, zero + 4), (zero + 4, zero + 4), (zero, zero), p)
        # the empty pair still needs f_star between the planes
        star_x = (1 / p.lambda_star, 1 - p.a_s / p.lambda_star)
        star_y = (p.mu_star, p.a_u - p.mu_star)
        pair = replace(pair, along=star_x, across=_invert(star_y),
                       s_widths=(4 / p.lambda_star, 4 * p.mu_star))
        for sym in u_code:
            pair = pair.extend_u(int(sym), checked=False)
        for sym in s_code:
            pair = pair.extend_s(int(sym), checked=False)
        if shift is not None:
            pair = pair.shifted(shift)
        return pair

    # geometry
    @property
    def J(self) -> Interval:
        return _image(self.along, -2, 2)

    @property
    def J_prime(self) -> Interval:
        return _image(self.across, -2, 2)

    @property
    def linked(self) -> bool:
        return self.J.inside_interior_of(Interval(-2, 2)) and self.J_prime.inside_interior_of(Interval(-2, 2))

    @property
    def u_norm(self):
        return max(self.u_widths)

    @property
    def s_norm(self):
        return max(self.s_widths)

    @property
    def ratio(self):
        return self.s_norm / self.u_norm

    def proportional(self, kappa) -> bool:
        return kappa * self.u_norm < self.s_norm <= self.u_norm

    # moves
    def can_extend_u(self, i: int) -> bool:
        return self.J.inside_interior_of(dyn.expanding_box(i, self.params)[0])

    def can_extend_s(self, j: int) -> bool:
        return self.J_prime.inside_interior_of(dyn.contracting_box(j, self.params)[1])

    def extend_u(self, i: int, checked: bool = True) -> "Pair":
        if checked and not self.can_extend_u(i):
            raise RefinementFailure(f"u-symbol {i} breaks the link of {self.u_code!r}")
        bx_, by_ = _u_branch(i, self.params)
        slope_x = bx_[0]
        return replace(
            self,
            u_code=self.u_code + str(i),
            along=_compose(bx_, self.along),
            across=_compose(self.across, _invert(by_)),
            u_widths=(self.u_widths[0] / slope_x, self.u_widths[1] / by_[0]),
        )

    def extend_s(self, j: int, checked: bool = True) -> "Pair":
        if checked and not self.can_extend_s(j):
            raise RefinementFailure(f"s-symbol {j} breaks the link of {self.s_code!r}")
        cx, cy = _s_branch(j, self.params)
        return replace(
            self,
            s_code=self.s_code + str(j),
            along=_compose(self.along, cx),
            across=_compose(_invert(cy), self.across),
            s_widths=(self.s_widths[0] * cx[0], self.s_widths[1] * cy[0]),
        )

    def shifted(self, delta) -> "Pair":
        """Translate the stable box by ``delta`` in the unstable plane."""
        dx, dy = delta
        along = (self.along[0], self.along[1] + 4 / self.u_widths[0] * dx)
        across = (self.across[0], self.across[1] - 4 / self.s_widths[1] * dy)
        return replace(self, along=along, across=across,
                       shift=(self.shift[0] + dx, self.shift[1] + dy))

    def children(self) -> tuple["Pair", "Pair"]:
        """(spare, main): both codes extended by 0, and both by 1."""
        return (self.extend_u(0, False).extend_s(0, False),
                self.extend_u(1, False).extend_s(1, False))

    # explicit boxes, for verification and export
    def u_box(self) -> Box:
        return bx.u_box(self.u_code, self.params)

    def s_box(self) -> Box:
        return bx.s_box(self.s_code, self.params).shifted(self.shift)


def seed_pair(params) -> Pair:
    return Pair.from_codes("1", "1", params)


# --- the one-step refinement of the covering argument -------------------------

def _pick(interval: Interval, sides) -> int | None:
    for i, side in enumerate(sides):
        if interval.inside_interior_of(side):
            return i
    return None


def refine_linked(pair: Pair) -> Pair:
    """Append one stable symbol and one unstable symbol (two after a stable 0).

    Each symbol is the first covering piece (restricted rectangles R~_j for
    J', R_i for J) that absorbs the current interval, so the new interval
    lands back in the frame.  A pair whose interval lies outside the frame,
    such as the seed, falls back to the full branch boxes.  Ties go to 0.
    """
    p = pair.params
    rects = bx.blender_rectangles(p)
    s_sides = [r[1] for r in rects["R~"]]
    u_sides = [r[0] for r in rects["R"]]
    j = _pick(pair.J_prime, s_sides)
    if j is None:
        j = _pick(pair.J_prime, [dyn.contracting_box(i, p)[1] for i in (0, 1)])
    if j is None:
        raise RefinementFailure(f"no stable symbol keeps {pair.s_code!r} linked")
    nxt = pair.extend_s(j)
    for _ in range(2 if j == 0 else 1):
        i = _pick(nxt.J, u_sides)
        if i is None:
            i = _pick(nxt.J, [dyn.expanding_box(i, p)[0] for i in (0, 1)])
        if i is None:
            raise RefinementFailure(f"no unstable symbol keeps {nxt.u_code!r} linked")
        nxt = nxt.extend_u(i)
    return nxt


def refine_until(pair: Pair, ceiling) -> Pair:
    """Repeat ``refine_linked`` until the stable norm drops to ``ceiling`` or below."""
    while pair.s_norm > ceiling:
        pair = refine_linked(pair)
    return pair


# --- search for a pair with prescribed sizes ----------------------------------

@dataclass(frozen=True)
class Target:
    """Stable-norm window and ratio band a search must land in."""

    lo: object
    hi: object
    hi_inclusive: bool
    band_lo: object
    band_hi: object

    def window_ok(self, norm) -> bool:
        return self.lo <= norm and (norm <= self.hi if self.hi_inclusive else norm < self.hi)

    def above(self, norm) -> bool:
        return norm > self.hi if self.hi_inclusive else norm >= self.hi


def linking_translation(pair: Pair):
    """Extra stable translation that links both children, or None.

    Each child constrains the x-translation through its ``along`` image and
    the y-translation through its ``across`` image; the result is the centre
    of the common open interval on each axis.
    """
    x_lo = y_lo = None
    for child in pair.children():
        J, Jp = child.J, child.J_prime
        ux, sy = child.u_widths[0], child.s_widths[1]
        lo, hi = (-2 - J.lo) * ux / 4, (2 - J.hi) * ux / 4
        x_lo, x_hi = (lo, hi) if x_lo is None else (max(x_lo, lo), min(x_hi, hi))
        lo, hi = (Jp.hi - 2) * sy / 4, (Jp.lo + 2) * sy / 4
        y_lo, y_hi = (lo, hi) if y_lo is None else (max(y_lo, lo), min(y_hi, hi))
    if x_lo >= x_hi or y_lo >= y_hi:
        return None
    return (x_lo + x_hi) / 2, (y_lo + y_hi) / 2


def _terminal(node: Pair, target: Target, accept) -> bool:
    kappa = 1 / node.params.lambda_cu0
    return (node.linked and target.band_lo < node.ratio <= target.band_hi
            and target.window_ok(node.s_norm) and node.proportional(kappa)
            and (accept is None or accept(node)))


def _shadow_bits(pair: Pair, target: Target) -> tuple[int, int]:
    """A typical and a worst-case precision for the multiprecision search.

    Each unstable step at most doubles an error in J and each stable step
    nearly does so in J'; the worst case assumes every step uses the
    slowest rate.
    """
    p = pair.params
    shrink = math.log(float(pair.s_norm) / float(target.lo)) + math.log(2)
    typical = int(128 + 4 * shrink / math.log(2))
    n_u = shrink / math.log(float(p.lambda_cu1)) + 4
    n_s = shrink / -math.log(float(p.lambda_cs1)) + 4
    worst = int(128 + n_u * math.log2(float(p.lambda_cu0)) + n_s * -math.log2(float(p.lambda_cs0)))
    return typical, max(typical, worst)


def _shadow(pair: Pair, fp) -> Pair:
    conv = lambda v: tuple(gmpy2.mpfr(x) for x in v)
    return replace(pair, along=conv(pair.along), across=conv(pair.across), u_widths=conv(pair.u_widths),
                   s_widths=conv(pair.s_widths), shift=conv(pair.shift), params=fp)


def _mpfr_params(params):
    return replace(params, **{k: gmpy2.mpfr(v) for k, v in params.items()
                              if v is not None and not isinstance(v, int)})


def steer(pair: Pair, target: Target, budget: int = 200_000, accept=None) -> Pair:
    """Depth-first search over code extensions, roomiest child first.

    Only extensions that keep the pair linked are explored, so every node is
    a linked pair at the pair's current translation.  ``accept`` is an extra
    test a candidate in the window must pass.  Exact pairs are searched in
    multiprecision floating point first, with enough bits to survive the
    expansion; the symbols found are replayed exactly and the result is
    checked exactly, and the exact search runs only if that check fails.
    """
    if pair.params.exact:
        bits, worst = _shadow_bits(pair, target)
        while True:
            node = _shadow_search(pair, target, budget, accept, bits)
            if node is not None:
                return node
            if bits >= worst:
                break
            bits = min(2 * bits, worst)
    return _steer(pair, target, budget, accept)


def _shadow_search(pair: Pair, target: Target, budget: int, accept, bits: int):
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        shadow = _shadow(pair, _mpfr_params(pair.params))
        try:
            found = _steer(shadow, target, budget, accept)
        except RefinementFailure:
            return None
    # nesting comes from the codes; only the final pair has to be linked
    node = pair
    for sym in found.u_code[len(pair.u_code):]:
        node = node.extend_u(int(sym), checked=False)
    for sym in found.s_code[len(pair.s_code):]:
        node = node.extend_s(int(sym), checked=False)
    return node if _terminal(node, target, accept) else None


def _steer(pair: Pair, target: Target, budget: int, accept) -> Pair:
    kappa = 1 / pair.params.lambda_cu0
    stack = [iter([pair])]
    nodes = 0
    while stack:
        try:
            node = next(stack[-1])
        except StopIteration:
            stack.pop()
            continue
        nodes += 1
        if nodes > budget:
            raise RefinementFailure(f"search budget of {budget} nodes exhausted")
        s_norm = node.s_norm
        if s_norm < target.lo:
            continue
        ratio = node.ratio
        in_band = target.band_lo < ratio <= target.band_hi
        if in_band and target.window_ok(s_norm) and node.proportional(kappa):
            if accept is None or accept(node):
                return node
        stack.append(_moves(node, ratio, in_band, target.above(s_norm), target))
    raise RefinementFailure("no linked refinement reaches the target window")


def room(pair: Pair):
    """Distance of J and J' from the points they can never come back from.

    Under the branch-1 maps everything right of the fixed point 1 drifts out
    of the square; the lower ends are the left edges of the branch-0 boxes.
    """
    p = pair.params
    J, Jp = pair.J, pair.J_prime
    return min(J.lo + 1 + 2 / p.lambda_cu0, 1 - J.hi, Jp.lo + 1 + 2 * p.lambda_cs0, 1 - Jp.hi)


def _moves(node: Pair, ratio, in_band: bool, too_big: bool, target: Target):
    # roomier children first; a narrow corridor near 1 is a dead end
    def u_moves():
        kids = [node.extend_u(i, False) for i in (0, 1) if node.can_extend_u(i)]
        return iter(sorted(kids, key=room, reverse=True))

    def s_moves():
        kids = [node.extend_s(j, False) for j in (0, 1) if node.can_extend_s(j)]
        return iter(sorted(kids, key=room, reverse=True))

    if ratio <= target.band_lo:
        yield from u_moves()
    elif ratio > target.band_hi or too_big:
        yield from s_moves()
    else:
        yield from u_moves()
        yield from s_moves()


def _sup(v):
    return max(abs(v[0]), abs(v[1]))


# --- the inductive linked sequence --------------------------------------------

@dataclass(frozen=True)
class LinkedState:
    """Generation ``k``: the searched pair, its two children and the translations.

    ``parent`` is stored untranslated by ``step_delta``; ``main`` and
    ``spare`` already carry the accumulated translation ``delta_accum``.
    """

    k: int
    parent: Pair
    main: Pair
    spare: Pair
    step_delta: tuple
    delta_accum: tuple
    window: tuple

    @property
    def u_code(self) -> str:
        return self.main.u_code

    @property
    def s_code(self) -> str:
        return self.main.s_code

    def u_box(self) -> Box:
        return self.main.u_box()

    def s_box(self) -> Box:
        return self.main.s_box()


def generation_band(params):
    """Ratio band where a pair and both of its children are proportional."""
    p = params
    lo = max(1 / p.lambda_cu0,
             1 / (p.lambda_cu0 ** 2 * p.lambda_cs0),
             1 / (p.lambda_cu0 * p.lambda_cu1 * p.lambda_cs1))
    hi = min(mpq(1) if p.exact else 1.0,
             1 / (p.lambda_cu1 * p.lambda_cs1),
             1 / (p.lambda_cs0 * p.lambda_cu0))
    return lo, hi


def step_bound(params, eps, k: int):
    """Upper bound on the sup-norm of the k-th translation step."""
    p = params
    return (p.lambda_cs0 ** 2 * p.xi0 / 8) ** (k - 1) * eps / 2


def build_linked_sequence(params, eps, k_max: int, budget: int = 200_000) -> list[LinkedState]:
    """Generations 1..k_max of linked, proportional pairs.

    Generation 1 refines the seed pair into the window set by ``eps``; each
    later generation refines the spare child of the previous one into the
    window set by that child's stable norm.  After each search the stable
    boxes are translated by the centring step of ``linking_translation`` so
    that both children are linked.
    """
    p = params
    eps = mpq(eps) if p.exact else float(eps)
    band_lo, band_hi = generation_band(p)
    out: list[LinkedState] = []
    start = seed_pair(p)
    target = Target(p.lambda_cs0 ** 2 / 2 * eps, p.lambda_cs0 / 2 * eps, False, band_lo, band_hi)
    for k in range(1, k_max + 1):
        if k > 1:
            base = out[-1].spare.s_norm
            target = Target(p.lambda_cs0 ** 2 * p.xi0 / 8 * base, p.lambda_cs0 * p.xi0 / 8 * base, True,
                            band_lo, band_hi)
        bound = step_bound(p, eps, k)

        def accept(node, bound=bound):
            step = linking_translation(node)
            return step is not None and _sup(step) < bound

        try:
            parent = steer(start, target, budget, accept)
        except RefinementFailure as exc:
            raise RefinementFailure(str(exc), generation=k) from None
        step = linking_translation(parent)
        spare, main = parent.shifted(step).children()
        out.append(LinkedState(k, parent, main, spare, step, main.shift, (target.lo, target.hi)))
        start = spare
    return out


def stability_report(states: list[LinkedState]) -> list[bool]:
    """Whether each main pair is still linked under the final accumulated translation."""
    final = states[-1].delta_accum
    out = []
    for st in states:
        extra = (final[0] - st.delta_accum[0], final[1] - st.delta_accum[1])
        out.append(st.main.shifted(extra).linked)
    return out


def growth_report(states: list[LinkedState]) -> list[tuple[int, int]]:
    return [(b.main.u_code.__len__() - a.main.u_code.__len__(),
             len(b.main.s_code) - len(a.main.s_code)) for a, b in zip(states, states[1:])]


def first_difference(a: str, b: str) -> int:
    """1-based position where two codes first differ (length+1 if one is a prefix)."""
    for n, (x, y) in enumerate(zip(a, b), 1):
        if x != y:
            return n
    return min(len(a), len(b)) + 1


def construction_log(states: list[LinkedState]) -> str:
    """CSV log: codes, box corners, translation sizes and the search window per generation."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "u_code", "s_code", "u_x_lo", "u_x_hi", "u_y_lo", "u_y_hi",
                "s_x_lo", "s_x_hi", "s_y_lo", "s_y_hi", "step_delta", "delta_accum", "window_lo", "window_hi"])
    for st in states:
        corners = [float(v) for box in (st.u_box(), st.s_box()) for side in box.sides for v in (side.lo, side.hi)]
        w.writerow([st.k, st.u_code, st.s_code, *corners,
                    float(_sup(st.step_delta)), float(_sup(st.delta_accum)),
                    float(st.window[0]), float(st.window[1])])
    return buf.getvalue()


# --- gamma codes and centre alignment -----------------------------------------

@dataclass(frozen=True)
class GammaCode:
    alpha: str
    u_free: str
    omega_next: str

    @property
    def gamma(self) -> str:
        return self.alpha + self.u_free + self.omega_next[::-1]

    @property
    def n_hat(self) -> int:
        return len(self.gamma)

    @property
    def n_hat0(self) -> int:
        return self.gamma.count("0")

    @property
    def n_hat1(self) -> int:
        return self.gamma.count("1")

    @property
    def majority(self) -> bool:
        return self.n_hat1 <= self.n_hat0


def length_constant(params) -> float:
    """C with |alpha| + |omega| < C L k, from the norm windows of the fine pairs."""
    p = params
    l_cu1 = math.log(float(p.lambda_cu1))
    l_cs1 = -math.log(float(p.lambda_cs1))
    l_s = -math.log(float(p.lambda_s))
    c1 = math.log(8 / float(p.lambda_cs0) ** 2) / l_cu1
    c2 = math.log(8 * float(p.mu_star) / float(p.lambda_cs0) ** 2) / l_cs1
    return c1 + c2 + l_s / l_cu1 + 2 * l_s / l_cs1


def fine_pair(state: LinkedState, L: int, offset=None, budget: int = 400_000) -> Pair:
    """Refine a main pair to stable norm in [lcs0^2/2, lcs0/2) * lambda_s^(L k).

    The refinement is linked under ``offset`` (default: the state's own
    accumulated translation), the base translation of the tangency branch.
    """
    p = state.main.params
    pair = state.main
    if offset is not None:
        pair = pair.shifted((offset[0] - pair.shift[0], offset[1] - pair.shift[1]))
    if not pair.linked:
        raise RefinementFailure("main pair is not linked under the base translation", generation=state.k)
    scale = p.lambda_s ** (L * state.k)
    target = Target(p.lambda_cs0 ** 2 / 2 * scale, p.lambda_cs0 / 2 * scale, False,
                    1 / p.lambda_cu0, mpq(1) if p.exact else 1.0)
    try:
        return steer(pair, target, budget)
    except RefinementFailure as exc:
        raise RefinementFailure(str(exc), generation=state.k) from None


@dataclass(frozen=True)
class Alignment:
    """Index k: the gamma code, its centre and the translation landing on that centre.

    ``translation`` is measured on top of ``offset``, the fixed translation of
    the tangency branch inherited from the linked sequence.
    """

    k: int
    code: GammaCode
    translation: tuple
    center: tuple
    offset: tuple


def _u_center(code: str, params):
    c = bx.u_box(code, params).center
    zero = params.lambda_s * 0
    return c[0], c[1], zero, zero


def build_gamma(k: int, u_free: str, fine: dict, params, prev_gamma: str | None, offset=None):
    """Assemble gamma^(k) and the translation aligning its centre.

    ``fine`` maps generation index to its fine pair.  Returns the gamma code,
    the translation for index k (zero for k = 1) and the centre c_k.
    """
    zero = params.lambda_s * 0
    offset = offset or (zero, zero)
    code = GammaCode(fine[k].u_code, bx.check_code(u_free), fine[k + 1].s_code)
    center = _u_center(code.gamma, params)
    if prev_gamma is None:
        translation = (zero, zero)
    else:
        landing = bx.s_box(prev_gamma[::-1], params).center
        translation = (center[0] - landing[0] - offset[0], center[1] - landing[1] - offset[1])
    return code, translation, center


def build_alignments(params, L: int, u_codes, eps=mpq(1, 1000), states=None) -> list[Alignment]:
    """gamma codes for k = 1..len(u_codes) with their translations and centres."""
    k_max = len(u_codes)
    if states is None:
        states = build_linked_sequence(params, eps, k_max + 1)
    offset = states[-1].delta_accum
    fine = {st.k: fine_pair(st, L, offset) for st in states[: k_max + 1]}
    out = []
    prev = None
    for k in range(1, k_max + 1):
        code, translation, center = build_gamma(k, u_codes[k - 1], fine, params, prev, offset)
        out.append(Alignment(k, code, translation, center, offset))
        prev = code.gamma
    return out


def return_residual(alignments: list[Alignment], params):
    """c_{k+1} minus F^(n_hat+1)(c_k), iterating the map with the base translation."""
    out = []
    for a, b in zip(alignments, alignments[1:]):
        x = a.center
        for _ in range(a.code.n_hat + 1):
            x = dyn.F_map(x, params, a.offset)
        out.append(tuple(cb - xb for cb, xb in zip(b.center, x)))
    return out


def scale_separation(alignments: list[Alignment], params, L: int) -> list[dict]:
    """First-difference positions of consecutive codes and the gap they leave.

    For each k with both neighbours available: ``m`` where the alpha codes
    split, ``n`` where the omega codes split, the stable-cylinder gap
    lambda_s^n (1 - 2 lambda_s) at that depth and the translation bound
    lambda_s^(L k) it has to dominate.
    """
    p = params
    out = []
    for prev, cur, nxt in zip(alignments, alignments[1:], alignments[2:]):
        k = cur.k
        n = first_difference(prev.code.omega_next, cur.code.omega_next)
        gap = p.lambda_s ** n * (1 - 2 * p.lambda_s)
        bound = p.lambda_s ** (L * k)
        out.append({"k": k, "m": first_difference(cur.code.alpha, nxt.code.alpha), "n": n,
                    "gap": gap, "bound": bound, "separated": gap > bound})
    return out
