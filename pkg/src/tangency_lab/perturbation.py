"""Smooth bump functions and the localized translation that turns F into G.

The perturbation only moves the stable coordinates of points near the
tangency, by a constant on each plateau, so that G = F o h lands every
return exactly on the next centre.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from . import boxes as bx
from . import dynamics as dyn
from .errors import InvalidL
from .intervals import Interval
from .params import minimal_L


@lru_cache(maxsize=None)
def smoothstep_coefficients(r: int) -> tuple[int, ...]:
    """Integer coefficients (constant term first) of the order-(2r+1) smoothstep on [0, 1]."""
    coeffs = [0] * (2 * r + 2)
    for k in range(r + 1):
        coeffs[r + 1 + k] = (-1) ** k * math.comb(r + k, k) * math.comb(2 * r + 1, r - k)
    return tuple(coeffs)


def _derivative(coeffs):
    return tuple(i * c for i, c in enumerate(coeffs))[1:]


def _horner(coeffs, t):
    acc = t * 0
    for c in reversed(coeffs):
        acc = acc * t + c
    return acc


def bump_base(x, r: int = 1, order: int = 0):
    """0 below -1, 1 above 0, the smoothstep polynomial in between (or its derivative)."""
    if x <= -1:
        return x * 0
    if x >= 0:
        return x * 0 + (0 if order else 1)
    coeffs = smoothstep_coefficients(r)
    for _ in range(order):
        coeffs = _derivative(coeffs)
    return _horner(coeffs, x + 1)


def base_norm(r: int) -> float:
    """Supremum of the smoothstep and its derivatives up to order r on [-1, 0]."""
    poly = np.polynomial.Polynomial(smoothstep_coefficients(r))
    best = 0.0
    for _ in range(r + 1):
        crit = [t.real for t in poly.deriv().roots() if abs(t.imag) < 1e-12 and 0 <= t.real <= 1]
        best = max(best, max(abs(poly(t)) for t in [0.0, 1.0, *crit]))
        poly = poly.deriv()
    return best


def bump_interval(rho, interval: Interval, x, r: int = 1, order: int = 0):
    """Equal to 1 on ``interval``, 0 beyond a collar of width rho*|interval|."""
    width = rho * interval.width
    left = bump_base((x - interval.lo) / width, r, order)
    right = bump_base(-(x - interval.hi) / width, r, order)
    if order == 0:
        return left + right - 1
    return (left + (-1) ** order * right) / width ** order


def collar(rho, interval: Interval) -> Interval:
    w = rho * interval.width
    return Interval(interval.lo - w, interval.hi + w)


def tau_s(params):
    return 2 * params.lambda_s / (1 - 2 * params.lambda_s)


# --- the translation schedule ---------------------------------------------------

@dataclass(frozen=True)
class Entry:
    k: int
    t: object
    t_tilde: object
    support: Interval


@dataclass(frozen=True)
class Schedule:
    """Plateau translations sorted by support, plus the base translation of the tangency branch.

    ``rigorous`` is False when L is below the value the norm bound needs.
    """

    params: object
    L: int
    entries: tuple
    base: tuple
    rigorous: bool

    @property
    def rho_s(self):
        return 1 / (3 * tau_s(self.params))

    @cached_property
    def _collars(self) -> tuple:
        return tuple(collar(self.rho_s, e.support) for e in self.entries)

    @cached_property
    def _starts(self) -> list:
        return [c.lo for c in self._collars]

    def collared(self) -> list[Interval]:
        return list(self._collars)

    def locate(self, xs):
        """The entry whose collared support holds ``xs``, if any."""
        cols = self._collars
        i = bisect.bisect_right(self._starts, xs) - 1
        if i >= 0 and cols[i].lo <= xs <= cols[i].hi:
            return self.entries[i]
        return None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "t", "t_tilde", "support_lo", "support_hi"])
        for e in self.entries:
            w.writerow([e.k, float(e.t), float(e.t_tilde), float(e.support.lo), float(e.support.hi)])
        return buf.getvalue()


def supports_disjoint(entries) -> bool:
    return all(a.hi < b.lo for a, b in zip(entries, entries[1:]))


def build_schedule(alignments, params, L: int, base=None) -> Schedule:
    """Schedule from consecutive alignments.

    The translation for index k acts where block k-1 lands: inside the stable
    cylinder of omega^(k), carried by the alignment of index k-1.
    """
    zero = params.lambda_s * 0
    entries = []
    for prev, cur in zip(alignments, alignments[1:]):
        support = bx.stable_cylinder(prev.code.omega_next, params)[0]
        entries.append(Entry(cur.k, cur.translation[0], cur.translation[1], support))
    entries.sort(key=lambda e: e.support.lo)
    if base is None:
        base = alignments[0].offset if alignments else (zero, zero)
    sched = Schedule(params, L, tuple(entries), tuple(base), L >= minimal_L(params))
    if not supports_disjoint(sched.collared()):
        raise ValueError("collared supports overlap; the plateau translations are ambiguous")
    return sched


def zero_schedule(params, L: int | None = None) -> Schedule:
    zero = params.lambda_s * 0
    L = minimal_L(params) if L is None else L
    return Schedule(params, L, (), (zero, zero), L >= minimal_L(params))


# --- h and G ----------------------------------------------------------------------

def h_map(schedule: Schedule, p):
    p_ = schedule.params
    xu, yu, xs, ys = p
    window = Interval(-p_.delta, p_.delta)
    quarter = (p_.lambda_s * 0 + 1) / 4
    near = bump_interval(quarter, window, xu, p_.r) * bump_interval(quarter, window, yu, p_.r)
    if not near:
        return p
    dx, dy = schedule.base
    entry = schedule.locate(xs)
    if entry is not None:
        plateau = bump_interval(schedule.rho_s, entry.support, xs, p_.r)
        dx, dy = dx + entry.t * plateau, dy + entry.t_tilde * plateau
    return xu, yu, xs + p_.lambda_star * near * dx, ys + near * dy / p_.mu_star


def G_map(schedule: Schedule, p):
    return dyn.F_map(h_map(schedule, p), schedule.params)


# --- the C^r budget ---------------------------------------------------------------

@dataclass(frozen=True)
class NormBudget:
    t_series: float
    t_tilde_series: float
    translation_term: float
    base_term: float

    @property
    def total(self) -> float:
        return self.translation_term + self.base_term


def norm_budget(params, L: int, base=(0, 0)) -> NormBudget:
    """Upper bound on the C^r distance of h from the identity.

    The translation term is the closed-form geometric series; the base term
    covers the constant translation of the tangency branch, which has no
    stable-coordinate bump.
    """
    p = params
    r = p.r
    ls = p.lambda_s
    if L < 1 or ls ** L >= ls ** (p.N_s * r):
        raise InvalidL(f"L = {L} does not make lambda_s^L smaller than lambda_s^(N_s r)")
    # exact in rational mode, so large L does not underflow before the sum is formed
    s_t = ls ** (2 * L) / (ls ** (p.N_s * r) * (ls ** (p.N_s * r) - ls ** L))
    s_tt = s_t / 2
    nb = base_norm(r)
    factor = float((12 * tau_s(p) / p.delta ** 2) ** r) * nb
    translation = factor * float(p.lambda_star * s_t + s_tt / p.mu_star)
    near = float((4 / p.delta ** 2) ** r) * nb
    base_term = near * float(p.lambda_star * abs(base[0]) + abs(base[1]) / p.mu_star)
    return NormBudget(float(s_t), float(s_tt), translation, base_term)
