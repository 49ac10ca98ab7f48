"""Map constants, their dependent quantities and the admissibility ledger.

Every constant is held as an exact rational (``gmpy2.mpq``) so that each
inequality is decided without rounding.  :meth:`ParameterSet.as_float`
returns a double-precision mirror for orbit work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Iterable

from gmpy2 import mpq

__all__ = [
    "ParameterSet",
    "Constraint",
    "ValidationReport",
    "derive_constants",
    "validate",
    "reference_instance",
    "minimal_L",
    "dumps",
    "loads",
    "load",
    "save",
    "FREE_FIELDS",
    "DERIVED_FIELDS",
]

FREE_FIELDS = (
    "lambda_s", "lambda_cs0", "lambda_cs1",
    "lambda_cu1", "lambda_cu0", "lambda_u",
    "lambda_star", "mu_star", "a1", "a2", "delta", "c", "L", "r",
)
DERIVED_FIELDS = ("a_cu", "a_u", "a_s", "a_cs", "xi0", "N_u", "N_s")
INTEGER_FIELDS = ("L", "r", "N_u", "N_s")


@dataclass(frozen=True)
class ParameterSet:
    lambda_s: object
    lambda_cs0: object
    lambda_cs1: object
    lambda_cu1: object
    lambda_cu0: object
    lambda_u: object
    lambda_star: object
    mu_star: object
    a1: object
    a2: object
    delta: object
    c: object
    L: int | None = None
    r: int = 1
    a_cu: object = None
    a_u: object = None
    a_s: object = None
    a_cs: object = None
    xi0: object = None
    N_u: int | None = None
    N_s: int | None = None

    @property
    def is_derived(self) -> bool:
        return self.a_cu is not None

    @property
    def exact(self) -> bool:
        return isinstance(self.lambda_s, type(mpq(0)))

    def with_changes(self, **changes) -> "ParameterSet":
        """Copy with free fields replaced and derived fields recomputed."""
        raw = replace(self, **changes, **{k: None for k in DERIVED_FIELDS})
        return derive_constants(raw)

    def as_float(self) -> "ParameterSet":
        values = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None or f.name in INTEGER_FIELDS:
                values[f.name] = v
            else:
                values[f.name] = float(v)
        return ParameterSet(**values)

    def items(self):
        for f in fields(self):
            yield f.name, getattr(self, f.name)


def _smallest_power_at_most(base, target) -> int:
    """Smallest N >= 0 with base**N <= target, for 0 < base < 1 and target > 0."""
    if target >= 1:
        return 0
    n = max(0, math.floor(math.log(float(target)) / math.log(float(base))) - 2)
    while base ** n > target:
        n += 1
    while n > 0 and base ** (n - 1) <= target:
        n -= 1
    return n


def derive_constants(raw: ParameterSet) -> ParameterSet:
    """Populate the fixed-point coordinates, the covering proportion and the code-growth bounds.

    The growth bounds are the smallest integers above a ratio of logarithms;
    they are found by comparing exact rational powers, so no rounding enters.
    """
    one = mpq(1) if raw.exact else 1.0
    for name in ("lambda_s", "lambda_cs0", "lambda_cu0", "lambda_u"):
        v = getattr(raw, name)
        if v == 0 or v == 1:
            raise ValueError(f"{name} = {v} makes a fixed-point constant singular")

    a_cu = one / (1 - one / raw.lambda_cu0)
    a_u = one / (1 - one / raw.lambda_u)
    a_s = one / (1 - raw.lambda_s)
    a_cs = one / (1 - raw.lambda_cs0)
    xi0 = (-1 + raw.lambda_cs1 * a_s) / 3

    N_s = N_u = None
    if xi0 > 0 and 0 < raw.lambda_cs1 < 1 and raw.lambda_cu1 > 1 and raw.lambda_cs0 > 0:
        target_s = raw.lambda_cs0 ** 3 * xi0 / 8
        N_s = _smallest_power_at_most(raw.lambda_cs1, target_s)
        target_u = raw.lambda_cs0 ** 3 * xi0 / (8 * raw.lambda_cu0)
        N_u = _smallest_power_at_most(one / raw.lambda_cu1, target_u)

    return replace(raw, a_cu=a_cu, a_u=a_u, a_s=a_s, a_cs=a_cs, xi0=xi0, N_u=N_u, N_s=N_s)


@dataclass(frozen=True)
class Constraint:
    """One named inequality; ``links`` holds each (lhs, relation, rhs) it is made of."""

    name: str
    links: tuple

    @property
    def passed(self) -> bool:
        return all(_holds(l, op, r) for l, op, r in self.links)

    @property
    def critical(self) -> tuple:
        # first failing link, otherwise the link with the smallest gap
        for link in self.links:
            if not _holds(*link):
                return link
        return min(self.links, key=lambda link: abs(link[0] - link[2]))

    @property
    def lhs(self):
        return self.critical[0]

    @property
    def rhs(self):
        return self.critical[2]


def _holds(lhs, op, rhs) -> bool:
    if op == "<":
        return lhs < rhs
    if op == ">":
        return lhs > rhs
    if op == "==":
        if isinstance(lhs, float) or isinstance(rhs, float):
            return math.isclose(lhs, rhs, rel_tol=1e-12)
        return lhs == rhs
    raise ValueError(op)


@dataclass(frozen=True)
class ValidationReport:
    constraints: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.constraints)

    def __getitem__(self, name: str) -> Constraint:
        for c in self.constraints:
            if c.name == name:
                return c
        raise KeyError(name)

    def names(self) -> list[str]:
        return [c.name for c in self.constraints]

    def failed(self) -> list[str]:
        return [c.name for c in self.constraints if not c.passed]

    def verdicts(self) -> dict[str, bool]:
        return {c.name: c.passed for c in self.constraints}

    def rows(self) -> Iterable[tuple]:
        for c in self.constraints:
            yield c.name, c.passed, c.lhs, c.rhs


def validate(params: ParameterSet) -> ValidationReport:
    """Evaluate every named constraint; failures are reported, never raised."""
    if not params.is_derived:
        params = derive_constants(params)
    p = params
    ls, lc0, lc1 = p.lambda_s, p.lambda_cs0, p.lambda_cs1
    lu1, lu0, lu = p.lambda_cu1, p.lambda_cu0, p.lambda_u
    half = mpq(1, 2) if p.exact else 0.5

    star_lambda_rhs = (-2 + 1 / lu0 + p.a_u / lu1) / 4
    star_mu_rhs = (-2 + lc1 + lc1 * p.a_s) / 4
    recomputed = derive_constants(replace(p, **{k: None for k in DERIVED_FIELDS}))

    if p.N_s is None or p.L is None:
        # undefined growth bound or missing L: report as a failing comparison
        l_scale = ((0, ">", 1),)
    else:
        l_scale = ((ls ** p.L, "<", ls ** (p.N_s * p.r)),)

    table = [
        ("ordering-u", ((1, "<", lu1), (lu1, "<", 2), (2, "<", lu0), (lu0, "<", lu))),
        ("ordering-s", ((0, "<", ls), (ls, "<", lc0), (lc0, "<", half), (half, "<", lc1), (lc1, "<", 1))),
        ("cover-u", ((1 / lu0 + 1 / lu1, ">", 1),)),
        ("cover-s", ((lc0 + lc1, ">", 1),)),
        ("contraction", ((lc0 * lc1 * lu ** 2, "<", 1),)),
        ("claim-window", ((1, "<", lc0 * lu ** 2), (lc0 * lu ** 2, "<", 2))),
        ("contraction-dual", ((lu0 * lu1 * ls ** 2, "<", 1),)),
        ("star-lambda", ((1 / p.lambda_star, "<", star_lambda_rhs), (star_lambda_rhs, ">", 0))),
        ("star-mu", ((1 / p.mu_star, "<", star_mu_rhs), (star_mu_rhs, ">", 0))),
        ("tangency-params", (
            (p.a1, ">", 1 / (2 * (1 - 2 / lu))),
            (0, "<", p.a2),
            (p.a2, "<", 2 * ls / p.delta),
        )),
        ("delta-range", ((0, "<", p.delta), (p.delta, "<", 1 - 2 / lu))),
        ("blender-margin", ((lc0 + lc1, ">", 1 / (1 - p.c)),)),
        ("aux-1", ((lu * lc1, ">", 1),)),
        ("aux-2", ((lu * lc0, "<", 1),)),
        ("aux-3", ((lu1 * lc1, "<", 1),)),
        ("xi0-positive", ((p.xi0, ">", 0),)),
        ("derived-formulas", tuple(
            (getattr(p, k), "==", getattr(recomputed, k))
            for k in ("a_cu", "a_u", "a_s", "a_cs", "xi0")
        )),
        ("L-scale", l_scale),
    ]
    return ValidationReport(tuple(Constraint(name, links) for name, links in table))


def minimal_L(params: ParameterSet) -> int:
    """Smallest integer L with lambda_s**L < lambda_s**(N_s*r)."""
    if params.N_s is None:
        raise ValueError("N_s undefined: xi0 is not positive")
    return params.N_s * params.r + 1


def reference_instance() -> ParameterSet:
    raw = ParameterSet(
        lambda_s=mpq(29, 100),
        lambda_cs0=mpq(292, 1000),
        lambda_cs1=mpq(835, 1000),
        lambda_cu1=mpq(105, 100),
        lambda_cu0=mpq(201, 100),
        lambda_u=mpq(202, 100),
        lambda_star=mpq(16),
        mu_star=mpq(400),
        a1=mpq(60),
        a2=mpq(1),
        delta=mpq(9, 1000),
        c=mpq(1, 10),
        L=None,
        r=1,
    )
    p = derive_constants(raw)
    return replace(p, L=minimal_L(p))


# flat key = value text ------------------------------------------------------

def dumps(params: ParameterSet, include_derived: bool = False) -> str:
    names = FREE_FIELDS + (DERIVED_FIELDS if include_derived else ())
    lines = []
    for name in names:
        v = getattr(params, name)
        if v is None:
            continue
        lines.append(f"{name} = {v}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> ParameterSet:
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in DERIVED_FIELDS:
            continue
        if key not in FREE_FIELDS:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        values[key] = int(value) if key in INTEGER_FIELDS else mpq(value)
    missing = [k for k in FREE_FIELDS if k not in values and k not in ("L", "r")]
    if missing:
        raise ValueError(f"missing keys: {', '.join(missing)}")
    p = derive_constants(ParameterSet(**values))
    if p.L is None and p.N_s is not None:
        p = replace(p, L=minimal_L(p))
    return p


def load(path) -> ParameterSet:
    return loads(Path(path).read_text(encoding="utf-8"))


def save(params: ParameterSet, path, include_derived: bool = False) -> None:
    Path(path).write_text(dumps(params, include_derived), encoding="utf-8")
