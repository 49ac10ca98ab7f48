import csv
import io
import math
import random
from fractions import Fraction as Fr

import gmpy2
import pytest
from gmpy2 import mpfr, mpq
from hypothesis import assume, given, settings, strategies as st

from tangency_lab import boxes as bx
from tangency_lab import perturbation as pt
from tangency_lab import wandering as W
from tangency_lab.errors import InsufficientDepth
from tangency_lab.linking import GammaCode


def synthetic(a0, c, count):
    """Codes with n_hat0 = a0 + j^2 and n_hat1 = c for j = 1..count."""
    return [GammaCode("0" * (a0 + j * j), "", "1" * c) for j in range(1, count + 1)]


def closed_form(a0, c, k):
    # sum over i >= 0 of (a0 + (k + i)^2) / 2^i, using sum i/2^i = 2 and sum i^2/2^i = 6
    return 2 * a0 + 2 * k * k + 4 * k + 6, 2 * c


@pytest.fixture(scope="module")
def schedule(ref, square_alignments):
    return pt.build_schedule(square_alignments, ref, ref.L)


@pytest.fixture(scope="module")
def boxes(ref, square_alignments):
    return W.build_boxes(square_alignments, ref)


def offsets(alignment, ref, count, seed):
    rng = random.Random(seed)
    hx, hy = W.tangency_offsets(alignment, ref)

    def frac():
        return mpq(rng.randint(-1000, 1000), 1000)

    return [(hx * frac(), hy * frac(), 2 * frac(), 2 * frac()) for _ in range(count)]


# --- exponent sums and scales ---------------------------------------------------

@pytest.mark.parametrize("a0,c,k", [(40, 3, 1), (100, 0, 2), (7, 11, 3)])
def test_exponent_sums_approach_closed_form(a0, c, k):
    gammas = synthetic(a0, c, 120)
    s0, s1, s = W.exponent_sums(gammas, k, 120)
    want0, want1 = closed_form(a0, c, k)
    assert abs(Fr(int(s0.numerator), int(s0.denominator)) - want0) < Fr(1, 10 ** 20)
    assert abs(Fr(int(s1.numerator), int(s1.denominator)) - want1) < Fr(1, 10 ** 20)
    assert s == s0 + s1


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=30, max_value=300), st.integers(min_value=0, max_value=20),
       st.integers(min_value=1, max_value=4), st.integers(min_value=4, max_value=25))
def test_tail_bound_dominates_true_remainder(a0, c, k, depth):
    gammas = synthetic(a0, c, k + depth)
    end = k + depth
    # the bound presumes later length ratios stay below the largest one seen
    n = [a0 + j * j + c for j in range(1, end + 400)]
    ratios = [Fr(n[j], n[j - 1]) for j in range(k, len(n))]
    assume(max(ratios[end - k:]) <= max(ratios[:end - k]))
    s0, s1, _ = W.exponent_sums(gammas, k, end)
    want0, want1 = closed_form(a0, c, k)
    remainder = (want0 + want1) - Fr(int((s0 + s1).numerator), int((s0 + s1).denominator))
    bound = W.tail_bound(gammas, k, end)
    assert bound is not None
    assert Fr(int(bound.numerator), int(bound.denominator)) >= remainder > 0


def test_tail_bound_none_when_lengths_double():
    gammas = [GammaCode("0" * 2 ** j, "", "") for j in range(1, 8)]
    assert W.tail_bound(gammas, 1, 7) is None


def test_certified_scales_match_closed_form(ref):
    a0, c, k = 50, 2, 1
    sc = W.box_scales(synthetic(a0, c, 200), k, ref, tail_tol=1e-6)
    assert sc.certified and sc.tail_x < 1e-6 and sc.tail_y < 1e-6
    s0, s1 = closed_form(a0, c, k)
    want = -(s0 * math.log(float(ref.lambda_cu0)) + s1 * math.log(float(ref.lambda_cu1)))
    assert float(sc.log_b) == pytest.approx(want, abs=1e-6)
    want_y = -math.log(60) - (s0 + s1) * math.log(float(ref.lambda_u))
    assert float(sc.log_b_bar) == pytest.approx(want_y, abs=1e-6)


def test_tightening_tail_tolerance_converges(ref):
    gammas = synthetic(50, 2, 200)
    loose = W.box_scales(gammas, 1, ref, tail_tol=1e-3)
    tight = W.box_scales(gammas, 1, ref, tail_tol=1e-4)
    assert tight.end > loose.end
    assert abs(float(tight.log_b - loose.log_b)) < 10 * loose.tail_x
    assert abs(float(tight.log_b_bar - loose.log_b_bar)) < 10 * loose.tail_y


def test_insufficient_depth(ref, square_alignments):
    gammas = [a.code for a in square_alignments]
    with pytest.raises(InsufficientDepth):
        W.box_scales(gammas, 1, ref, tail_tol=1e-6)
    with pytest.raises(InsufficientDepth):
        W.box_scales(gammas, 9, ref)
    with pytest.raises(InsufficientDepth):
        W.build_boxes(square_alignments, ref, tail_tol=1e-6)


def test_horizon_scales_are_uncertified(ref, square_alignments):
    sc = W.box_scales([a.code for a in square_alignments], 1, ref)
    assert not sc.certified and sc.end == 8
    assert sc.tail_x is not None and sc.tail_x > 1


def test_recursion_between_consecutive_scales(ref, square_alignments, boxes):
    for box, nxt, a in zip(boxes, boxes[1:], square_alignments):
        dx, dy = W.recursion_residual(box.scales, nxt.scales, a.code, ref)
        assert abs(dx) <= 1e-12 * abs(nxt.scales.log_b)
        assert abs(dy) <= 1e-12 * abs(nxt.scales.log_b_bar)


def test_mantissas_reassemble_scale(ref):
    sc = W.box_scales(synthetic(50, 2, 60), 1, ref)
    (mx, ex), (my, ey) = sc.mantissas()
    assert 0.5 <= mx < 1 and 0.5 <= my < 1
    assert math.log(mx) + ex * math.log(2) == pytest.approx(float(sc.log_b), rel=1e-12)
    assert math.log(my) + ey * math.log(2) == pytest.approx(float(sc.log_b_bar), rel=1e-12)


# --- return map -----------------------------------------------------------------

def test_zero_offsets_land_on_next_centre(ref, square_alignments):
    a, n = square_alignments[0], square_alignments[1]
    zero = (mpq(0),) * 4
    (x, xs), (y, ys) = W.return_map_projection(a, n, zero, ref)
    assert (x, xs, y, ys) == (n.center[0], 0, n.center[1], 0)


def test_printed_constants_move_zero_image(ref, square_alignments):
    a, n = square_alignments[0], square_alignments[1]
    zero = (mpq(0),) * 4
    (x, _), (y, _) = W.return_map_projection(a, n, zero, ref, printed=True)
    assert x - n.center[0] == 1 - ref.a_s / ref.lambda_star
    assert y - n.center[1] == ref.a_u - ref.mu_star


def test_quadratic_coefficient(ref, square_alignments):
    a, n = square_alignments[1], square_alignments[2]
    lx = ref.lambda_cu0 ** a.code.n_hat0 * ref.lambda_cu1 ** a.code.n_hat1
    h = W.tangency_offsets(a, ref)[0] / 3
    (x0, _), _ = W.return_map_projection(a, n, (0, 0, 0, 0), ref)
    (x1, _), _ = W.return_map_projection(a, n, (h, 0, 0, 0), ref)
    assert (x0 - x1) / h ** 2 == lx ** 2


def test_block_factors_match_powers(ref, square_alignments):
    code = square_alignments[0].code
    lx, lu, ls, lcs = W.block_factors(code, ref)
    assert lu == ref.lambda_u ** code.n_hat and ls == ref.lambda_s ** code.n_hat
    logs = W.log_factors(code, ref)
    assert float(logs[0]) == pytest.approx(float(gmpy2.log(mpfr(lx))), rel=1e-12)
    assert float(logs[3]) == pytest.approx(float(gmpy2.log(mpfr(lcs))), rel=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_formula_exact_against_iteration(ref, schedule, square_alignments, k):
    a, n = square_alignments[k - 1], square_alignments[k]
    assert W.return_map_error(schedule, a, n, offsets(a, ref, 3, k), ref, exact=True) == 0


def test_printed_formula_disagrees_with_iteration(ref, schedule, square_alignments):
    a, n = square_alignments[0], square_alignments[1]
    off = offsets(a, ref, 1, 9)[0]
    got = W.exact_block(schedule, (a.center[0] + off[0], a.center[1] + off[1], off[2], off[3]),
                        a.code.n_hat + 1)
    (fx, _), (fy, _) = W.return_map_projection(a, n, off, ref, printed=True)
    assert got[0] != fx and got[1] != fy


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5, 6])
def test_formula_against_multiprecision_iteration(ref, schedule, square_alignments, k):
    a, n = square_alignments[k - 1], square_alignments[k]
    assert W.return_map_error(schedule, a, n, offsets(a, ref, 5, 100 + k), ref) <= 1e-9


def test_working_bits_follow_expansion(ref, square_alignments):
    code = square_alignments[5].code
    bits = W.working_bits(code, ref)
    assert bits["ys"] == 96
    assert bits["yu"] > bits["xs"] > bits["xu"] > bits["ys"]
    finer = W.working_bits(code, ref, resolve=(-999.5 * math.log(2), -1999.5 * math.log(2)))
    assert finer["xu"] - bits["xu"] == 1000 and finer["yu"] - bits["yu"] == 2000


# --- boxes ----------------------------------------------------------------------

def test_x_side_width_is_b(boxes):
    for b in boxes:
        assert b.box[0].width == mpq(b.b)
        assert b.box[1].width == mpq(b.b_bar)


def test_half_widths_follow_scales(ref, boxes):
    for b in boxes:
        assert float(b.log_x_star) == pytest.approx(math.log(20) + float(b.scales.log_b) / 2, rel=1e-15)
        assert b.box[2].hi == -b.box[2].lo


def test_y_star_variants(ref, square_alignments, boxes):
    alt = W.build_boxes(square_alignments, ref, y_star="a1")
    for a, b in zip(boxes, alt):
        assert float(b.log_y_star - a.log_y_star) == pytest.approx(-math.log(60) / 2)
        assert a.log_x_star == b.log_x_star
    with pytest.raises(ValueError):
        W.w_box(square_alignments[0], boxes[0].scales, ref, y_star="a3")


def test_boxes_inside_gamma_cylinders(ref, square_alignments, boxes):
    for a, b in zip(square_alignments, boxes):
        u = bx.u_box(a.code.gamma, ref)
        assert u[0].lo < b.box[0].lo and b.box[0].hi < u[0].hi
        assert u[1].lo < b.box[1].lo and b.box[1].hi < u[1].hi
        assert all(-2 <= side.lo and side.hi <= 2 for side in (b.box[2], b.box[3]))


def test_boxes_pairwise_disjoint(ref, schedule, square_alignments, boxes):
    report = W.orbit_disjointness(schedule, boxes, square_alignments, ref)
    assert report["disjoint"] and report["overlapping"] == []


def test_diameters_decrease_away_from_horizon(ref, schedule, square_alignments, boxes):
    # the last two indices have scales truncated two and one blocks early
    logs = W.orbit_disjointness(schedule, boxes, square_alignments, ref)["log_diams"]
    assert all(b < a for a, b in zip(logs[:6], logs[1:6]))


def test_scale_bound_on_x_side(ref, square_alignments, boxes):
    assert all(row["b_ok"] for row in W.scale_bounds(boxes, square_alignments, ref))


# --- nesting --------------------------------------------------------------------

@pytest.fixture(scope="module")
def nesting(ref, square_alignments, boxes):
    return W.check_nesting(boxes, square_alignments, ref)


def test_nesting_report_shape(nesting):
    assert len(nesting.rows) == 7 * 2 * 4
    assert {r.axis for r in nesting.rows} == set(W.AXES)


def test_nesting_x_axes_and_stable_y_hold_once(nesting):
    for r in nesting.rows:
        if r.exponent == 1 and r.axis != "y_u":
            assert r.holds and 0 < r.bound_ratio < 1


def test_nesting_x_unstable_margin_is_half(nesting):
    # the parabola endpoint sits at a quarter of the next width, so half of it is left
    for r in nesting.rows:
        if r.exponent == 1 and r.axis == "x_u":
            assert r.margin == pytest.approx(0.5, abs=1e-12)


def test_doubled_scale_breaks_nesting(ref, square_alignments, boxes):
    a = square_alignments[0]
    sc = boxes[0].scales
    with W._ctx(W.LOG_BITS):
        doubled = W.Scales(sc.k, sc.log_b + gmpy2.log(2), sc.log_b_bar + gmpy2.log(2),
                           sc.end, sc.tail_x, sc.tail_y, sc.certified)
    tampered = [W.w_box(a, doubled, ref)] + boxes[1:2]
    rep = W.check_nesting(tampered, square_alignments[:2], ref, exponents=(1,))
    row = {r.axis: r for r in rep.rows}
    assert not row["x_u"].holds
    assert row["x_u"].margin == pytest.approx(-1.0, abs=1e-9)


def test_nesting_csv(nesting):
    rows = list(csv.reader(io.StringIO(nesting.to_csv())))
    assert rows[0] == ["k", "axis", "margin", "bound_ratio", "verified_exponent"]
    assert len(rows) == len(nesting.rows) + 1
    # y_u fails wherever the next y-scale is not cut off by the horizon
    verified = {int(r[0]): r[4] for r in rows[1:]}
    assert all(verified[k] == "" for k in range(1, 7))
    assert verified[7] == "1"


def test_sweep_agrees_with_closed_form(ref, schedule, square_alignments, boxes):
    rows = W.sweep_nesting(schedule, boxes[:3], square_alignments[:3], ref)
    for row in rows:
        assert row["x_u"] == row["x_s"] == row["y_s"] == row["samples"] == 81
        # only the y_s = 0 slice keeps y_u inside
        assert row["y_u"] == 27


def test_centre_orbit_visits_every_box(ref, schedule, square_alignments, boxes):
    c = square_alignments[0].center
    b = boxes[0].box
    off_axis = (b[0].lo + b[0].width / 3, b[1].lo + b[1].width * 2 / 5, b[2].hi / 2, b[3].hi / 2)
    report = W.orbit_disjointness(schedule, boxes[:5], square_alignments[:5], ref,
                                  samples=[c, off_axis])
    assert report["visits"][0] == [1, 2, 3, 4, 5]
    assert report["visits"][1] == [1]
