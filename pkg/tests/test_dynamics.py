import random

import pytest
from gmpy2 import mpq
from hypothesis import given, settings, strategies as st

from tangency_lab import dynamics as D
from tangency_lab.errors import DomainViolation, OutsideDomain
from oracle import Oracle, fr


def test_region_examples(ref):
    assert D.region_of((-1, -1, 0, 0), ref) is D.Region.V0
    assert D.region_of((0, 0, ref.a_s, 1), ref) is D.Region.VStar
    assert D.region_of((2, 2, 2, 2), ref) is D.Region.Outside


def test_region_boxes_disjoint(ref):
    v0, v1, vs = (D.branch_domain(0, ref), D.branch_domain(1, ref), D.tangency_domain(ref))
    assert not v0.intersects(v1)
    assert not v0.intersects(vs)
    assert not v1.intersects(vs)


def test_f_centres(ref):
    assert D.f_expand((-1, -1), 0, ref) == (0, 0)
    assert D.f_expand((1, 1), 1, ref) == (1, 0)


def test_g_centres(ref):
    assert D.g_expand((-1, -1), 0, ref) == (0, 0)
    # branch 1 is the inverse of the stable factor of the 4D branch
    assert D.g_expand((1, 1), 1, ref) == (0, 1)


@pytest.mark.parametrize("branch", [0, 1])
def test_planar_corners_onto_square(ref, branch):
    sq = set(D.square(ref).corners())
    assert {D.f_expand(c, branch, ref) for c in D.expanding_box(branch, ref).corners()} == sq
    assert {D.g_expand(c, branch, ref) for c in D.contracting_box(branch, ref).corners()} == sq


def test_checked_branch_rejects_foreign_point(ref):
    with pytest.raises(DomainViolation):
        D.f_expand((1, 1), 0, ref, checked=True)
    with pytest.raises(DomainViolation):
        D.g_expand((-1, -1), 1, ref, checked=True)


def test_f_star(ref):
    assert D.f_star((ref.a_s, 1), ref) == (1, ref.a_u)
    assert D.f_star((ref.a_s + ref.lambda_star, 1), ref) == (2, ref.a_u)
    pt = (mpq(3, 7), mpq(101, 100))
    assert D.f_star_inverse(D.f_star(pt, ref), ref) == pt


def test_fixed_points_and_tangency(ref):
    p, q = D.fixed_points(ref)
    assert D.F_map(p, ref) == p
    assert D.F_map(q, ref) == q
    assert D.F_map((0, 0, ref.a_s, 1), ref) == (1, ref.a_u, 0, 0)


def test_outside_raises(ref):
    with pytest.raises(OutsideDomain):
        D.F_map((2, 2, 2, 2), ref)


@pytest.mark.parametrize("branch", [0, 1])
def test_branch_images_on_corners(ref, branch):
    img = {D.F_map(c, ref) for c in D.branch_domain(branch, ref).corners()}
    assert img == set(D.branch_image(branch, ref).corners())


def test_inverse_of_centre(ref):
    c = D.branch_domain(0, ref).center
    assert D.F_branch_inverse(D.F_map(c, ref), 0, ref) == c


def test_inverse_round_trip_random_points(ref):
    rng = random.Random(7)

    def sample(box):
        return tuple(s.lo + s.width * mpq(rng.randint(0, 10 ** 6), 10 ** 6) for s in box.sides)

    for _ in range(100):
        x = sample(D.branch_domain(1, ref))
        assert D.F_branch_inverse(D.F_map(x, ref), 1, ref) == x
        y = sample(D.branch_image(1, ref))
        assert D.F_map(D.F_branch_inverse(y, 1, ref), ref) == y


def test_image_corners_map_back_to_domain_corners(ref):
    for b in (0, 1):
        back = {D.F_branch_inverse(c, b, ref) for c in D.branch_image(b, ref).corners()}
        assert back == set(D.branch_domain(b, ref).corners())


def test_inverse_rejects_point_outside_image(ref):
    with pytest.raises(DomainViolation):
        D.F_branch_inverse((0, 0, 0, 0), 0, ref)


def test_images_pairwise_disjoint(ref):
    # bounding box of the tangency image, from the monotone pieces of each coordinate
    d = ref.delta
    vs = D.tangency_domain(ref)
    xs = [D.tangency_step((xu, 0, xs_, 0), ref)[0] for xu in (-d, 0, d) for xs_ in (-2, 2)]
    ys = [D.tangency_step((0, yu, 0, ys_), ref)[1] for yu in (-d, 0, d) for ys_ in (-2, 2)]
    from tangency_lab.intervals import Box
    star_img = Box.from_bounds((min(xs), max(xs)), (min(ys), max(ys)),
                               (-ref.a2 * d, ref.a2 * d), (-d, d))
    i0, i1 = D.branch_image(0, ref), D.branch_image(1, ref)
    assert vs.dim == 4
    assert not i0.intersects(i1)
    assert not star_img.intersects(i0)
    assert not star_img.intersects(i1)


def test_restriction_to_zero_unstable_part(ref):
    for pt in [(0, 0, mpq(1, 3), mpq(-5, 4)), (0, 0, ref.a_s, 1), (0, 0, -2, 2)]:
        assert D.F_map(pt, ref)[:2] == D.f_star(pt[2:], ref)


def test_seed_rectangle_relations(ref):
    printed = D.star_inclusions(ref)
    centered = D.star_inclusions(ref, centered=True)
    assert printed == {"y_s inside stable branch 1": True, "x_s spans square": True,
                       "x_u inside unstable branch 1": True, "y_u spans square": False}
    assert all(centered.values())



def test_centered_chain_keeps_every_relation(ref):
    rows = D.star_chain(ref, 20, centered=True)
    assert [r["n"] for r in rows] == list(range(21))
    assert all(r["holds"] for r in rows)


def test_printed_chain_recovers_the_full_side(ref):
    rows = D.star_chain(ref, 20)
    assert len(rows) == 21
    broken = [r["n"] for r in rows if not r["holds"]]
    assert broken == list(range(8))
    assert all(not r["y_u spans square"] for r in rows[:8])
    assert all(r["y_s inside stable branch 1"] and r["x_s spans square"] for r in rows)


def test_first_kept_piece_matches_closed_form(ref):
    # the symmetric rectangle clips the lower edge of this piece, the recentred one does not
    o = Oracle(ref)
    lu, mu, ls, lcs1 = o.lambda_u, o.mu_star, o.lambda_s, o.lambda_cs1
    lo = 1 + (1 - 2 / lu - o.a_u) / mu
    hi = 1 + (1 + 2 / lu - o.a_u) / mu
    # push [1 - 2 ls, 1 + 2 ls] x [lo, hi] through the stable expansion
    expected = [(-2, 2), ((lo - 1) / lcs1 + 1, (hi - 1) / lcs1 + 1)]
    rect = D.star_chain(ref, 1, centered=True)[1]["rect"]
    assert [(fr(s.lo), fr(s.hi)) for s in rect] == expected

def test_orbit_reports_step(ref):
    with pytest.raises(OutsideDomain) as err:
        D.orbit((1, 1, 0, 0), ref, 5)
    assert err.value.step is not None


def test_float_mode_matches(ref):
    fl = ref.as_float()
    q = D.fixed_points(fl)[1]
    assert D.F_map(q, fl) == pytest.approx(q, abs=1e-12)


coord = st.fractions(min_value=-2, max_value=2, max_denominator=10 ** 4)


@settings(max_examples=300, deadline=None)
@given(coord, coord, coord, coord)
def test_agrees_with_fraction_oracle(ref, a, b, c, d):
    oracle = Oracle(ref)
    pt = tuple(mpq(v) for v in (a, b, c, d))
    expected = oracle.step((a, b, c, d))
    if expected is None:
        assert D.region_of(pt, ref) is D.Region.Outside
    else:
        assert tuple(fr(v) for v in D.F_map(pt, ref)) == expected


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 1), st.fractions(0, 1, max_denominator=1000), st.fractions(0, 1, max_denominator=1000),
       coord, coord)
def test_product_structure(ref, branch, s, t, xs, ys):
    box = D.expanding_box(branch, ref)
    xu = box[0].lo + box[0].width * mpq(s)
    yu = box[1].lo + box[1].width * mpq(t)
    out = D.F_map((xu, yu, mpq(xs), mpq(ys)), ref)
    assert out[:2] == D.f_expand((xu, yu), branch, ref)
    assert D.g_expand(out[2:], branch, ref) == (mpq(xs), mpq(ys))
