import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onefractal.ifs import (
    AffineMap,
    IfsCode,
    SearchExhausted,
    SigmaTarget,
    apply_map,
    derive_probs,
    sample_ifs,
    search_category_set,
    sigma_factor,
)

finite = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False)


def sigma_oracle(code: IfsCode) -> float:
    """Independent route: singular values via eigen-decomposition of A^T A."""
    total = 0.0
    for m in code.maps:
        lin = np.array([[m.a, m.b], [m.c, m.d]])
        eig = np.linalg.eigvalsh(lin.T @ lin)
        s2, s1 = np.sqrt(np.clip(eig, 0.0, None))
        total += s1 + 2.0 * s2
    return float(total)


class TestApplyMap:
    def test_identity(self):
        m = AffineMap(1, 0, 0, 1, 0, 0)
        assert apply_map(m, (3.0, 4.0)) == (3.0, 4.0)

    def test_pure_scaling(self):
        m = AffineMap(0.5, 0, 0, 0.5, 0, 0)
        assert apply_map(m, (2.0, 2.0)) == (1.0, 1.0)

    def test_fixed_point(self):
        m = AffineMap(0.5, 0, 0, 0.5, 0.5, 0)
        assert apply_map(m, (1.0, 0.0)) == (1.0, 0.0)

    @given(
        a=finite, b=finite, c=finite, d=finite, e=finite, f=finite,
        u=st.tuples(finite, finite), v=st.tuples(finite, finite),
        alpha=st.floats(min_value=0.0, max_value=1.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_affine_combination(self, a, b, c, d, e, f, u, v, alpha):
        m = AffineMap(a, b, c, d, e, f)
        mix = (alpha * u[0] + (1 - alpha) * v[0], alpha * u[1] + (1 - alpha) * v[1])
        direct = apply_map(m, mix)
        mu, mv = apply_map(m, u), apply_map(m, v)
        blended = (alpha * mu[0] + (1 - alpha) * mv[0], alpha * mu[1] + (1 - alpha) * mv[1])
        assert math.isclose(direct[0], blended[0], abs_tol=1e-12)
        assert math.isclose(direct[1], blended[1], abs_tol=1e-12)


class TestSigmaFactor:
    def test_two_diagonal_maps(self):
        maps = (AffineMap(0.5, 0, 0, 0.5, 0, 0), AffineMap(0.5, 0, 0, 0.5, 0.3, 0))
        code = IfsCode(maps, derive_probs(maps))
        assert sigma_factor(code) == pytest.approx(3.0, abs=1e-12)

    def test_sierpinski(self, sierpinski):
        assert sigma_factor(sierpinski) == pytest.approx(4.5, abs=1e-12)

    def test_matches_svd_oracle(self, rng):
        for _ in range(50):
            maps = tuple(
                AffineMap(*rng.uniform(-1.5, 1.5, 6)) for _ in range(2)
            )
            code = IfsCode(maps, derive_probs(maps))
            assert sigma_factor(code) == pytest.approx(sigma_oracle(code), abs=1e-9)

    def test_invariant_under_map_permutation(self, rng):
        maps = [AffineMap(*rng.uniform(-1, 1, 6)) for _ in range(4)]
        code = IfsCode(tuple(maps), derive_probs(maps))
        shuffled = [maps[2], maps[0], maps[3], maps[1]]
        other = IfsCode(tuple(shuffled), derive_probs(shuffled))
        assert sigma_factor(code) == pytest.approx(sigma_factor(other), abs=1e-12)

    def test_invariant_under_rotation(self, rng):
        theta = 0.7
        rot = np.array(
            [[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]]
        )
        m = AffineMap(*rng.uniform(-1, 1, 6))
        lin = rot @ np.array([[m.a, m.b], [m.c, m.d]])
        rotated = AffineMap(lin[0, 0], lin[0, 1], lin[1, 0], lin[1, 1], m.e, m.f)
        one = IfsCode((m,), (1.0,))
        two = IfsCode((rotated,), (1.0,))
        assert sigma_factor(one) == pytest.approx(sigma_factor(two), abs=1e-9)


class TestSampleIfs:
    @pytest.mark.parametrize("target", [3.5, 6.0])
    def test_hits_target(self, target):
        code = sample_ifs(2, SigmaTarget(target, 1e-6), 7)
        assert abs(sigma_factor(code) - target) <= 1e-6

    def test_deterministic_bytes(self):
        a = sample_ifs(2, SigmaTarget(3.5), 99)
        b = sample_ifs(2, SigmaTarget(3.5), 99)
        assert a == b
        assert a.to_json() == b.to_json()

    def test_sigma_property_over_seeds(self):
        for target in (3.5, 5.0):
            for seed in range(25):
                code = sample_ifs(2, SigmaTarget(target, 1e-6), seed)
                assert abs(sigma_factor(code) - target) <= 1e-6

    def test_records_seed(self):
        assert sample_ifs(2, SigmaTarget(3.5), 11).seed == 11

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            sample_ifs(0, SigmaTarget(3.5), 0)
        with pytest.raises(ValueError):
            SigmaTarget(-1.0)


class TestSearchCategorySet:
    def test_single_category(self):
        codes = search_category_set(1, 2, SigmaTarget(3.5), 5)
        assert len(codes) == 1
        assert abs(sigma_factor(codes[0]) - 3.5) <= 1e-6

    def test_three_distinct(self):
        codes = search_category_set(3, 2, SigmaTarget(3.5), 5)
        assert len(codes) == 3
        vectors = {tuple(v for m in c.maps for v in m.coefficients()) for c in codes}
        assert len(vectors) == 3

    def test_thousand_categories(self):
        codes = search_category_set(1000, 2, SigmaTarget(4.0, 1e-6), 17)
        assert len(codes) == 1000
        for code in codes:
            assert abs(sigma_factor(code) - 4.0) <= 1e-6


class TestValidation:
    def test_probs_must_sum_to_one(self):
        maps = (AffineMap(0.5, 0, 0, 0.5, 0, 0),)
        with pytest.raises(ValueError):
            IfsCode(maps, (0.5,))

    def test_probs_must_be_nonnegative(self):
        maps = (AffineMap(0.5, 0, 0, 0.5, 0, 0), AffineMap(0.4, 0, 0, 0.4, 1, 0))
        with pytest.raises(ValueError):
            IfsCode(maps, (1.5, -0.5))

    def test_non_finite_coefficient(self):
        with pytest.raises(ValueError):
            AffineMap(math.nan, 0, 0, 0.5, 0, 0)

    def test_length_mismatch(self):
        maps = (AffineMap(0.5, 0, 0, 0.5, 0, 0),)
        with pytest.raises(ValueError):
            IfsCode(maps, (0.5, 0.5))


class TestJson:
    def test_round_trip(self):
        code = sample_ifs(3, SigmaTarget(4.5), 8)
        again = IfsCode.from_json(code.to_json())
        assert again == code

    def test_field_order_and_digits(self):
        code = sample_ifs(2, SigmaTarget(3.5), 1)
        text = code.to_json()
        assert text.index('"maps"') < text.index('"probs"') < text.index('"sigma"') < text.index('"seed"')
        # round-trip exactness of every coefficient
        again = IfsCode.from_json(text)
        for m1, m2 in zip(code.maps, again.maps):
            assert m1.coefficients() == m2.coefficients()

    def test_handbuilt_code_has_null_seed(self, sierpinski):
        assert '"seed": null' in sierpinski.to_json()


def test_derive_probs_floor():
    # A map with zero determinant still gets selectable mass.
    maps = (AffineMap(0.5, 0, 0, 0.0, 0, 0), AffineMap(0.5, 0, 0, 0.5, 1, 0))
    probs = derive_probs(maps)
    assert probs[0] == pytest.approx(0.01 / 0.26)
    assert math.fsum(probs) == pytest.approx(1.0, abs=1e-12)


def test_search_exhausted_is_raised():
    # sigma 50 with two maps forces strongly expansive systems; every
    # candidate fails the volume-rate filter and the budget runs out.
    with pytest.raises(SearchExhausted):
        sample_ifs(2, SigmaTarget(50.0, 1e-6), 0)
