import math
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings, strategies as st

from warpcurv.classify import (
    ExceptionalMuError,
    alpha_beta,
    asymptotics,
    discriminant,
    enumerate_D0,
    exponent_label,
    membership_D,
    ordering,
    pq,
    q_roots,
    regime,
    q_numerator,
    sobolev_thresholds,
    table_cells,
    p_numerator,
)
from warpcurv.sbcwp import SbcwpParams, coefficients, exceptional_mus

F = Fraction


class TestExponents:
    @pytest.mark.parametrize("m,k,mu,p,q", [
        (3, 8, F(-2), F(1, 3), F(0)),
        (4, 6, F(-1), F(1, 2), F(0)),
        (6, 5, F(-1, 2), F(2, 3), F(0)),
        (1, 3, F(1), F(3), F(1)),
    ])
    def test_exact(self, m, k, mu, p, q):
        assert pq(m, k, mu) == (p, q)

    def test_3_9_half(self):
        cs = coefficients(SbcwpParams(3, 9, F(1, 2)))
        assert (cs.zeta, cs.eta) == (20, F(199, 2))
        p, q = pq(3, 9, F(1, 2))
        assert float(p) == pytest.approx(1.2010, abs=1e-4)
        assert float(q) == pytest.approx(0.7990, abs=1e-4)

    @pytest.mark.parametrize("k", [1, 2, 3, 6])
    def test_m1_closed_form(self, k):
        k1 = F(k + 1, 2)
        for mu in (F(-7, 3), F(1, 5), F(3, 4)):
            if mu == k1:
                continue
            p, _ = pq(1, k, mu)
            assert p == (mu + k1) / (-mu + k1)

    def test_exceptional_raises(self):
        with pytest.raises(ExceptionalMuError):
            pq(3, 4, F(-2))
        with pytest.raises(ExceptionalMuError):
            regime(1, 3, F(2))

    @pytest.mark.parametrize("e,label", [(F(3), "super-lin"), (1, "lin"), (F(1, 2), "sub-lin"),
                                         (0, "non-hom"), (F(-1, 4), "sing")])
    def test_labels(self, e, label):
        assert exponent_label(e) == label


class TestD:
    def test_D0_enumeration(self):
        assert enumerate_D0() == [(3, 8), (4, 6), (6, 5)]

    @pytest.mark.parametrize("k", [1, 2, 5, 40])
    def test_m2_never_in_D(self, k):
        d = membership_D(2, k)
        assert d.discriminant == 16 * (k + 1) and not d.in_D

    def test_3_9_in_D(self):
        assert membership_D(3, 9).in_D

    def test_domain(self):
        with pytest.raises(ValueError):
            membership_D(1, 3)

    @pytest.mark.parametrize("m,k,root", [(3, 8, F(-2)), (4, 6, F(-1)), (6, 5, F(-1, 2))])
    def test_double_roots(self, m, k, root):
        assert q_roots(m, k) == (root, root)

    def test_irrational_roots(self):
        lo, hi = q_roots(2, 1)
        assert lo == pytest.approx(-1 / math.sqrt(2)) and hi == pytest.approx(1 / math.sqrt(2))

    def test_roots_in_D_raise(self):
        with pytest.raises(ValueError):
            q_roots(3, 9)


class TestOrdering:
    @pytest.mark.parametrize("p,q,text", [
        (F(1, 3), F(0), "q=0<p<1"),
        (F(3), F(1), "q=1<p"),
        (F(1, 2), F(-1), "q<0<p<1"),
        (F(3), F(2), "1<q<p"),
        (F(1, 2), F(1, 3), "0<q<p<1"),
        (F(0), F(-1), "q<p=0"),
        (F(2), F(0), "q=0<1<p"),
    ])
    def test_symbolic(self, p, q, text):
        assert ordering(p, q) == text

    @pytest.mark.parametrize("p,q,text", [
        (F(3), F(1), "q=1<p=3"),
        (F(2), F(0), "q=0<p=2"),
        (F(0), F(-1, 2), "q=-1/2<p=0"),
        (F(5), F(1), "q=1<p=5"),
    ])
    def test_with_values(self, p, q, text):
        assert ordering(p, q, values=True) == text

    def test_single_exponent(self):
        assert ordering(F(3)) == "1<p"
        assert ordering(F(0), values=True) == "p=0"


class TestRegime:
    def test_table5_row3(self):
        for k in (4, 5, 9):
            k1 = F(k + 1, 2)
            c = regime(1, k, -k1 + F(1, 2))
            assert (c.table, c.row) == (5, 3)
            assert c.ordering == "q<0<p<1" and c.regime == "sub-lin/sing"

    def test_table7_half(self):
        c = regime(1, 2, F(1, 2))
        assert c.table == 7 and c.row == 5
        assert c.summary() == "q=0<p=2, super-lin/non-hom"

    def test_table6_one(self):
        assert regime(1, 3, 1).summary() == "q=1<p=3, super-lin/lin"

    @pytest.mark.parametrize("m,k", [(2, 3), (3, 9), (6, 4), (3, 8)])
    def test_table4_last_row(self, m, k):
        c = regime(m, k, F(5, 2))
        assert (c.table, c.row) == (4, 10)
        assert c.ordering == "1<q<p" and c.regime == "super-lin"

    def test_table4_first_row(self):
        c = regime(3, 9, F(-10))
        assert c.row == 1 and c.alpha_sign == -1

    def test_D_rows(self):
        assert regime(3, 9, F(-1, 2)).row == 2
        assert regime(3, 9, F(1, 2)).row == 6

    def test_CD_root_row(self):
        c = regime(3, 8, F(-2))
        assert c.row == 5 and c.ordering == "q=0<p<1"

    def test_untabulated_boundaries(self):
        assert regime(3, 9, F(0)).row is None
        assert regime(3, 9, F(1)).row is None

    def test_m1_k1_has_no_q(self):
        c = regime(1, 1, F(1, 2))
        assert c.q is None and c.regime == "super-lin"

    def test_disclaimer_attached(self):
        assert "positive constants" in regime(3, 9, F(1, 2)).disclaimer


class TestSobolev:
    def test_6_4(self):
        s = sobolev_thresholds(6, 4)
        assert (s.mu_pY, s.mu_qY, s.p_Y) == (F(-5, 4), F(-1), F(2))

    def test_3_1(self):
        s = sobolev_thresholds(3, 1)
        assert s.mu_pY == -2 and s.beta_at_pY == 6

    @pytest.mark.parametrize("m,k", [(3, 1), (4, 2), (5, 7), (9, 3)])
    def test_specialised_coefficients(self, m, k):
        s = sobolev_thresholds(m, k)
        assert s.beta_at_pY == F(4 * (m - 1), m - 2) - F(4 * k, k + 1)
        assert s.alpha_at_pY == F(-2, k + 1)
        assert pq(m, k, s.mu_pY)[0] == s.p_Y
        assert s.mu_qY == exceptional_mus(m, k).mu_bar

    def test_needs_m3(self):
        with pytest.raises(ValueError):
            sobolev_thresholds(2, 3)


class TestAsymptotics:
    @pytest.mark.parametrize("m", [3, 4, 5])
    def test_limits(self, m):
        rep = asymptotics(m, 2, [F(10 ** 6), F(-10 ** 6)])
        errs = rep.max_errors()
        assert errs["beta"] < 1e-5 and errs["p"] < 1e-5 and errs["q"] < 1e-5
        assert abs(float(rep.alpha_mu[0]) - 2 / (m - 2)) < 1e-5

    def test_m4_limits(self):
        rep = asymptotics(4, 3, [F(10 ** 3)])
        assert (rep.beta_limit, rep.p_limit) == (6, 3)

    def test_monotone(self):
        assert asymptotics(3, 2, [F(10) ** j for j in range(2, 7)]).monotone()


class TestCells:
    @pytest.mark.parametrize("which", [4, 5, 6, 7, 8])
    def test_cells_cover_every_row(self, which):
        rows = set()
        for m, k, mu in table_cells(which):
            try:
                rows.add(regime(m, k, mu).row)
            except ExceptionalMuError:
                pass
        expected = {4: 10, 5: 9, 6: 7, 7: 9, 8: 5}[which]
        assert set(range(1, expected + 1)) <= rows


def _mu():
    return st.fractions(min_value=-30, max_value=30, max_denominator=40)


@settings(max_examples=400, deadline=None)
@given(m=st.integers(2, 20), k=st.integers(1, 20), mu=_mu())
def test_p_positive_and_alpha_sign(m, k, mu):
    assume(mu != F(-k, m - 1))
    p, q = pq(m, k, mu)
    a, _ = alpha_beta(m, k, mu)
    assert p > 0
    assert (a > 0) == (mu > F(-k, m - 1))
    assert (q < p) == (a > 0)
    eta = coefficients(SbcwpParams(m, k, mu)).eta
    assert (q > 0) == (q_numerator(m, k, mu) > 0) and q == q_numerator(m, k, mu) / eta
    assert p == p_numerator(m, k, mu) / eta


@settings(max_examples=200, deadline=None)
@given(k=st.integers(1, 20), mu=_mu())
def test_m1_signs(k, mu):
    k1 = F(k + 1, 2)
    assume(mu != k1)
    a, b = alpha_beta(1, k, mu)
    assert (a > 0) == (mu < k1)
    assert (b > 0) == (mu < k1)


@settings(max_examples=200, deadline=None)
@given(m=st.integers(2, 40), k=st.integers(1, 40))
def test_q_vanishes_at_roots(m, k):
    assume(not membership_D(m, k).in_D)
    lo, hi = q_roots(m, k)
    for r in (lo, hi):
        if isinstance(r, Fraction):
            if r == F(-k, m - 1):
                continue
            assert pq(m, k, r)[1] == 0
        else:
            assert abs(q_numerator(m, k, r)) < 1e-8 * max(1, m * m * r * r)
    if lo != hi and isinstance(lo, Fraction):
        eps = (hi - lo) / 4
        assert q_numerator(m, k, lo - eps) > 0 > q_numerator(m, k, lo + eps)


@settings(max_examples=200, deadline=None)
@given(m=st.integers(2, 60), k=st.integers(1, 60))
def test_discriminant_closed_form(m, k):
    a, b, c = (m - 1) * (m + 2), 2 * (m * k - 2 * (m - 1)), (k - 3) * k
    assert discriminant(m, k) == b * b - 4 * a * c
