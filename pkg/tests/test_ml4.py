import math
import os

import numpy as np
import pytest
from scipy import stats

from replicability import ml4
from replicability.ml4 import (
    JEFFREYS, WEAKLY_INFORMATIVE, EffectSizeRecord, MuRhoDraws, NigHyper, NigPosterior,
    SufficientStats, group_contrast, hdi_continuous, hedges_from_cohen, nig_sample, nig_update,
    propagate_mu_rho, propagate_mu_rho_expected, se_hedges,
)
from replicability.specfun import normal_cdf
from reference_tables import CONTRAST_IH_AA, TABLE45

TABLE3 = SufficientStats.from_summary(17, 0.055, 0.250)


@pytest.fixture(scope="module")
def records():
    return ml4.load_records(ml4.bundled_path("ml4_synthetic_sites.csv"))


class TestEffectSizes:
    def test_reference_conversion(self):
        assert 1 - 3 / 83 == pytest.approx(0.964, abs=5e-4)
        assert hedges_from_cohen(1.34, 12, 11) == pytest.approx((1 - 3 / 83) * 1.34, abs=1e-15)
        assert hedges_from_cohen(1.34, 12, 11) == pytest.approx(1.29, abs=5e-3)
        assert hedges_from_cohen(0.0, 5, 5) == 0.0
        assert hedges_from_cohen(1.0, 10 ** 8, 10 ** 8) == pytest.approx(1.0, abs=1e-7)
        with pytest.raises(ValueError):
            hedges_from_cohen(1.0, 1, 1)

    def test_standard_error(self):
        assert se_hedges(EffectSizeRecord("a", 0.0, 50, 50, "AA")) == pytest.approx(0.2, abs=1e-15)
        ref = EffectSizeRecord("r", 1.29, 12, 11, "REFERENCE")
        # independent arithmetic: 23/132 = 0.174242..., 1.29^2/42 = 0.039621...
        assert se_hedges(ref) == pytest.approx(math.sqrt(0.17424242424 + 0.03962142857), abs=1e-9)
        # the quoted 0.464 is a rounding of this expression, which evaluates to 0.4625
        assert se_hedges(ref) == pytest.approx(0.464, abs=2e-3)
        swapped = EffectSizeRecord("r", 1.29, 11, 12, "REFERENCE")
        assert se_hedges(swapped) == se_hedges(ref)

    def test_record_validation(self):
        with pytest.raises(ValueError):
            EffectSizeRecord("a", 0.1, 1, 5, "AA")
        with pytest.raises(ValueError):
            EffectSizeRecord("a", 0.1, 5, 5, "XX")

    def test_reference_record(self):
        r = ml4.reference_record()
        assert (r.n1, r.n2, r.protocol) == (12, 11, "REFERENCE")
        assert r.g == pytest.approx(1.29, abs=5e-3)


class TestConjugate:
    def test_summary_stats(self):
        assert TABLE3.ss == pytest.approx(1.0, abs=1e-15)
        s = SufficientStats.from_values([1.0, 2.0, 4.0])
        assert (s.m, s.mean_g) == (3, pytest.approx(7 / 3))
        assert s.ss == pytest.approx(np.var([1.0, 2.0, 4.0]) * 3)

    def test_jeffreys(self):
        post = nig_update(TABLE3, JEFFREYS)
        assert abs(post.kappa_n - 17) <= 1e-12
        assert abs(post.mu_n - 0.055) <= 1e-12
        assert abs(post.alpha_n - 8.5) <= 1e-12
        assert abs(post.beta_n - 0.5) <= 1e-12

    def test_weak(self):
        post = nig_update(TABLE3, WEAKLY_INFORMATIVE)
        assert post.kappa_n == 18
        assert post.mu_n == pytest.approx(17 * 0.055 / 18, abs=1e-15)
        assert post.mu_n == pytest.approx(0.0519, abs=1e-4)
        assert post.alpha_n == 9.5
        assert post.beta_n == pytest.approx(1 + 0.5 + 17 * 0.055 ** 2 / 36, abs=1e-15)
        assert post.beta_n == pytest.approx(1.5014, abs=1e-4)

    def test_jeffreys_centring(self):
        stats_ = SufficientStats(5, -0.3, 2.0)
        assert nig_update(stats_, NigHyper(mu0=3.0)).mu_n == -0.3

    def test_impropriety(self):
        with pytest.raises(ValueError):
            nig_update(SufficientStats(1, 0.2, 0.0), JEFFREYS)
        nig_update(SufficientStats(1, 0.2, 0.0), WEAKLY_INFORMATIVE)

    def test_hyper_validation(self):
        with pytest.raises(ValueError):
            NigHyper(kappa0=-1)
        with pytest.raises(ValueError):
            NigPosterior(1.0, 0.0, 0.0, 1.0)


class TestSampling:
    @pytest.fixture(scope="class")
    @staticmethod
    def draws():
        post = nig_update(TABLE3, JEFFREYS)
        return post, nig_sample(post, 300_000, seed=7)

    def test_student_t_marginal(self, draws):
        post, (theta, _) = draws
        df, loc, scale = post.theta_marginal()
        assert df == 17
        d = stats.kstest(theta, stats.t(df, loc, scale).cdf).statistic
        assert d < 0.005

    def test_inverse_gamma_marginal(self, draws):
        post, (_, sigma2) = draws
        assert np.all(sigma2 > 0)
        d = stats.kstest(sigma2, stats.invgamma(post.alpha_n, scale=post.beta_n).cdf).statistic
        assert d < 0.005

    def test_mean_consistency(self, draws):
        post, (theta, _) = draws
        assert abs(theta.mean() - post.mu_n) < 4 * theta.std() / math.sqrt(theta.size)

    def test_reproducible_and_block_stable(self):
        post = nig_update(TABLE3, JEFFREYS)
        a = nig_sample(post, 120_000, seed=3)
        b = nig_sample(post, 120_000, seed=3)
        c = nig_sample(post, 2 * ml4.BLOCK_SIZE, seed=3)
        np.testing.assert_array_equal(a[0], b[0])
        # a shorter run reproduces the leading blocks of a longer one
        np.testing.assert_array_equal(a[0][:c[0].size], c[0])
        assert not np.array_equal(a[0], nig_sample(post, 120_000, seed=4)[0])


class TestPropagation:
    def test_no_heterogeneity(self):
        theta = np.linspace(-1, 1, 1000)
        d = propagate_mu_rho(theta, np.zeros(1000), [1.0] * 17)
        assert np.all(d.rho < 1e-15)
        np.testing.assert_allclose(d.mu, normal_cdf(theta), rtol=1e-15)

    def test_against_closed_form_expectation(self):
        post = nig_update(TABLE3, JEFFREYS)
        theta, sigma2 = nig_sample(post, 200_000, seed=1)
        d = propagate_mu_rho(theta, sigma2, [1.0] * 17, seed=1)
        # E[mu^(s) | theta, sigma2] = Phi(theta / sqrt(1 + sigma2)) for unit standard errors
        oracle = normal_cdf(theta / np.sqrt(1 + sigma2))
        diff = d.mu - oracle
        assert abs(diff.mean()) < 4 * diff.std() / math.sqrt(diff.size)

    def test_expectation_mode_agrees(self):
        post = nig_update(TABLE3, JEFFREYS)
        theta, sigma2 = nig_sample(post, 2000, seed=2)
        se = [0.2] * 17
        mu_e, rho_e = propagate_mu_rho_expected(theta, sigma2, se)
        big_t = np.repeat(theta, 200)
        big_s = np.repeat(sigma2, 200)
        d = propagate_mu_rho(big_t, big_s, se, seed=2)
        mu_mc = d.mu.reshape(2000, 200).mean(axis=1)
        assert abs(mu_mc.mean() - mu_e.mean()) < 0.01
        # the simulated rho uses finite m; compare population rho only in rough terms
        assert abs(np.nanmean(d.rho) - np.nanmean(rho_e)) < 0.1

    def test_degenerate_draws_undefined(self):
        d = propagate_mu_rho(np.array([60.0, 0.0]), np.array([1e-6, 1.0]), [1.0, 1.0])
        assert math.isnan(d.rho[0]) and d.n_degenerate == 1
        assert 0 <= d.rho[1] <= 1

    def test_validation(self):
        with pytest.raises(ValueError):
            propagate_mu_rho(np.zeros(3), np.ones(3), [])
        with pytest.raises(ValueError):
            propagate_mu_rho(np.zeros(3), np.ones(2), [1.0])
        with pytest.raises(ValueError):
            propagate_mu_rho(np.zeros(3), np.ones(3), [1.0, -1.0])


class TestHdiContinuous:
    def test_normal_symmetric(self):
        x = np.random.default_rng(0).normal(0.5, 0.05, 200_000)
        h = hdi_continuous(x)
        assert (h.lower + h.upper) / 2 == pytest.approx(0.5, abs=2e-3)
        assert h.width == pytest.approx(2 * 1.96 * 0.05, rel=0.02)

    def test_uniform(self):
        x = np.random.default_rng(1).uniform(0, 1, 100_000)
        assert hdi_continuous(x).width == pytest.approx(0.95, abs=0.01)

    def test_exact_count(self):
        x = np.arange(1000) / 1000
        h = hdi_continuous(x, 0.9)
        assert h.upper - h.lower == pytest.approx(0.899, abs=1e-12)

    def test_too_few(self):
        with pytest.raises(ValueError):
            hdi_continuous(np.zeros(999))

    def test_signed_draws(self):
        h = hdi_continuous(np.random.default_rng(2).normal(0, 1, 50_000))
        assert h.lower < 0 < h.upper


class TestContrast:
    def _draws(self, rho, seed=0):
        return MuRhoDraws(np.full(rho.size, 0.5), rho, seed)

    def test_identical(self, records):
        a = ml4.analyze_records(records, "aa", S=50_000, seed=9)
        b = ml4.analyze_records(records, "aa", S=50_000, seed=9)
        c = group_contrast(a.draws, b.draws)
        assert c.exceedance == pytest.approx(0.5, abs=0.005)
        assert c.mean_diff == 0.0

    def test_disjoint(self):
        rng = np.random.default_rng(3)
        lo = self._draws(rng.uniform(0.0, 0.3, 5000))
        hi = self._draws(rng.uniform(0.5, 0.9, 5000))
        assert group_contrast(lo, hi).exceedance == 1.0
        assert group_contrast(hi, lo).exceedance == 0.0

    def test_mismatch(self):
        with pytest.raises(ValueError):
            group_contrast(self._draws(np.zeros(1000)), self._draws(np.zeros(2000)))


class TestData:
    def test_bundled_records(self, records):
        assert len(records) == 17
        assert sum(r.n1 + r.n2 for r in records) == 1578
        g = np.array([r.g for r in records])
        assert g.mean() == pytest.approx(0.055, abs=5e-7)
        assert g.std(ddof=1) == pytest.approx(0.250, abs=5e-7)
        assert min(r.n1 + r.n2 for r in records) == 58
        assert max(r.n1 + r.n2 for r in records) == 141

    def test_bundled_summary(self):
        table = ml4.load_summary(ml4.bundled_path("ml4_summary.csv"))
        stats_, se = table["ml4"]
        assert (stats_.m, stats_.mean_g, stats_.ss, se) == (17, 0.055, pytest.approx(1.0), 1.0)
        assert table["ml4+ref"][0].m == 18

    def test_reference_summary_consistent(self, records):
        g = np.array([r.g for r in records] + [ml4.reference_record().g])
        assert g.mean() == pytest.approx(0.123, abs=1e-3)

    def test_groups(self, records):
        assert len(ml4.select_group(records, "aa")) == 7
        assert len(ml4.select_group(records, "ih")) == 10
        plus = ml4.select_group(records, "ih+ref")
        assert len(plus) == 11 and plus[-1].protocol == "REFERENCE"
        assert len(ml4.select_group(records, "ml4+ref")) == 18
        with pytest.raises(ValueError):
            ml4.select_group(records, "bogus")

    def test_bad_csv(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("site,g\n1,0.2\n")
        with pytest.raises(ValueError):
            ml4.load_records(p)
        p.write_text("site_id,g,n1,n2,protocol\ns1,abc,10,10,AA\n")
        with pytest.raises(ValueError):
            ml4.load_records(p)
        with pytest.raises(OSError):
            ml4.load_records(tmp_path / "missing.csv")


class TestPipelineProperties:
    @pytest.fixture(scope="class")
    @staticmethod
    def results(records):
        return {(g, p): ml4.analyze_records(records, g, p, S=100_000, seed=11)
                for g in ("ml4", "ml4+ref") for p in ("jeffreys", "weak")}

    def test_reference_raises_rho(self, results):
        for p in ("jeffreys", "weak"):
            assert results[("ml4+ref", p)].summary["rho_mean"] > results[("ml4", p)].summary["rho_mean"]

    def test_rho_in_unit_interval(self, results):
        for r in results.values():
            rho = r.draws.rho_defined
            assert np.all((rho >= 0) & (rho <= 1))
            assert r.draws.n_clamped / r.draws.S < 1e-3

    def test_summary_fields(self, results):
        s = results[("ml4", "jeffreys")].summary
        for key in ("group", "prior", "mu_mean", "mu_hdi_lo", "mu_hdi_hi", "rho_mean",
                    "rho_hdi_lo", "rho_hdi_hi", "panel_range", "S", "seed"):
            assert key in s
        assert s["mu_hdi_lo"] < s["mu_mean"] < s["mu_hdi_hi"]

    def test_unknown_prior(self, records):
        with pytest.raises(ValueError):
            ml4.analyze_records(records, "ml4", "flat", S=1000)


REAL_DATA = os.environ.get("REPLICABILITY_ML4_DATA")
needs_real = pytest.mark.skipif(not REAL_DATA, reason="set REPLICABILITY_ML4_DATA to a site-level CSV")


@needs_real
@pytest.mark.slow
class TestTableTargets:
    @pytest.mark.parametrize("group", sorted(TABLE45))
    @pytest.mark.parametrize("prior", ["jeffreys", "weak"])
    def test_table_cell(self, group, prior):
        res = ml4.analyze_records(ml4.load_records(REAL_DATA), group, prior)
        s = res.summary
        mu, mlo, mhi, rho, rlo, rhi = TABLE45[group][prior]
        assert abs(s["mu_mean"] - mu) <= 0.02 and abs(s["rho_mean"] - rho) <= 0.02
        for got, want in [(s["mu_hdi_lo"], mlo), (s["mu_hdi_hi"], mhi),
                          (s["rho_hdi_lo"], rlo), (s["rho_hdi_hi"], rhi)]:
            assert abs(got - want) <= 0.03

    def test_ih_aa_contrast(self):
        recs = ml4.load_records(REAL_DATA)
        aa = ml4.analyze_records(recs, "aa")
        ih = ml4.analyze_records(recs, "ih")
        c = group_contrast(aa.draws, ih.draws)
        mean, lo, hi, p = CONTRAST_IH_AA
        assert abs(c.mean_diff - mean) <= 0.02
        assert abs(c.hdi.lower - lo) <= 0.03 and abs(c.hdi.upper - hi) <= 0.03
        assert abs(c.exceedance - p) <= 0.01
