import math
import unittest

import numpy as np
from scipy import integrate

from oris_noma.models.channel import ChannelParams, GeometryConfig, cdf_turbulence, derive_channel_params
from oris_noma.models.distribution import (AsymptoticCdf, Branch, DegenerateAsymptoticException,
                                           DistributionException, E2EChannelDist, NonConvergentAsymptoticException,
                                           oracle_cdf, oracle_pdf, series_abscissa)


class TestE2EChannelDist(unittest.TestCase):
    def setUp(self):
        self.params = ChannelParams.synthetic(alpha=4.2, beta=1.4, omega=2.7317, q=0.8)
        self.dist = E2EChannelDist(self.params)

    def test_cdf_matches_quadrature(self):
        for h in (0.05, 0.3, 1.0, 2.0):
            self.assertAlmostEqual(self.dist.cdf(h), oracle_cdf(self.params, h), delta=1e-6)

    def test_pdf_matches_quadrature(self):
        for h in (0.05, 0.3, 1.0, 2.0):
            expected = oracle_pdf(self.params, h)
            self.assertAlmostEqual(self.dist.pdf(h), expected, delta=1e-6 * max(1.0, expected))

    def test_cdf_is_a_distribution_function(self):
        self.assertEqual(self.dist.cdf(0.0), 0.0)
        self.assertEqual(self.dist.cdf(-1.0), 0.0)
        self.assertEqual(self.dist.pdf(-1.0), 0.0)
        values = [self.dist.cdf(h) for h in (0.01, 0.1, 0.5, 1.0, 3.0, 10.0)]
        self.assertEqual(values, sorted(values))
        self.assertTrue(all(0.0 <= value <= 1.0 for value in values))
        # h = 10 is several times the mean but still leaves mass in the tail
        self.assertAlmostEqual(values[-1], oracle_cdf(self.params, 10.0), delta=1e-6)
        self.assertGreater(values[-1], 0.999)

    def test_scaled_channel(self):
        # a0 and h_l only rescale the argument
        scaled = ChannelParams.synthetic(alpha=4.2, beta=1.4, omega=2.7317, q=0.8, a0=0.5, h_l=0.8)
        self.assertAlmostEqual(E2EChannelDist(scaled).cdf(0.4 * 0.3), self.dist.cdf(0.3), delta=1e-9)
        self.assertAlmostEqual(E2EChannelDist(scaled).cdf(0.12), oracle_cdf(scaled, 0.12), delta=1e-6)

    def test_symmetric_pointing_uses_one_term(self):
        params = ChannelParams.synthetic(alpha=4.2, beta=1.4, omega=2.0, q=1.0)
        dist = E2EChannelDist(params, n_terms=10)
        self.assertEqual(dist.terms, 1)
        self.assertEqual(dist.term_limit, 1)
        self.assertAlmostEqual(dist.cdf(0.3), oracle_cdf(params, 0.3), delta=1e-6)

    def test_integer_shape_difference(self):
        params = ChannelParams.synthetic(alpha=3.0, beta=2.0, omega=2.7317, q=0.8)
        with self.assertLogs('oris_noma', level='WARNING'):
            dist = E2EChannelDist(params)
        self.assertNotEqual(dist.beta, 2.0)
        self.assertAlmostEqual(dist.cdf(0.3), oracle_cdf(params, 0.3), delta=1e-5)

    def test_table1_pointing_is_nearly_deterministic(self):
        # omega is huge for the parameter table, so h_g stays at a0
        params = derive_channel_params(GeometryConfig.table1(1))
        dist = E2EChannelDist(params)
        h = 0.5 * params.scale
        self.assertAlmostEqual(dist.cdf(h), cdf_turbulence(0.5, params), delta=1e-6)

    def test_series_abscissa(self):
        self.assertAlmostEqual(series_abscissa(self.params), 0.7, delta=1e-12)
        self.assertAlmostEqual(self.dist.abscissa, 0.7, delta=1e-12)

    def test_invalid_truncation(self):
        with self.assertRaises(DistributionException):
            E2EChannelDist(self.params, n_terms=0)

    def test_three_terms_are_enough(self):
        short = E2EChannelDist(self.params, n_terms=3, max_terms=3)
        fixed = E2EChannelDist(self.params, n_terms=10, max_terms=10)
        for h in (0.05, 0.3, 1.0, 2.0):
            expected = fixed.cdf(h)
            self.assertAlmostEqual(short.cdf(h), expected, delta=1e-2 * expected)

    def test_random_parameter_sets(self):
        rng = np.random.default_rng(5)
        for alpha, beta, q, omega in zip(rng.uniform(1.0, 8.0, 5), rng.uniform(1.0, 8.0, 5), rng.uniform(0.3, 1.0, 5),
                                         rng.uniform(1.0, 10.0, 5)):
            params = ChannelParams.synthetic(alpha=float(alpha), beta=float(beta), omega=float(omega), q=float(q))
            dist = E2EChannelDist(params)
            for h in (0.05, 0.2, 0.5, 1.0, 2.0):
                expected = oracle_cdf(params, h)
                if expected >= 1e-6:
                    self.assertAlmostEqual(dist.cdf(h), expected, delta=1e-3 * expected)
                expected = oracle_pdf(params, h)
                if expected >= 1e-6:
                    self.assertAlmostEqual(dist.pdf(h), expected, delta=1e-3 * expected)

    def test_requested_truncation_does_not_matter(self):
        rng = np.random.default_rng(11)
        for alpha, beta, q, omega in zip(rng.uniform(1.0, 8.0, 5), rng.uniform(1.0, 8.0, 5), rng.uniform(0.3, 1.0, 5),
                                         rng.uniform(1.0, 10.0, 5)):
            params = ChannelParams.synthetic(alpha=float(alpha), beta=float(beta), omega=float(omega), q=float(q))
            short, default = E2EChannelDist(params, n_terms=3), E2EChannelDist(params, n_terms=10)
            for h in (0.05, 0.3, 1.0, 2.0):
                expected = default.cdf(h)
                if expected >= 1e-6:
                    self.assertAlmostEqual(short.cdf(h), expected, delta=1e-2 * expected)

    def test_density_is_normalised(self):
        for params in (self.params, ChannelParams.synthetic(alpha=4.5828, beta=7.6532, omega=9.5378, q=0.3)):
            dist = E2EChannelDist(params)
            lower, _ = integrate.quad(dist.pdf, 0.0, 1.0, epsabs=1e-10, limit=200)
            upper, _ = integrate.quad(dist.pdf, 1.0, 3.0, epsabs=1e-10, limit=200)
            tail = 1.0 - oracle_cdf(params, 3.0)
            self.assertAlmostEqual(lower + upper + tail, 1.0, delta=1e-4)

    def test_strong_asymmetry_extends_the_series(self):
        params = ChannelParams.synthetic(alpha=4.5828, beta=7.6532, omega=9.5378, q=0.3)
        dist = E2EChannelDist(params)
        with self.assertNoLogs('oris_noma', level='WARNING'):
            values = [(dist.cdf(h), dist.pdf(h)) for h in (0.3, 0.6, 1.0)]
        for h, (cdf, pdf) in zip((0.3, 0.6, 1.0), values):
            expected = oracle_cdf(params, h)
            self.assertAlmostEqual(cdf, expected, delta=1e-3 * expected)
            expected = oracle_pdf(params, h)
            self.assertAlmostEqual(pdf, expected, delta=1e-3 * expected)

    def test_short_series_warns(self):
        params = ChannelParams.synthetic(alpha=4.2, beta=1.4, omega=2.7317, q=0.3)
        with self.assertLogs('oris_noma', level='WARNING'):
            E2EChannelDist(params, n_terms=3, max_terms=3).cdf(0.3)


class TestAsymptotics(unittest.TestCase):

    def test_turbulence_limited(self):
        params = ChannelParams.synthetic(alpha=4.2, beta=1.4, omega=2.7317, q=0.8)
        dist = E2EChannelDist(params)
        form, value = dist.cdf_asymptotic(1e-6)
        self.assertEqual(form.branch, Branch.TURBULENCE_LIMITED)
        self.assertAlmostEqual(form.exponent, 1.4, delta=1e-12)
        self.assertAlmostEqual(value / dist.cdf(1e-6), 1.0, delta=2e-3)

    def test_decay_exponent(self):
        dist = E2EChannelDist(ChannelParams.synthetic(alpha=4.2, beta=1.4, omega=2.7317, q=0.8))
        slope = math.log(dist.cdf(1e-5) / dist.cdf(1e-6)) / math.log(10.0)
        self.assertAlmostEqual(slope, 1.4, delta=0.01)

    def test_pointing_limited(self):
        params = ChannelParams.synthetic(alpha=6.0, beta=4.5, omega=1.5, q=1.0)
        dist = E2EChannelDist(params)
        form, value = dist.cdf_asymptotic(1e-4)
        self.assertEqual(form.branch, Branch.POINTING_LIMITED)
        self.assertAlmostEqual(form.exponent, 1.5, delta=1e-12)
        self.assertAlmostEqual(value / dist.cdf(1e-4), 1.0, delta=1e-3)

    def test_truncated_log_series_warns(self):
        params = ChannelParams.synthetic(alpha=6.0, beta=4.5, omega=1.5, q=0.8)
        dist = E2EChannelDist(params)
        with self.assertLogs('oris_noma', level='WARNING'):
            form, _ = dist.cdf_asymptotic(1e-10, log_series_terms=2)
        self.assertEqual(form.branch, Branch.POINTING_LIMITED)
        self.assertEqual(len(form.log_coefficients), 2)

    def test_non_convergent_branch(self):
        params = ChannelParams.synthetic(alpha=4.2, beta=1.4, omega=2.7317, q=0.3)
        dist = E2EChannelDist(params, n_terms=60)
        self.assertFalse(dist.asymptotic_form().converges)
        with self.assertRaises(NonConvergentAsymptoticException):
            dist.cdf_asymptotic(1e-6)

    def test_overflowing_asymptote_is_a_distribution_error(self):
        form = AsymptoticCdf(Branch.TURBULENCE_LIMITED, 1.0, 8.0, 10, True)
        self.assertAlmostEqual(form.value(0.5), 0.5 ** 8, delta=1e-15)
        with self.assertRaises(DistributionException):
            form.value(1e300)

    def test_degenerate_branch(self):
        params = ChannelParams.synthetic(alpha=4.2, beta=2.8, omega=2.8, q=1.0)
        with self.assertRaises(DegenerateAsymptoticException):
            E2EChannelDist(params).cdf_asymptotic(1e-6)


if __name__ == '__main__':
    unittest.main()
