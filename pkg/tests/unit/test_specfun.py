import cmath
import math
import unittest
from unittest.mock import patch

import numpy as np
from scipy import special

from oris_noma.utils.specfun import (ContourException, ContourSpec, DomainException, MellinFamily, MellinIntegrand,
                                     MellinResult, PoleException, ToleranceException, bessel_i0, bessel_k,
                                     cdf_family_small_z, log_bessel_i0, log_bessel_k, log_gamma, mellin_barnes,
                                     mellin_barnes_series, meijer_g_cdf_family, meijer_g_pdf_family,
                                     separate_shapes)


class TestScalarFunctions(unittest.TestCase):

    def test_log_gamma(self):
        self.assertAlmostEqual(cmath.exp(log_gamma(5)).real, 24.0, delta=1e-10)
        self.assertAlmostEqual(cmath.exp(log_gamma(0.5)).real, math.sqrt(math.pi), delta=1e-12)
        self.assertAlmostEqual(log_gamma(2.5 + 3j), complex(special.loggamma(2.5 + 3j)), delta=1e-12)

    def test_log_gamma_conjugate_symmetry(self):
        for z in (0.3 + 2j, 2.5 - 7j, -1.5 + 0.5j, 40.0 + 300j):
            self.assertAlmostEqual(log_gamma(z.conjugate()), log_gamma(z).conjugate(), delta=1e-10)

    def test_log_gamma_poles(self):
        for z in (0, -1, -2.0):
            with self.assertRaises(PoleException):
                log_gamma(z)

    def test_bessel(self):
        self.assertEqual(bessel_i0(0.0), 1.0)
        self.assertAlmostEqual(bessel_k(0.5, 1.0), math.sqrt(math.pi / 2.0) * math.exp(-1.0), delta=1e-12)
        # integral of exp(-x cosh t) cosh(nu t) over t > 0
        self.assertAlmostEqual(bessel_k(1.3, 2.4), 0.0943992, delta=1e-6)
        with self.assertRaises(DomainException):
            bessel_k(1.0, 0.0)
        with self.assertRaises(DomainException):
            bessel_i0(math.inf)

    def test_log_bessel_i0(self):
        self.assertEqual(float(log_bessel_i0(0.0)), 0.0)
        self.assertAlmostEqual(float(log_bessel_i0(10.0)), math.log(special.i0(10.0)), delta=1e-12)
        self.assertTrue(np.isfinite(log_bessel_i0(5000.0)))

    def test_log_bessel_k(self):
        self.assertAlmostEqual(float(log_bessel_k(1.5, 2.0)), math.log(special.kv(1.5, 2.0)), delta=1e-12)
        tiny = float(log_bessel_k(30.0, 1e-300))
        self.assertTrue(math.isfinite(tiny))
        self.assertGreater(tiny, 0.0)
        with self.assertRaises(DomainException):
            log_bessel_k(1.0, np.array([1.0, -1.0]))

    def test_separate_shapes(self):
        self.assertEqual(separate_shapes(3.2, 1.7), (3.2, 1.7))
        with self.assertLogs('oris_noma', level='WARNING'):
            alpha, beta = separate_shapes(3.0, 2.0)
        self.assertEqual(alpha, 3.0)
        self.assertAlmostEqual(beta, 2.0 - 1e-6, delta=1e-12)


class TestMellinBarnes(unittest.TestCase):
    def setUp(self):
        self.alpha, self.beta, self.c = 2.5, 1.7, 3.1

    def test_pole_bounds(self):
        cdf = MellinIntegrand(self.alpha, self.beta, self.c, 0, MellinFamily.CDF)
        pdf = MellinIntegrand(self.alpha, self.beta, self.c, 0, MellinFamily.PDF)
        self.assertEqual(cdf.pole_bounds(), (0.0, 1.7))
        lower, upper = pdf.pole_bounds()
        self.assertEqual(lower, -math.inf)
        self.assertAlmostEqual(upper, 0.7, delta=1e-12)
        self.assertAlmostEqual(ContourSpec.default_for(cdf).abscissa, 0.85, delta=1e-12)
        self.assertAlmostEqual(ContourSpec.default_for(pdf).abscissa, 0.2, delta=1e-12)

    def test_invalid_integrand(self):
        with self.assertRaises(ContourException):
            MellinIntegrand(-1.0, self.beta, self.c, 0, MellinFamily.CDF)
        with self.assertRaises(ContourException):
            MellinIntegrand(self.alpha, self.beta, self.c, -1, MellinFamily.CDF)

    def test_contour_doubling_keeps_spacing(self):
        contour = ContourSpec(0.5)
        doubled = contour.doubled()
        self.assertEqual(doubled.half_height, 2.0 * contour.half_height)
        self.assertAlmostEqual(doubled.spacing, contour.spacing, delta=1e-15)

    def test_abscissa_outside_strip(self):
        integrand = MellinIntegrand(self.alpha, self.beta, self.c, 0, MellinFamily.CDF)
        with self.assertRaises(ContourException):
            mellin_barnes(integrand, 1.0, contour=ContourSpec(2.0))
        with self.assertRaises(ContourException):
            mellin_barnes(integrand, 1.0, contour=ContourSpec(-0.1))

    def test_argument_domain(self):
        integrand = MellinIntegrand(self.alpha, self.beta, self.c, 0, MellinFamily.CDF)
        with self.assertRaises(DomainException):
            mellin_barnes(integrand, 0.0)

    def test_reduced_matches_gamma_ratio_form(self):
        for family in MellinFamily:
            for k in (0, 2):
                reduced = mellin_barnes(MellinIntegrand(self.alpha, self.beta, self.c, k, family), 0.8)
                full = mellin_barnes(MellinIntegrand(self.alpha, self.beta, self.c, k, family, reduced=False), 0.8)
                self.assertAlmostEqual(reduced.value, full.value, delta=1e-10)

    def test_large_argument_limit(self):
        # only the pole at s = 0 lies left of the line
        for k in (0, 2):
            expected = special.gamma(self.alpha) * special.gamma(self.beta) / self.c ** (2 * k + 1)
            value = meijer_g_cdf_family(k, self.alpha, self.beta, self.c, 400.0)
            self.assertAlmostEqual(value, expected, delta=1e-8 * expected)
        self.assertAlmostEqual(meijer_g_pdf_family(0, self.alpha, self.beta, self.c, 400.0), 0.0, delta=1e-10)

    def test_small_argument_matches_residues(self):
        z = 1e-4
        value = meijer_g_cdf_family(0, self.alpha, self.beta, self.c, z)
        expected = cdf_family_small_z(0, self.alpha, self.beta, self.c, z)
        self.assertAlmostEqual(value, expected, delta=5e-3 * abs(expected))

    def test_pdf_family_is_derivative_of_cdf_family(self):
        z, step = 1.3, 1e-4
        for k in (0, 1):
            upper = meijer_g_cdf_family(k, self.alpha, self.beta, self.c, z + step)
            lower = meijer_g_cdf_family(k, self.alpha, self.beta, self.c, z - step)
            derivative = (upper - lower) / (2.0 * step)
            self.assertAlmostEqual(meijer_g_pdf_family(k, self.alpha, self.beta, self.c, z), derivative, delta=1e-6)

    def test_series_matches_single_terms(self):
        log_weights = [0.0, math.log(2.0), math.log(3.0)]
        series = mellin_barnes_series(MellinFamily.CDF, 3, self.alpha, self.beta, self.c, 0.6, log_weights)
        self.assertEqual(len(series.values), 3)
        for k, log_weight in enumerate(log_weights):
            single = mellin_barnes(MellinIntegrand(self.alpha, self.beta, self.c, k, MellinFamily.CDF), 0.6)
            self.assertAlmostEqual(series.values[k], math.exp(log_weight) * single.value, delta=1e-10)
        self.assertTrue(series.conjugate_symmetric(atol=1e-12))

    def test_series_weight_count(self):
        with self.assertRaises(ContourException):
            mellin_barnes_series(MellinFamily.CDF, 3, self.alpha, self.beta, self.c, 0.6, [0.0, 0.0])

    @patch('oris_noma.utils.specfun.MB_MAX_HALF_HEIGHT', 60.0)
    def test_tail_above_tolerance(self):
        integrand = MellinIntegrand(self.alpha, self.beta, self.c, 0, MellinFamily.CDF)
        with self.assertRaises(ToleranceException):
            mellin_barnes(integrand, 0.8, tol=1e-300)

    def test_result_symmetry_check(self):
        contour = ContourSpec(0.5)
        clean = MellinResult(np.array([1.0]), np.array([1e-14]), 0.0, contour)
        noisy = MellinResult(np.array([1.0]), np.array([1e-3]), 0.0, contour)
        self.assertTrue(clean.conjugate_symmetric())
        self.assertFalse(noisy.conjugate_symmetric())
        self.assertEqual(clean.value, 1.0)


if __name__ == '__main__':
    unittest.main()
