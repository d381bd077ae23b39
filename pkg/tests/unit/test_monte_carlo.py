import math
import unittest
from unittest.mock import patch

import numpy as np
from scipy import stats

from oris_noma.models.channel import (ChannelParams, GeometryConfig, cdf_pointing, cdf_turbulence,
                                      derive_channel_params)
from oris_noma.models.distribution import E2EChannelDist
from oris_noma.models.outage import NomaConfig, Receiver, op_oma, op_rx1, op_rx2
from oris_noma.simulation.monte_carlo import (McEstimate, McScenario, MonteCarloException, SamplerParams,
                                              empirical_cdf, estimate_op, outage_mask, sample_channel,
                                              sample_pointing, sample_turbulence)


class TestSamplers(unittest.TestCase):
    def setUp(self):
        self.params = ChannelParams.synthetic(alpha=4.2, beta=1.4, omega=2.7317, q=0.8)
        self.sampler = SamplerParams.from_channel_params(self.params)

    def test_sampler_weights(self):
        p = self.params
        self.assertAlmostEqual(self.sampler.lambda1 + self.sampler.lambda2, p.c / p.omega ** 2, delta=1e-12)
        self.assertAlmostEqual(self.sampler.lambda1 - self.sampler.lambda2, p.v / p.omega ** 2, delta=1e-12)
        with self.assertRaises(MonteCarloException):
            SamplerParams(lambda1=0.0, lambda2=0.1, alpha=4.2, beta=1.4)

    def test_pointing_gain_support(self):
        sampler = SamplerParams.from_channel_params(
            ChannelParams.synthetic(alpha=4.2, beta=1.4, omega=2.7317, q=0.8, a0=0.6))
        draws = sample_pointing(np.random.default_rng(7), sampler, 10000)
        self.assertTrue(np.all(draws > 0.0))
        self.assertTrue(np.all(draws <= 0.6))

    def test_turbulence_has_unit_mean(self):
        draws = sample_turbulence(np.random.default_rng(11), 4.2, 1.4, 200000)
        self.assertAlmostEqual(float(np.mean(draws)), 1.0, delta=0.015)

    def test_empirical_cdf_matches_series(self):
        n = 200000
        dist = E2EChannelDist(self.params)
        grid = np.geomspace(0.02, 4.0, 20)
        empirical = empirical_cdf(2024, self.sampler, grid, n, workers=1)
        analytic = np.array([dist.cdf(h) for h in grid])
        self.assertLess(float(np.max(np.abs(empirical - analytic))), 2.0 / math.sqrt(n))


class TestSamplerGoodnessOfFit(unittest.TestCase):
    # (alpha, beta, omega, q)
    PARAMETER_SETS = ((4.2, 1.4, 2.7317, 0.8), (2.0, 1.5, 5.0, 0.5), (6.0, 3.5, 1.5, 1.0), (1.2, 1.05, 8.0, 0.3),
                      (7.5, 4.0, 3.0, 0.65))
    N = 100_000
    # Kolmogorov critical value at the 1% level
    CRITICAL = 1.63 / math.sqrt(N)

    @staticmethod
    def tabulated(draws, cdf):
        grid = np.quantile(draws, np.linspace(0.0, 1.0, 401))
        table = np.array([cdf(float(x)) for x in grid])
        return lambda x: np.interp(x, grid, table)

    def test_turbulence_sampler(self):
        for seed, (alpha, beta, omega, q) in enumerate(self.PARAMETER_SETS):
            params = ChannelParams.synthetic(alpha=alpha, beta=beta, omega=omega, q=q)
            draws = sample_turbulence(np.random.default_rng(100 + seed), alpha, beta, self.N)
            result = stats.kstest(draws, self.tabulated(draws, lambda x: cdf_turbulence(x, params)))
            self.assertLess(result.statistic, self.CRITICAL, msg=f"alpha={alpha}, beta={beta}")

    def test_pointing_sampler(self):
        for seed, (alpha, beta, omega, q) in enumerate(self.PARAMETER_SETS):
            params = ChannelParams.synthetic(alpha=alpha, beta=beta, omega=omega, q=q, a0=0.8)
            draws = sample_pointing(np.random.default_rng(200 + seed), SamplerParams.from_channel_params(params),
                                    self.N)
            result = stats.kstest(draws, self.tabulated(draws, lambda x: cdf_pointing(x, params)))
            self.assertLess(result.statistic, self.CRITICAL, msg=f"omega={omega}, q={q}")

    def test_mixture_identity(self):
        for alpha, beta, omega, q in self.PARAMETER_SETS:
            p = ChannelParams.synthetic(alpha=alpha, beta=beta, omega=omega, q=q)
            sampler = SamplerParams.from_channel_params(p)
            self.assertAlmostEqual((p.c * p.c - p.v * p.v) / omega ** 2, 1.0, delta=1e-12)
            self.assertAlmostEqual((sampler.lambda1 + sampler.lambda2) * omega ** 2 / p.c, 1.0, delta=1e-12)
            self.assertEqual(sampler.lambda1 >= sampler.lambda2, q <= 1.0)


class TestOutageMask(unittest.TestCase):
    def setUp(self):
        sampler = SamplerParams(lambda1=0.1, lambda2=0.1, alpha=4.2, beta=1.4)
        self.cfg = NomaConfig(snr_db=0.0)
        self.sampler = sampler

    def scenario(self, which, oma=False):
        return McScenario(self.sampler, self.cfg, which, oma)

    def test_rx1(self):
        # 0.4 * h^2 * 0.6 < 3  <=>  h^2 < 12.5
        mask = outage_mask(np.array([3.0, 4.0]), self.scenario(Receiver.RX1))
        self.assertEqual(mask.tolist(), [True, False])

    def test_rx2_needs_both_stages(self):
        # SIC stage: h^2 >= 8.33, own stage: h^2 >= 360.5
        mask = outage_mask(np.array([3.0, 10.0, 20.0]), self.scenario(Receiver.RX2))
        self.assertEqual(mask.tolist(), [True, True, False])

    def test_single(self):
        mask = outage_mask(np.array([1.0, 2.0]), self.scenario(Receiver.SINGLE))
        self.assertEqual(mask.tolist(), [True, False])

    def test_oma(self):
        # 0.4 * h^2 < 2^4 - 1
        mask = outage_mask(np.array([6.0, 7.0]), self.scenario(Receiver.RX1, oma=True))
        self.assertEqual(mask.tolist(), [True, False])

    def test_powers_at_the_guard_are_always_outage(self):
        # gamma_1 = 3 s / (s + 4) stays below gamma_th1 = 3 for any gain
        self.cfg = NomaConfig(snr_db=0.0, a1=0.75, a2=0.25)
        h = np.array([0.1, 1.0, 10.0, 1e4])
        self.assertTrue(np.all(outage_mask(h, self.scenario(Receiver.RX1))))
        self.assertTrue(np.all(outage_mask(h, self.scenario(Receiver.RX2))))


class TestEstimateOp(unittest.TestCase):
    def setUp(self):
        self.params = ChannelParams.synthetic(alpha=4.2, beta=1.4, omega=2.7317, q=0.8)
        self.sampler = SamplerParams.from_channel_params(self.params)
        self.dist = E2EChannelDist(self.params)
        # argument of the Rx1 CDF is 0.5
        self.cfg = NomaConfig(snr_db=10.0 * math.log10(50.0))

    def test_from_count(self):
        estimate = McEstimate.from_count(25, 100, 1)
        self.assertEqual(estimate.p_hat, 0.25)
        self.assertAlmostEqual(estimate.std_err, math.sqrt(0.25 * 0.75 / 100), delta=1e-15)

    def test_agrees_with_analytic(self):
        for which, analytic in ((Receiver.RX1, op_rx1), (Receiver.RX2, op_rx2)):
            expected = analytic(self.dist, self.cfg).p_out
            estimate = estimate_op(99, McScenario(self.sampler, self.cfg, which), 200000, workers=1)
            self.assertAlmostEqual(estimate.p_hat, expected, delta=3.0 * estimate.std_err)

    def test_oma_agrees_with_analytic(self):
        expected = op_oma(self.dist, self.cfg, Receiver.RX2).p_out
        estimate = estimate_op(5, McScenario(self.sampler, self.cfg, Receiver.RX2, oma=True), 200000, workers=1)
        self.assertAlmostEqual(estimate.p_hat, expected, delta=3.0 * estimate.std_err)

    @patch('oris_noma.simulation.monte_carlo.MC_SHARD_SIZE', 1000)
    def test_independent_of_worker_count(self):
        scenario = McScenario(self.sampler, self.cfg, Receiver.RX1)
        serial = estimate_op(42, scenario, 5500, workers=1)
        threaded = estimate_op(42, scenario, 5500, workers=4)
        self.assertEqual(serial, threaded)
        self.assertEqual(serial, estimate_op(42, scenario, 5500, workers=1))

    @patch('oris_noma.simulation.monte_carlo.sample_channel', wraps=sample_channel)
    def test_violated_condition_is_sampled_as_outage(self, mock_sample_channel):
        # a1/a2 <= gamma_th1 keeps gamma_1 below the threshold for every draw
        for a1, a2 in ((0.7, 0.3), (0.75, 0.25)):
            cfg = NomaConfig(a1=a1, a2=a2)
            for which in (Receiver.RX1, Receiver.RX2):
                estimate = estimate_op(1, McScenario(self.sampler, cfg, which), 5000, workers=1)
                self.assertEqual(estimate.p_hat, 1.0)
                self.assertEqual(estimate.std_err, 0.0)
            self.assertEqual(op_rx2(self.dist, cfg).p_out, 1.0)
        self.assertTrue(mock_sample_channel.called)

    def test_standard_error_shrinks_with_trials(self):
        scenario = McScenario(self.sampler, self.cfg, Receiver.RX1)
        small = estimate_op(3, scenario, 20_000, workers=1)
        large = estimate_op(3, scenario, 80_000, workers=1)
        self.assertAlmostEqual(small.std_err / large.std_err, 2.0, delta=0.2)

    def test_needs_trials(self):
        with self.assertRaises(MonteCarloException):
            estimate_op(1, McScenario(self.sampler, self.cfg, Receiver.RX1), 0)
        with self.assertRaises(MonteCarloException):
            empirical_cdf(1, self.sampler, [0.5], 0)


class TestParameterTableAgreement(unittest.TestCase):
    TRIALS = 1_000_000

    def test_rx1_and_rx2_at_high_snr(self):
        compared = 0
        for which, index, analytic in ((Receiver.RX1, 1, op_rx1), (Receiver.RX2, 2, op_rx2)):
            params = derive_channel_params(GeometryConfig.table1(index))
            dist = E2EChannelDist(params)
            sampler = SamplerParams.from_channel_params(params)
            for snr_db in (60.0, 80.0, 100.0, 120.0):
                cfg = NomaConfig(snr_db=snr_db)
                expected = analytic(dist, cfg).p_out
                if expected < 1e-4:
                    continue
                estimate = estimate_op(7 + compared, McScenario(sampler, cfg, which), self.TRIALS, workers=1)
                self.assertAlmostEqual(estimate.p_hat, expected, delta=3.0 * estimate.std_err,
                                       msg=f"{which.value} at {snr_db:g} dB")
                compared += 1
        self.assertGreaterEqual(compared, 1)


if __name__ == '__main__':
    unittest.main()
