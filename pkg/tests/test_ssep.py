import math

import numpy as np
import pytest
from scipy import stats as sps

from fluctmob.analytic import riemann_mobility
from fluctmob.lattice import Torus, parse_trig
from fluctmob.ssep import (
    Configuration,
    SsepParams,
    advance,
    advance_event_list,
    carre_du_champ_qv_rate,
    empirical,
    fluctuation,
    global_event_rate,
    mean_occupancy_oracle,
    sample_initial,
    simulate_path,
    stationary_qv_reference,
    two_point_correlation,
)


def rng_for(tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(987, spawn_key=(tag,)))


PHI = parse_trig("sin:1:1")


class TestInitialData:
    def test_deterministic_profiles(self):
        torus = Torus(1, 16)
        ones = sample_initial(SsepParams(torus, parse_trig("const:1", d=1)), rng_for(0))
        zeros = sample_initial(SsepParams(torus, parse_trig("const:0", d=1)), rng_for(1))
        assert ones.particle_count == 16
        assert zeros.particle_count == 0

    def test_bernoulli_mean(self):
        torus = Torus(1, 64)
        params = SsepParams(torus, parse_trig("const:0.5", d=1))
        rng = rng_for(2)
        draws = 10_000
        total = 0
        for _ in range(draws):
            total += sample_initial(params, rng).particle_count
        mean = total / (draws * torus.n_sites)
        assert abs(mean - 0.5) <= 4 * 0.5 / math.sqrt(torus.n_sites * draws)

    def test_profile_validation(self):
        with pytest.raises(ValueError):
            SsepParams(Torus(1, 8), parse_trig("const:0.9+cos:1:0.2"))
        with pytest.raises(ValueError):
            SsepParams(Torus(1, 8), parse_trig("cos:1,1:0.2"))


class TestAdvance:
    def test_frozen_configurations(self):
        torus = Torus(1, 8)
        ones = Configuration(torus, np.ones(8, dtype=np.uint8))
        zeros = Configuration(torus, np.zeros(8, dtype=np.uint8))
        assert np.array_equal(advance(ones, 0.5, rng=rng_for(3)).occupancy, ones.occupancy)
        assert np.array_equal(advance(zeros, 0.5, rng=rng_for(4)).occupancy, zeros.occupancy)

    def test_particle_count_conserved(self):
        params = SsepParams(Torus(2, 6), parse_trig("const:0.5+cos:1,0:0.3"))
        rng = rng_for(5)
        config = sample_initial(params, rng)
        count = config.particle_count
        for _ in range(5):
            config = advance(config, 0.02, rng=rng)
            assert config.particle_count == count

    def test_two_site_exact_law(self):
        # single particle on two sites flips at rate 8: P(eta_t(0)=1) = (1+e^{-8t})/2
        torus = Torus(1, 2)
        rng = rng_for(6)
        stay = 0
        paths = 40_000
        start = Configuration(torus, np.array([1, 0], dtype=np.uint8))
        for _ in range(paths):
            stay += int(advance(start, 0.1, rng=rng).occupancy[0])
        p_exact = 0.5 * (1 + math.exp(-0.8))
        se = math.sqrt(p_exact * (1 - p_exact) / paths)
        assert abs(stay / paths - p_exact) <= 3 * se

    def test_event_rate_formula(self):
        assert global_event_rate(Torus(1, 32)) == 32**3
        assert global_event_rate(Torus(2, 8), "inv2d") == 2 * 2 * 0.25 * 8**2 * 64

    def test_markov_composition_distribution(self):
        torus = Torus(1, 8)
        params = SsepParams(torus, parse_trig("const:0.5+cos:1:0.2"))
        rng = rng_for(7)
        reps = 400
        one_shot = np.empty(reps)
        two_step = np.empty(reps)
        for i in range(reps):
            one_shot[i] = empirical(advance(sample_initial(params, rng), 0.08, rng=rng), PHI)
            c = sample_initial(params, rng)
            two_step[i] = empirical(advance(advance(c, 0.05, rng=rng), 0.03, rng=rng), PHI)
        assert sps.ks_2samp(one_shot, two_step).pvalue > 0.01

    def test_uniformized_matches_event_list(self):
        torus = Torus(1, 8)
        params = SsepParams(torus, parse_trig("const:0.5+cos:1:0.2"))
        rng = rng_for(8)
        reps = 400
        a = np.empty(reps)
        b = np.empty(reps)
        for i in range(reps):
            a[i] = empirical(advance(sample_initial(params, rng), 0.06, rng=rng), PHI)
            b[i] = empirical(advance_event_list(sample_initial(params, rng), 0.06, rng=rng), PHI)
        assert sps.ks_2samp(a, b).pvalue > 0.01


class TestObservables:
    def test_empirical_examples(self):
        torus = Torus(1, 2)
        ones = Configuration(torus, np.ones(2, dtype=np.uint8))
        zeros = Configuration(torus, np.zeros(2, dtype=np.uint8))
        assert empirical(ones, parse_trig("const:1", d=1)) == 1.0
        assert empirical(zeros, PHI) == 0.0
        eta = Configuration(torus, np.array([1, 0], dtype=np.uint8))
        assert abs(empirical(eta, PHI)) < 1e-16  # phi(0) = 0

    def test_fluctuation_examples(self):
        torus = Torus(1, 2)
        ones = Configuration(torus, np.ones(2, dtype=np.uint8))
        assert fluctuation(ones, PHI, parse_trig("const:1", d=1)) == 0.0
        eta = Configuration(torus, np.array([1, 0], dtype=np.uint8))
        assert fluctuation(eta, parse_trig("const:0", d=1), parse_trig("const:0.5", d=1)) == 0.0
        assert (
            abs(fluctuation(eta, parse_trig("const:1", d=1), parse_trig("const:0.5", d=1))) < 1e-15
        )

    def test_carre_du_champ_examples(self):
        torus = Torus(1, 2)
        ones = Configuration(torus, np.ones(2, dtype=np.uint8))
        assert carre_du_champ_qv_rate(ones, PHI) == 0.0
        # phi hitting (sqrt2, 0) on the two sites reduces the pairing to eta(0):
        # two active directed edges at rate 2 with unit squared jump -> 4
        eta = Configuration(torus, np.array([1, 0], dtype=np.uint8))
        phi_indicator = parse_trig(f"const:{math.sqrt(2)/2}+cos:1:{math.sqrt(2)/2}")
        assert abs(carre_du_champ_qv_rate(eta, phi_indicator) - 4.0) < 1e-12

    def test_carre_du_champ_product_measure_mean(self):
        # under Bernoulli(p) the expected rate equals the Riemann mobility at p
        torus = Torus(1, 16)
        p = 0.3
        params = SsepParams(torus, parse_trig(f"const:{p}", d=1))
        rng = rng_for(9)
        reps = 3000
        vals = np.array([carre_du_champ_qv_rate(sample_initial(params, rng), PHI) for _ in range(reps)])
        target = riemann_mobility(torus, parse_trig(f"const:{p}", d=1), PHI)
        se = vals.std(ddof=1) / math.sqrt(reps)
        assert abs(vals.mean() - target) <= 3 * se

    def test_two_point_correlation_diagnostic(self):
        torus = Torus(1, 16)
        config = Configuration(torus, np.tile([1, 0], 8).astype(np.uint8))
        assert two_point_correlation(config, 1) == 0.0
        assert two_point_correlation(config, 2) == 0.5


class TestMeanOccupancyOracle:
    def test_time_zero_and_stationary(self):
        torus = Torus(1, 8)
        params = SsepParams(torus, parse_trig("const:0.5+cos:1:0.25"))
        field = mean_occupancy_oracle(params, 0.0)
        assert np.max(np.abs(field.values - params.rho0.sample(torus))) < 1e-12
        flat = SsepParams(torus, parse_trig("const:0.3", d=1))
        assert np.max(np.abs(mean_occupancy_oracle(flat, 0.7).values - 0.3)) < 1e-12

    def test_two_site_deterministic_start(self):
        # profile (1, 0) on two sites: E eta_t = ((1+e^{-8t})/2, (1-e^{-8t})/2)
        torus = Torus(1, 2)
        params = SsepParams(torus, parse_trig("const:0.5+cos:1:0.5"))
        got = mean_occupancy_oracle(params, 0.1).values
        expected = np.array([0.5 * (1 + math.exp(-0.8)), 0.5 * (1 - math.exp(-0.8))])
        assert np.max(np.abs(got - expected)) < 1e-12

    def test_duality_against_monte_carlo(self):
        torus = Torus(1, 16)
        params = SsepParams(torus, parse_trig("const:0.5+cos:1:0.25"))
        phi = parse_trig("cos:1:1")
        rng = rng_for(10)
        reps = 1200
        vals = np.empty(reps)
        for i in range(reps):
            c = advance(sample_initial(params, rng), 0.1, rng=rng)
            vals[i] = empirical(c, phi)
        exact = float(np.mean(mean_occupancy_oracle(params, 0.1).values * phi.sample(torus)))
        se = vals.std(ddof=1) / math.sqrt(reps)
        assert abs(vals.mean() - exact) <= 3 * se


class TestStationaryReference:
    def test_small_h_limit_is_riemann_mobility(self):
        torus = Torus(1, 32)
        lim = stationary_qv_reference(torus, 0.5, PHI, 1e-9)
        assert abs(lim - riemann_mobility(torus, parse_trig("const:0.5", d=1), PHI)) < 1e-6

    def test_monte_carlo_agreement(self):
        torus = Torus(1, 16)
        params = SsepParams(torus, parse_trig("const:0.5", d=1))
        rho = parse_trig("const:0.5", d=1)
        rng = rng_for(11)
        reps, t, h = 1500, 0.05, 0.02
        incs = np.empty(reps)
        for i in range(reps):
            c = advance(sample_initial(params, rng), t, rng=rng)
            f1 = fluctuation(c, PHI, rho)
            incs[i] = fluctuation(advance(c, h, rng=rng), PHI, rho) - f1
        q = float(np.mean(incs**2) / h)
        se = float(np.std(incs**2, ddof=1) / math.sqrt(reps) / h)
        assert abs(q - stationary_qv_reference(torus, 0.5, PHI, h)) <= 3 * se

    def test_argument_validation(self):
        with pytest.raises(ValueError):
            stationary_qv_reference(Torus(1, 8), 1.5, PHI, 0.01)
        with pytest.raises(ValueError):
            stationary_qv_reference(Torus(1, 8), 0.5, PHI, 0.0)


class TestPath:
    def test_snapshots_align_and_conserve(self):
        params = SsepParams(Torus(1, 16), parse_trig("const:0.5+cos:1:0.2"))
        path = simulate_path(params, (0.05, 0.1, 0.2), rng_for(12))
        assert path.times == (0.05, 0.1, 0.2)
        counts = {c.particle_count for c in path.snapshots}
        assert len(counts) == 1

    def test_rejects_decreasing_times(self):
        params = SsepParams(Torus(1, 8), parse_trig("const:0.5", d=1))
        with pytest.raises(ValueError):
            simulate_path(params, (0.2, 0.1), rng_for(13))
