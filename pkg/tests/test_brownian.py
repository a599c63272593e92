import math

import numpy as np
import pytest
from scipy import stats as sps

from fluctmob.brownian import (
    ParticleEnsemble,
    advance_particles,
    bm_variance_scale,
    fluctuation_increment,
    particle_fluctuation,
    sample_initial_particles,
)
from fluctmob.analytic import heat_solve
from fluctmob.lattice import parse_trig


def rng_for(tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(1234, spawn_key=(tag,)))


UNIFORM = parse_trig("const:1", d=1)
COS = parse_trig("cos:1:1")


class TestSampling:
    def test_empty_ensemble(self):
        ens = sample_initial_particles(0, UNIFORM, rng_for(0))
        assert ens.count == 0

    def test_uniform_cos_mean(self):
        ens = sample_initial_particles(100_000, UNIFORM, rng_for(1))
        mean = float(np.mean(COS(ens.positions)))
        assert abs(mean) <= 4 / math.sqrt(2 * 100_000)

    def test_density_validation(self):
        with pytest.raises(ValueError):
            sample_initial_particles(10, parse_trig("const:0.9", d=1), rng_for(2))
        with pytest.raises(ValueError):
            sample_initial_particles(10, parse_trig("const:1+cos:1:1.2"), rng_for(3))

    def test_nonuniform_density_goodness_of_fit(self):
        # rho0 = 1 + cos(2 pi x); chi-square against exact bin masses at 1%
        rho0 = parse_trig("const:1+cos:1:1")
        ens = sample_initial_particles(40_000, rho0, rng_for(4))
        bins = 20
        counts, edges = np.histogram(ens.positions[:, 0], bins=bins, range=(0.0, 1.0))
        # exact mass of [a,b]: (b-a) + (sin(2 pi b) - sin(2 pi a)) / (2 pi)
        masses = np.diff(edges) + (np.sin(2 * np.pi * edges[1:]) - np.sin(2 * np.pi * edges[:-1])) / (
            2 * np.pi
        )
        expected = masses * ens.count
        chi2 = float(np.sum((counts - expected) ** 2 / expected))
        assert chi2 < sps.chi2.ppf(0.99, bins - 1)

    def test_positions_wrapped(self):
        ens = sample_initial_particles(1000, parse_trig("const:1+cos:1:0.5"), rng_for(5))
        assert ens.positions.min() >= 0.0 and ens.positions.max() < 1.0


class TestAdvance:
    def test_zero_time_is_identity(self):
        ens = sample_initial_particles(100, UNIFORM, rng_for(6))
        assert advance_particles(ens, 0.0, rng_for(7)) is ens

    def test_increment_variance(self):
        base = ParticleEnsemble(np.full((100_000, 1), 0.5))
        dt = 0.003
        stepped = advance_particles(base, dt, rng_for(8))
        inc = (stepped.positions - 0.5 + 0.5) % 1.0 - 0.5
        var = float(np.var(inc))
        assert abs(var - dt) <= 4 * dt * math.sqrt(2 / 100_000)

    def test_variance_scale_tag(self):
        assert bm_variance_scale("dt") == 1.0
        assert bm_variance_scale("2dt") == 2.0
        with pytest.raises(ValueError):
            bm_variance_scale("3dt")

    def test_uniform_law_is_stationary(self):
        ens = sample_initial_particles(50_000, UNIFORM, rng_for(9))
        moved = advance_particles(ens, 0.13, rng_for(10))
        mean = float(np.mean(COS(moved.positions)))
        assert abs(mean) <= 3 / math.sqrt(2 * 50_000)

    def test_composition_in_distribution(self):
        one = advance_particles(sample_initial_particles(4000, UNIFORM, rng_for(11)), 0.05, rng_for(12))
        two = advance_particles(
            advance_particles(sample_initial_particles(4000, UNIFORM, rng_for(13)), 0.02, rng_for(14)),
            0.03,
            rng_for(15),
        )
        assert sps.ks_2samp(one.positions[:, 0], two.positions[:, 0]).pvalue > 0.01


class TestFluctuation:
    def test_constant_test_function_is_exact_zero(self):
        ens = sample_initial_particles(5000, UNIFORM, rng_for(16))
        val = particle_fluctuation(ens, parse_trig("const:0.7", d=1), UNIFORM)
        assert abs(val) < 1e-10

    def test_initial_variance_matches_single_draw_variance(self):
        # Var(phi(X)) = 1/2 for phi = cos under the uniform law
        reps = 3000
        rng = rng_for(17)
        vals = np.empty(reps)
        for i in range(reps):
            ens = sample_initial_particles(500, UNIFORM, rng)
            vals[i] = particle_fluctuation(ens, COS, UNIFORM)
        var = float(np.var(vals, ddof=1))
        se = var * math.sqrt(2 / reps)
        assert abs(var - 0.5) <= 4 * se

    def test_fused_increment_matches_public_path_in_distribution(self):
        t, h, count, reps = 0.05, 0.02, 400, 1500
        rho_t = heat_solve(UNIFORM, t)
        rho_th = heat_solve(UNIFORM, t + h)
        rng = rng_for(18)
        fused = np.array(
            [
                fluctuation_increment(count, UNIFORM, 1.0, t, h, COS, rho_t.inner(COS), rho_th.inner(COS), rng)
                for _ in range(reps)
            ]
        )
        rng2 = rng_for(19)
        public = np.empty(reps)
        for i in range(reps):
            ens = sample_initial_particles(count, UNIFORM, rng2)
            ens = advance_particles(ens, t, rng2)
            f1 = particle_fluctuation(ens, COS, rho_t)
            ens = advance_particles(ens, h, rng2)
            public[i] = particle_fluctuation(ens, COS, rho_th) - f1
        assert sps.ks_2samp(fused, public).pvalue > 0.01
