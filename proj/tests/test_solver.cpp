/*
 * Copyright 2026 The ccr Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "ccr/oracle.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace ccr;
using namespace ccr::test;

namespace {

// Monte Carlo averages of taylor_predict features under N(mu, Sigma): the
// second moment sum_j E[x x^T] and the cross moment sum_j E[delta x^T].
struct MonteCarloMoments {
    Matrix second;
    Matrix cross;
};

MonteCarloMoments monte_carlo_moments(std::span<const GroundTruthSample> samples, const MomentSpec& moments,
                                      int draws_per_sample, std::uint64_t seed)
{
    const PerturbationSet set = draw_perturbations(moments, samples.size(), static_cast<std::size_t>(draws_per_sample), seed);
    const Index d = samples.front().feature_dim();
    MonteCarloMoments out{Matrix::Zero(d, d), Matrix::Zero(moments.dim(), d)};
    for (std::size_t j = 0; j < samples.size(); ++j) {
        for (const auto& delta : set.deltas[j]) {
            const Vector x = taylor_predict(samples[j].x_star, samples[j].j_star, delta);
            out.second.noalias() += x * x.transpose();
            out.cross.noalias() += delta * x.transpose();
        }
    }
    out.second /= draws_per_sample;
    out.cross /= draws_per_sample;
    return out;
}

} // namespace

TEST_SUITE("solver")
{
    TEST_CASE("moment helpers")
    {
        const MomentSpec z = MomentSpec::zero(3);
        CHECK(z.mu.isZero());
        CHECK(z.sigma.isZero());
        Vector a(2);
        a << 3.0, 0.5;
        const MomentSpec box = MomentSpec::uniform_box(a);
        CHECK(box.sigma(0, 0) == doctest::Approx(3.0));
        CHECK(box.sigma(1, 1) == doctest::Approx(0.25 / 3.0));
        CHECK(box.sigma(0, 1) == 0.0);
        MomentSpec bad = MomentSpec::zero(2);
        bad.sigma(0, 0) = -1.0;
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        bad.sigma(0, 0) = 1.0;
        bad.sigma(0, 1) = 0.5;
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    }

    TEST_CASE("perfect linear observability gives the identity")
    {
        Vector a(3);
        a << 0.5, 2.0, 1.0;
        const std::vector<GroundTruthSample> one{{Vector::Zero(3), Matrix::Identity(3, 3)}};
        const Regressor r = solve_uncorrelated(one, a, 0.0);
        CHECK((r.r - Matrix::Identity(3, 3)).norm() < 1e-12);
    }

    TEST_CASE("vanishing limits or moments give a vanishing regressor")
    {
        std::mt19937_64 rng(1);
        const auto samples = random_samples(12, 6, 3, rng);
        double previous = std::numeric_limits<double>::infinity();
        for (const double scale : {1.0, 1e-2, 1e-4, 1e-6}) {
            const Regressor r = solve_uncorrelated(samples, Vector::Constant(3, scale), 0.0);
            CHECK(r.r.norm() < previous);
            previous = r.r.norm();
        }
        CHECK(previous < 1e-9);
        CHECK(solve_correlated(samples, MomentSpec::zero(3), 0.0).r.norm() == 0.0);
    }

    TEST_CASE("correlated solve reduces to the uncorrelated one")
    {
        std::mt19937_64 rng(2);
        for (int trial = 0; trial < 20; ++trial) {
            const Index d = 4 + static_cast<Index>(rng() % 61);
            const Index dim = 1 + static_cast<Index>(rng() % 12);
            // Enough samples for a full-rank system.
            const Index m = d + static_cast<Index>(rng() % 8);
            const auto samples = random_samples(m, d, dim, rng);
            const Vector a = random_vector(dim, rng).cwiseAbs().array() + 0.1;
            const Regressor u = solve_uncorrelated(samples, a, 1e-3);
            const Regressor c = solve_correlated(samples, MomentSpec::uniform_box(a), 1e-3);
            CHECK(relative_frobenius(c.r, u.r) < 1e-12);
        }
    }

    TEST_CASE("functional covariance: degenerate moments, expanded vs block form, PSD")
    {
        std::mt19937_64 rng(3);
        const auto samples = random_samples(5, 8, 3, rng);
        Matrix xx = Matrix::Zero(8, 8);
        for (const auto& s : samples) {
            xx += s.x_star * s.x_star.transpose();
        }
        CHECK((functional_covariance(samples, MomentSpec::zero(3)) - xx).norm() < 1e-12);
        for (int trial = 0; trial < 10; ++trial) {
            const MomentSpec m = random_moments(3, rng);
            const Matrix expanded = functional_covariance(samples, m);
            const Matrix blocks = functional_covariance_blocks(samples, m);
            CHECK(relative_frobenius(expanded, blocks) < 1e-10);
            CHECK((expanded - expanded.transpose()).norm() < 1e-10 * expanded.norm());
            const Eigen::SelfAdjointEigenSolver<Matrix> eig(expanded);
            CHECK(eig.eigenvalues().minCoeff() > -1e-10 * eig.eigenvalues().maxCoeff());
        }
    }

    TEST_CASE("cross covariance: zero mean form and covariance solve")
    {
        std::mt19937_64 rng(4);
        const auto samples = random_samples(6, 10, 4, rng);
        MomentSpec m = random_moments(4, rng);
        m.mu.setZero();
        Matrix expected = Matrix::Zero(4, 10);
        for (const auto& s : samples) {
            expected += m.sigma * s.j_star.transpose();
        }
        CHECK(relative_frobenius(functional_cross_covariance(samples, m), expected) < 1e-12);

        const MomentSpec full = random_moments(4, rng);
        const double ridge = 1e-4;
        const Regressor direct = solve_correlated(samples, full, ridge);
        const Regressor via_cov = solve_from_covariances(functional_cross_covariance(samples, full),
                                                         functional_covariance(samples, full), ridge);
        CHECK(relative_frobenius(via_cov.r, direct.r) < 1e-9);
    }

    TEST_CASE("functional moments match Monte Carlo")
    {
        std::mt19937_64 rng(5);
        const auto samples = random_samples(4, 8, 3, rng);
        const MomentSpec m = random_moments(3, rng);
        const MonteCarloMoments mc = monte_carlo_moments(samples, m, 25000, 17);
        CHECK(relative_frobenius(mc.second, functional_covariance(samples, m)) < 0.02);
        CHECK(relative_frobenius(mc.cross, functional_cross_covariance(samples, m)) < 0.02);
    }

    TEST_CASE("correlated solve matches Gaussian sampling regression")
    {
        std::mt19937_64 rng(6);
        const auto samples = random_samples(3, 6, 4, rng);
        const MomentSpec m = random_moments(4, rng);
        const auto biased = with_bias(samples);
        const Regressor closed = solve_correlated(biased, m, 1e-9);
        const PerturbationSet set = draw_perturbations(m, samples.size(), 33334, 99);
        const Regressor sampled = train_sampling_regressor(samples, set, 1e-9);
        CHECK(relative_frobenius(sampled.r, closed.r) < 1e-2);
    }

    TEST_CASE("uncorrelated solve matches uniform sampling regression")
    {
        std::mt19937_64 rng(7);
        const auto samples = random_samples(3, 6, 4, rng);
        const Vector a = random_vector(4, rng).cwiseAbs().array() + 0.2;
        const Regressor closed = solve_uncorrelated(with_bias(samples), a, 1e-9);
        const PerturbationSet set = draw_uniform_perturbations(MomentSpec::uniform_box(a), 3, 33334, 5);
        for (const auto& per_image : set.deltas) {
            for (const auto& d : per_image) {
                REQUIRE((d.cwiseAbs() - a).maxCoeff() < 1e-12);
            }
        }
        const Regressor sampled = train_sampling_regressor(samples, set, 1e-9);
        CHECK(relative_frobenius(sampled.r, closed.r) < 1e-2);
    }

    TEST_CASE("negated data negates the symmetric-limit solution")
    {
        std::mt19937_64 rng(8);
        auto samples = random_samples(5, 7, 3, rng);
        const Vector a = Vector::Constant(3, 0.7);
        const Regressor r = solve_uncorrelated(samples, a, 1e-6);
        for (auto& s : samples) {
            s.x_star = -s.x_star;
            s.j_star = -s.j_star;
        }
        const Regressor neg = solve_uncorrelated(samples, a, 1e-6);
        CHECK(relative_frobenius(neg.r, -r.r) < 1e-12);
    }

    TEST_CASE("regressor norm is non-increasing in the ridge")
    {
        std::mt19937_64 rng(9);
        const auto samples = random_samples(4, 10, 3, rng);
        const MomentSpec m = random_moments(3, rng);
        double previous = std::numeric_limits<double>::infinity();
        for (const double ridge : {0.0, 1e-6, 1e-3, 1e-1, 1.0, 10.0, 1e3}) {
            const double norm = solve_correlated(samples, m, ridge).r.norm();
            CHECK(norm <= previous * (1.0 + 1e-12));
            previous = norm;
        }
    }

    TEST_CASE("normal equations accumulate, merge and match the direct solve")
    {
        std::mt19937_64 rng(10);
        const auto samples = with_bias(random_samples(6, 5, 3, rng));
        const MomentSpec m = random_moments(3, rng);
        const AugmentedMoments aug = AugmentedMoments::from(m);
        NormalEquations all(6, 3);
        NormalEquations first(6, 3);
        NormalEquations second(6, 3);
        for (std::size_t j = 0; j < samples.size(); ++j) {
            all.add(samples[j], aug);
            (j < 3 ? first : second).add(samples[j], aug);
        }
        first.merge(second);
        CHECK(first.samples() == 6);
        CHECK(relative_frobenius(first.cov_xx(), all.cov_xx()) < 1e-14);
        CHECK(relative_frobenius(all.solve(1e-5).r, solve_correlated(samples, m, 1e-5).r) < 1e-10);

        NormalEquations doubled(6, 3);
        for (const auto& s : samples) {
            doubled.add(s, aug, 2.0);
        }
        CHECK(relative_frobenius(doubled.cov_xx(), 2.0 * all.cov_xx()) < 1e-14);
    }

    TEST_CASE("singular systems and bad input")
    {
        const std::vector<GroundTruthSample> one{{Vector::Zero(3), Matrix::Zero(3, 2)}};
        CHECK_THROWS_AS(solve_correlated(one, MomentSpec::uniform_box(Vector::Ones(2)), 0.0), SingularSystemError);
        std::mt19937_64 rng(11);
        const auto samples = random_samples(3, 4, 2, rng);
        CHECK_THROWS(solve_uncorrelated(samples, -Vector::Ones(2), 0.0));
        CHECK_THROWS_AS(solve_correlated(samples, MomentSpec::zero(3), 0.0), DimensionError);
        CHECK_THROWS(solve_correlated(samples, random_moments(2, rng), -1.0));
    }

    TEST_CASE("default ridge scales with the trace")
    {
        const Matrix c = 4.0 * Matrix::Identity(5, 5);
        CHECK(default_ridge(c) == doctest::Approx(4e-6));
    }
}
