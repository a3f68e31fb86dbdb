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
#include "ccr/cascade.hpp"
#include "ccr/oracle.hpp"
#include "fixture.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>

using namespace ccr;
using namespace ccr::test;

namespace {

std::vector<double> sorted(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    return v;
}

double median_of(std::vector<double> v)
{
    v = sorted(std::move(v));
    return v[v.size() / 2];
}

} // namespace

TEST_SUITE("cascade")
{
    TEST_CASE("zero moments give a fixed point at the ground truth")
    {
        const Trained& t = trained();
        const TrainingCache& cache = t.sys.trained.cache;
        CascadeConfig cfg = t.cfg.cascade;
        cfg.levels = 1;
        const FeatureExtractor ex(t.cfg.features);
        const MomentSpec zero = MomentSpec::zero(cache.pdm.param_count());
        const TrainedCascade tc = train_ccr(cache, t.sys.set.images, zero, cfg, ex);
        REQUIRE(tc.model.levels.size() == 1);
        const CascadeLevel& level = tc.model.levels.front();
        std::vector<GroundTruthSample> projected;
        for (const auto& s : cache.samples) {
            projected.push_back(level.project(s));
        }
        const Regressor direct = solve_correlated(projected, zero, tc.systems.front().ridge);
        CHECK((level.regressor.r - direct.r).norm() == 0.0);
        CHECK(level.regressor.r.norm() == 0.0);
        for (std::size_t j = 0; j < 5; ++j) {
            const ShapeParams out = apply_cascade(tc.model, t.sys.set.images[j], cache.gt_params[j]);
            CHECK((out.packed() - cache.gt_params[j].packed()).norm() < 1e-12);
        }
    }

    TEST_CASE("training samples each image five times for any depth")
    {
        const Trained& t = trained();
        const std::size_t m = 40;
        const std::vector<Image> images(t.sys.set.images.begin(), t.sys.set.images.begin() + m);
        const std::vector<ShapeParams> params(t.sys.set.params.begin(), t.sys.set.params.begin() + m);
        for (const Index levels : {1, 2, 3}) {
            for (const Propagation prop : {Propagation::taylor, Propagation::extracted}) {
                CascadeConfig cfg = t.cfg.cascade;
                cfg.levels = levels;
                cfg.pca_dim = 16;
                cfg.initial_draws = 3;
                cfg.propagation = prop;
                const FeatureExtractor ex(t.cfg.features);
                const TrainedCascade tc =
                    train_ccr(images, params, t.sys.set.pdm, t.sys.set.statistics.moments, cfg, ex);
                CHECK(tc.extractions == 5 * m);
                const std::uint64_t propagation = prop == Propagation::taylor ? 0 : levels * 3 * m;
                CHECK(tc.propagation_extractions == propagation);
                CHECK(ex.calls() == tc.extractions + tc.propagation_extractions);
            }
        }
    }

    TEST_CASE("residuals shrink level by level on the training set")
    {
        const TrainedCascade& tc = trained().sys.trained;
        REQUIRE(tc.stats.size() == 5);
        CHECK(tc.model.levels.size() == 4);
        for (std::size_t l = 0; l + 1 < tc.stats.size(); ++l) {
            CHECK(tc.stats[l + 1].mean_norm <= tc.stats[l].mean_norm);
            CHECK(tc.stats[l + 1].moments.sigma.trace() <= tc.stats[l].moments.sigma.trace());
        }
        // Level 0 uses the frame statistics, later levels the measured residuals.
        CHECK(tc.model.levels[0].moments.sigma == trained().sys.set.statistics.moments.sigma);
        for (std::size_t l = 1; l < tc.model.levels.size(); ++l) {
            CHECK(tc.model.levels[l].moments.sigma == tc.stats[l].moments.sigma);
            CHECK(tc.model.levels[l].moments.mu == tc.stats[l].moments.mu);
        }
    }

    TEST_CASE("the cascade corrects perturbed held-out stills")
    {
        const Trained& t = trained();
        GeneratorConfig gen = tier_config("medium", 1);
        gen.width = gen.height = t.cfg.image_size;
        const SyntheticSequence held = generate_stills(gen, 60, 777);
        const PerturbationSet draws = draw_perturbations(t.sys.set.statistics.moments, 60, 1, 778);
        const CascadeModel& model = t.sys.trained.model;
        std::vector<double> before;
        std::vector<double> after;
        for (std::size_t j = 0; j < 60; ++j) {
            const ShapeParams gt = fit_params(model.pdm, held.gt_shapes[j]);
            const ShapeParams init = ShapeParams::unpack(gt.packed() + draws.deltas[j][0]);
            const ShapeParams out = apply_cascade(model, held.frames[j], init);
            CHECK(apply_cascade(model, held.frames[j], init).packed() == out.packed());
            before.push_back(rmse(compose_shape(model.pdm, init), held.gt_shapes[j], 0, 3));
            after.push_back(rmse(compose_shape(model.pdm, out), held.gt_shapes[j], 0, 3));
        }
        CHECK(median_of(after) < 0.5 * median_of(before));
    }

    TEST_CASE("trace agrees with the full cascade")
    {
        const Trained& t = trained();
        const CascadeModel& model = t.sys.trained.model;
        const ShapeParams& p = t.sys.set.params[3];
        const auto trace = apply_cascade_trace(model, t.sys.set.images[3], p);
        CHECK(trace.size() == model.levels.size() + 1);
        CHECK(trace.front().packed() == p.packed());
        CHECK(trace.back().packed() == apply_cascade(model, t.sys.set.images[3], p).packed());
    }

    TEST_CASE("retraining from the cache")
    {
        const Trained& t = trained();
        const TrainedCascade& tc = t.sys.trained;
        const FeatureExtractor ex(t.cfg.features);
        const auto moments = level_moments(tc.model);
        const TrainedCascade same = retrain_from_cache(tc.cache, moments, t.cfg.cascade);
        CHECK(ex.calls() == 0);
        REQUIRE(same.model.levels.size() == tc.model.levels.size());
        for (std::size_t l = 0; l < tc.model.levels.size(); ++l) {
            CHECK(same.model.levels[l].regressor.r == tc.model.levels[l].regressor.r);
            CHECK(same.model.levels[l].pca.basis == tc.model.levels[l].pca.basis);
            CHECK(same.systems[l].cov_xx == tc.systems[l].cov_xx);
        }

        std::vector<MomentSpec> doubled = moments;
        for (auto& m : doubled) {
            m.sigma *= 2.0;
        }
        const TrainedCascade scaled = retrain_from_cache(tc.cache, doubled, t.cfg.cascade);
        for (std::size_t l = 0; l < doubled.size(); ++l) {
            const CascadeLevel scratch = train_level(tc.cache, doubled[l], t.cfg.cascade);
            CHECK(relative_frobenius(scaled.model.levels[l].regressor.r, scratch.regressor.r) < 1e-12);
            CHECK(relative_frobenius(scaled.model.levels[l].regressor.r, tc.model.levels[l].regressor.r) > 1e-3);
        }
        CHECK_THROWS(retrain_from_cache(tc.cache, {}, t.cfg.cascade));
        CHECK_THROWS_AS(retrain_from_cache(tc.cache, std::vector<MomentSpec>{MomentSpec::zero(3)}, t.cfg.cascade),
                        DimensionError);
    }

    TEST_CASE("sampling cost arithmetic and measured counters")
    {
        const SamplingCost a = sampling_cost_report(4, 10, 300);
        CHECK(a.sdm_extractions == 12000);
        CHECK(a.ccr_extractions == 1500);
        CHECK(a.ratio == 8.0);
        CHECK(sampling_cost_report(5, 5, 7).ratio == 5.0);
        CHECK_THROWS(sampling_cost_report(0, 10, 1));

        const Trained& t = trained();
        const std::size_t m = 20;
        const std::vector<Image> images(t.sys.set.images.begin(), t.sys.set.images.begin() + m);
        const std::vector<ShapeParams> params(t.sys.set.params.begin(), t.sys.set.params.begin() + m);
        CascadeConfig cfg = t.cfg.cascade;
        cfg.pca_dim = 12;
        cfg.levels = 2;
        const FeatureExtractor ex(t.cfg.features);
        const TrainedSdm sdm = train_sdm(images, params, t.sys.set.pdm, t.sys.set.statistics.moments, 3, cfg, ex);
        CHECK(sdm.extractions == 2 * 3 * m);
        CHECK(sdm.model.levels.size() == 2);
        CHECK(sdm.stats.size() == 3);
    }

    TEST_CASE("diagonalised moments")
    {
        std::mt19937_64 rng(1);
        const MomentSpec m = random_moments(4, rng);
        const MomentSpec d = diagonalised(m);
        CHECK(d.mu.isZero());
        CHECK(d.sigma.diagonal() == m.sigma.diagonal());
        CHECK((d.sigma - Matrix(d.sigma.diagonal().asDiagonal())).norm() == 0.0);
    }

    TEST_CASE("invalid training requests")
    {
        const Trained& t = trained();
        CascadeConfig cfg = t.cfg.cascade;
        cfg.levels = 0;
        const FeatureExtractor ex;
        CHECK_THROWS(train_ccr(t.sys.trained.cache, t.sys.set.images, t.sys.set.statistics.moments, cfg, ex));
        cfg.levels = 1;
        CHECK_THROWS(train_ccr(std::span<const Image>{}, std::span<const ShapeParams>{}, t.sys.set.pdm,
                               t.sys.set.statistics.moments, cfg, ex));
    }
}
