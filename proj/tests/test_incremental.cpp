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
#include "ccr/incremental.hpp"
#include "ccr/model_io.hpp"
#include "fixture.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace ccr;
using namespace ccr::test;

namespace {

struct Frame {
    GroundTruthSample raw;
    std::vector<MomentSpec> moments;
    double weight_scale = 1.0; ///< multiplies 1 / lambda for this frame
};

std::vector<GroundTruthSample> new_frames(const Trained& t, int count, std::uint64_t seed)
{
    GeneratorConfig gen = tier_config("drift", 1);
    gen.width = gen.height = t.cfg.image_size;
    const SyntheticSequence held = generate_stills(gen, count, seed);
    const FeatureExtractor ex(t.cfg.features);
    const PdmModel& pdm = t.sys.trained.model.pdm;
    std::vector<GroundTruthSample> out;
    for (int i = 0; i < count; ++i) {
        out.push_back(ex.param_sample(held.frames[static_cast<std::size_t>(i)], pdm,
                                      fit_params(pdm, held.gt_shapes[static_cast<std::size_t>(i)])));
    }
    return out;
}

std::vector<MomentSpec> shrunk_moments(const CascadeModel& model, double factor)
{
    std::vector<MomentSpec> out = level_moments(model);
    for (auto& m : out) {
        m.sigma *= factor;
        m.mu *= factor;
    }
    return out;
}

// Weighted least squares over the training set plus every frame, assembled
// from scratch and solved directly.
struct BatchLevel {
    Matrix r;
    Matrix v_inv;
};

BatchLevel batch_retrain(const Trained& t, std::size_t l, std::span<const Frame> frames, double lambda)
{
    const TrainedCascade& tc = t.sys.trained;
    const CascadeLevel& level = tc.model.levels[l];
    NormalEquations normal(level.pca.dim() + 1, tc.model.param_dim());
    const AugmentedMoments trained_aug = AugmentedMoments::from(level.moments);
    for (const auto& s : tc.cache.samples) {
        normal.add(level.project(s), trained_aug);
    }
    for (const auto& f : frames) {
        normal.add(level.project(f.raw), AugmentedMoments::from(f.moments[l]), f.weight_scale / lambda);
    }
    Matrix v = normal.cov_xx();
    v.diagonal().array() += tc.systems[l].ridge;
    return {normal.solve(tc.systems[l].ridge).r, v.inverse()};
}

IncrementalState fresh_state(const Trained& t, std::vector<double> lambdas)
{
    return init_incremental(t.sys.trained.model, t.sys.trained.systems, lambdas);
}

} // namespace

TEST_SUITE("incremental")
{
    TEST_CASE("default forgetting schedule")
    {
        CHECK(default_forgetting_schedule(4) == std::vector<double>{0.01, 0.025, 0.05, 0.1});
        CHECK(desk_forgetting_schedule(4) == std::vector<double>{0.02, 0.05, 0.1, 0.2});
    }

    TEST_CASE("initial state reproduces the trained cascade")
    {
        const Trained& t = trained();
        const IncrementalState s = fresh_state(t, default_forgetting_schedule(4));
        REQUIRE(s.levels.size() == 4);
        for (std::size_t l = 0; l < 4; ++l) {
            const auto& level = s.levels[l];
            const Index d = level.v.rows();
            CHECK((level.v * level.v_inv - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-8);
            CHECK((level.v_inv - level.v_inv.transpose()).cwiseAbs().maxCoeff() < 1e-8);
            CHECK(relative_frobenius(level.r, t.sys.trained.model.levels[l].regressor.r) < 1e-10);
        }
        CHECK(s.updates == 0);

        ModelFile file;
        file.model = t.sys.trained.model;
        file.incremental = s;
        const ModelFile back = deserialise_model(serialise_model(file));
        REQUIRE(back.incremental);
        for (std::size_t l = 0; l < 4; ++l) {
            CHECK(back.incremental->levels[l].v_inv == s.levels[l].v_inv);
            CHECK(back.incremental->levels[l].r == s.levels[l].r);
            CHECK(back.incremental->levels[l].lambda == s.levels[l].lambda);
        }
    }

    TEST_CASE("initialisation errors")
    {
        const Trained& t = trained();
        const auto& model = t.sys.trained.model;
        CHECK_THROWS_AS(init_incremental(model, {}, default_forgetting_schedule(4)), std::invalid_argument);
        CHECK_THROWS_AS(init_incremental(model, t.sys.trained.systems, default_forgetting_schedule(3)),
                        std::invalid_argument);
        CHECK_THROWS_AS(init_incremental(model, t.sys.trained.systems, std::vector<double>{0.1, 0.1, 0.0, 0.1}),
                        std::invalid_argument);
    }

    TEST_CASE("an almost weightless frame changes nothing")
    {
        const Trained& t = trained();
        const IncrementalState s = fresh_state(t, std::vector<double>(4, 1e15));
        const auto frames = new_frames(t, 1, 11);
        const IncrementalState next = update(s, t.sys.trained.model, frames[0], level_moments(t.sys.trained.model));
        for (std::size_t l = 0; l < 4; ++l) {
            CHECK(relative_frobenius(next.levels[l].r, s.levels[l].r) < 1e-12);
            CHECK(relative_frobenius(next.levels[l].v_inv, s.levels[l].v_inv) < 1e-12);
        }
    }

    TEST_CASE("a single update equals batch retraining on the weighted union")
    {
        const Trained& t = trained();
        const auto lambdas = default_forgetting_schedule(4);
        const IncrementalState s = fresh_state(t, lambdas);
        const auto raw = new_frames(t, 1, 12);
        const auto moments = shrunk_moments(t.sys.trained.model, 0.5);
        UpdateReport report;
        const IncrementalState next = update(s, t.sys.trained.model, raw[0], moments, &report);
        CHECK(next.updates == 1);
        CHECK(report.applied == std::vector<bool>(4, true));
        CHECK(report.max_asymmetry < 1e-8);
        const std::vector<Frame> frames{{raw[0], moments}};
        for (std::size_t l = 0; l < 4; ++l) {
            const BatchLevel b = batch_retrain(t, l, frames, lambdas[l]);
            CHECK(relative_frobenius(next.levels[l].r, b.r) < 1e-8);
        }
    }

    TEST_CASE("twenty updates stay exact")
    {
        const Trained& t = trained();
        const auto lambdas = default_forgetting_schedule(4);
        IncrementalState s = fresh_state(t, lambdas);
        const auto raw = new_frames(t, 20, 13);
        std::vector<Frame> frames;
        for (int i = 0; i < 20; ++i) {
            const auto moments = shrunk_moments(t.sys.trained.model, 0.3 + 0.05 * i);
            UpdateReport report;
            s = update(s, t.sys.trained.model, raw[static_cast<std::size_t>(i)], moments, &report);
            CHECK(report.max_asymmetry < 1e-8);
            frames.push_back({raw[static_cast<std::size_t>(i)], moments});
        }
        CHECK(s.updates == 20);
        for (std::size_t l = 0; l < 4; ++l) {
            const BatchLevel b = batch_retrain(t, l, frames, lambdas[l]);
            CHECK(relative_frobenius(s.levels[l].r, b.r) < 1e-7);
            CHECK(relative_frobenius(s.levels[l].v_inv, b.v_inv) < 1e-7);
            CHECK(relative_frobenius(s.levels[l].v_inv, s.levels[l].v.inverse()) < 1e-7);
        }

        IncrementalState refreshed = s;
        refresh_inverses(refreshed);
        for (std::size_t l = 0; l < 4; ++l) {
            CHECK(relative_frobenius(refreshed.levels[l].r, s.levels[l].r) < 1e-7);
        }
    }

    TEST_CASE("update order does not matter")
    {
        const Trained& t = trained();
        const IncrementalState s = fresh_state(t, std::vector<double>(4, 0.05));
        const auto raw = new_frames(t, 2, 14);
        const auto moments = level_moments(t.sys.trained.model);
        const auto& model = t.sys.trained.model;
        const IncrementalState ab = update(update(s, model, raw[0], moments), model, raw[1], moments);
        const IncrementalState ba = update(update(s, model, raw[1], moments), model, raw[0], moments);
        for (std::size_t l = 0; l < 4; ++l) {
            CHECK(relative_frobenius(ab.levels[l].r, ba.levels[l].r) < 1e-8);
        }
    }

    TEST_CASE("smaller forgetting factors move the regressor further")
    {
        const Trained& t = trained();
        const auto raw = new_frames(t, 1, 15);
        const auto moments = level_moments(t.sys.trained.model);
        std::vector<double> previous(4, 0.0);
        for (const double lambda : {1.0, 0.1, 0.01, 0.001}) {
            const IncrementalState s = fresh_state(t, std::vector<double>(4, lambda));
            const IncrementalState next = update(s, t.sys.trained.model, raw[0], moments);
            for (std::size_t l = 0; l < 4; ++l) {
                const double moved = (next.levels[l].r - s.levels[l].r).norm();
                CHECK(moved > previous[l]);
                previous[l] = moved;
            }
        }
    }

    TEST_CASE("swapped regressors")
    {
        const Trained& t = trained();
        IncrementalState s = fresh_state(t, default_forgetting_schedule(4));
        s.levels[2].r.setZero();
        const CascadeModel m = with_regressors(t.sys.trained.model, s);
        CHECK(m.levels[2].regressor.r.isZero());
        CHECK(m.levels[1].regressor.r == s.levels[1].r);
        s.levels.pop_back();
        CHECK_THROWS_AS(with_regressors(t.sys.trained.model, s), DimensionError);
    }

    TEST_CASE("update cost profile")
    {
        const UpdateCost one = update_cost_profile(1, 1);
        CHECK(one.predicted_iccr == 7);
        CHECK(one.predicted_isdm == 1);

        const UpdateCost c = update_cost_profile(256, 10);
        CHECK(c.predicted_iccr == 3 * 10 * 256 * 256 + 3 * 100 * 256 + 1000);
        CHECK(c.measured_ratio > c.predicted_ratio / 2.0);
        CHECK(c.measured_ratio < c.predicted_ratio * 2.0);

        // Doubling d: quadratic growth for iCCR, cubic for iSDM.
        const UpdateCost big = update_cost_profile(512, 10);
        const double iccr_growth = static_cast<double>(big.measured_iccr) / static_cast<double>(c.measured_iccr);
        const double isdm_growth = static_cast<double>(big.measured_isdm) / static_cast<double>(c.measured_isdm);
        CHECK(iccr_growth == doctest::Approx(4.0).epsilon(0.1));
        CHECK(isdm_growth == doctest::Approx(8.0).epsilon(0.1));

        const UpdateCost full = update_cost_profile(133, 24);
        CHECK(full.measured_iccr > 0);
        CHECK_THROWS(update_cost_profile(0, 3));
    }
}
