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
#include "ccr/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>
#include <stdexcept>

namespace ccr {

namespace {

constexpr int kDefaultLags[] = {1, 2, 3};

double quantile(std::vector<double> v, double q)
{
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Window covariance, shrunk toward the offline one when the window is short.
// The mean stays at the offline value: over a short window it mostly
// follows the current direction of motion.
MomentSpec window_moments(const std::deque<ShapeParams>& window, const MomentSpec& offline, const GateConfig& gate)
{
    if (window.size() < 2) {
        return offline;
    }
    const std::vector<std::vector<ShapeParams>> seqs{std::vector<ShapeParams>(window.begin(), window.end())};
    const FrameStatistics stats = frame_statistics(seqs);
    const double w = std::min(1.0, static_cast<double>(stats.samples) / std::max(1, gate.min_window));
    MomentSpec out;
    out.mu = offline.mu;
    out.sigma = w * stats.moments.sigma + (1.0 - w) * offline.sigma;
    return out;
}

} // namespace

FrameStatistics frame_statistics(std::span<const std::vector<ShapeParams>> sequences, std::span<const int> lags)
{
    Index dim = -1;
    Vector sum;
    Matrix outer;
    Index count = 0;
    for (const auto& seq : sequences) {
        for (int lag : lags) {
            if (lag < 1) {
                throw std::invalid_argument("frame_statistics: lags must be positive");
            }
            for (std::size_t t = static_cast<std::size_t>(lag); t < seq.size(); ++t) {
                const Vector delta = seq[t - static_cast<std::size_t>(lag)].packed() - seq[t].packed();
                if (dim < 0) {
                    dim = delta.size();
                    sum = Vector::Zero(dim);
                    outer = Matrix::Zero(dim, dim);
                }
                require_dims(delta.size() == dim, "frame_statistics: parameter sizes differ");
                sum += delta;
                outer.noalias() += delta * delta.transpose();
                ++count;
            }
        }
    }
    if (count == 0) {
        throw DegenerateInputError("frame_statistics: no frame pairs");
    }
    FrameStatistics out;
    out.samples = count;
    out.moments.mu = sum / static_cast<double>(count);
    out.moments.sigma = outer / static_cast<double>(count) - out.moments.mu * out.moments.mu.transpose();
    out.moments.sigma = 0.5 * (out.moments.sigma + out.moments.sigma.transpose());
    return out;
}

FrameStatistics frame_statistics(std::span<const std::vector<ShapeParams>> sequences)
{
    return frame_statistics(sequences, kDefaultLags);
}

double fit_quality(const Vector& raw, const CascadeModel& model)
{
    require_dims(!model.levels.empty(), "fit_quality: empty model");
    const PcaBasis& pca = model.levels.back().pca;
    require_dims(raw.size() == pca.mean.size(), "fit_quality: feature size mismatch");
    const double norm = raw.norm();
    if (norm <= 0.0) {
        return 1.0;
    }
    const Vector centred = raw - pca.mean;
    const Vector residual = centred - pca.basis * (pca.basis.transpose() * centred);
    return residual.norm() / norm;
}

double fit_quality(const Image& img, const ShapeParams& p, const CascadeModel& model)
{
    return fit_quality(extract(img, compose_shape(model.pdm, p), model.features), model);
}

GateConfig calibrate_gate(const CascadeModel& model, std::span<const Image> frames,
                          std::span<const ShapeParams> gt_params, std::uint64_t seed, double quantile_level)
{
    require_dims(frames.size() == gt_params.size() && !frames.empty(), "calibrate_gate: need matching frames");
    std::vector<double> truth;
    std::vector<double> noise;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        truth.push_back(fit_quality(frames[i], gt_params[i], model));
        Image random(frames[i].width(), frames[i].height());
        for (double& v : random.pixels()) {
            v = unit(rng);
        }
        noise.push_back(fit_quality(random, gt_params[i], model));
    }
    GateConfig gate;
    gate.update_threshold = quantile(truth, quantile_level);
    const double truth_top = quantile(truth, 1.0);
    const double noise_low = quantile(noise, 0.05);
    gate.loss_threshold = noise_low > truth_top ? 0.5 * (truth_top + noise_low) : noise_low;
    gate.loss_threshold = std::max(gate.loss_threshold, gate.update_threshold);
    return gate;
}

std::vector<ShapeParams> fit_sequence(const PdmModel& pdm, std::span<const Shape> shapes)
{
    std::vector<ShapeParams> out;
    out.reserve(shapes.size());
    for (const Shape& s : shapes) {
        out.push_back(fit_params(pdm, s));
    }
    return out;
}

TrackRecord track(const CascadeModel& model, std::span<const Image> frames, std::span<const Shape> gt_shapes,
                  const TrackOptions& options, std::span<const MomentSpec> offline, const IncrementalState* state)
{
    require_dims(frames.size() == gt_shapes.size(), "track: frames and ground truth differ in length");
    require_dims(offline.size() == model.levels.size(), "track: need one moment set per level");
    const bool incremental = options.mode == TrackMode::iccr;
    if (incremental && (state == nullptr || state->levels.size() != model.levels.size())) {
        throw std::invalid_argument("track: iccr mode needs an incremental state for this model");
    }
    const GateConfig& gate = options.gate;
    IncrementalState inc = incremental ? *state : IncrementalState{};
    CascadeModel current = incremental ? with_regressors(model, inc) : model;
    const FeatureExtractor extractor(model.features);
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal;

    auto detect = [&](std::size_t t) {
        // Mean shape placed in a jittered box around the ground truth.
        const PdmModel rigid_only{model.pdm.mean, Matrix(model.pdm.mean.size(), 0)};
        RigidParams q = fit_params(rigid_only, gt_shapes[t]).rigid;
        const double j = gate.reinit_jitter;
        const double scale = q.scale;
        q.scale *= 1.0 + j * normal(rng);
        q.angle += j * normal(rng);
        q.tx += j * scale * normal(rng);
        q.ty += j * scale * normal(rng);
        return fit_params(model.pdm, transform_shape(model.pdm.mean, q));
    };

    TrackRecord rec;
    std::deque<ShapeParams> window;
    long last_update = -1000000;
    ShapeParams p;
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const Image& img = frames[t];
        if (t == 0) {
            p = options.init_at_gt ? fit_params(model.pdm, gt_shapes[0]) : detect(0);
        }
        p = apply_cascade(current, img, p);
        bool reinit = false;
        const double score = fit_quality(img, p, current);
        if (!(score <= gate.loss_threshold)) {
            p = apply_cascade(current, img, detect(t));
            reinit = true;
            window.clear();
        } else {
            window.push_back(p);
            if (static_cast<int>(window.size()) > gate.window) {
                window.pop_front();
            }
        }

        bool updated = false;
        const long now = static_cast<long>(t);
        if (incremental && !reinit && score < gate.update_threshold && now - last_update >= gate.update_spacing) {
            const GroundTruthSample sample = extractor.param_sample(img, model.pdm, p);
            std::vector<MomentSpec> moments(offline.begin(), offline.end());
            moments[0] = window_moments(window, offline[0], gate);
            UpdateReport report;
            inc = update(inc, model, sample, moments, &report);
            const auto applied = std::count(report.applied.begin(), report.applied.end(), true);
            rec.skipped_updates += report.applied.size() - static_cast<std::size_t>(applied);
            if (applied > 0) {
                updated = true;
                last_update = now;
                current = with_regressors(model, inc);
            }
        }

        const Shape shape = compose_shape(model.pdm, p);
        rec.rmse.push_back(rmse(shape, gt_shapes[t], options.outer_left, options.outer_right));
        rec.shapes.push_back(shape);
        rec.reinit.push_back(reinit);
        rec.updated.push_back(updated);
    }
    return rec;
}

TrainingSet prepare_training(const LoadedSequence& stills, std::span<const LoadedSequence> sequences, Index m_flex,
                             bool point_space)
{
    std::vector<Shape> shapes(stills.gt_shapes.begin(), stills.gt_shapes.end());
    for (const auto& seq : sequences) {
        shapes.insert(shapes.end(), seq.gt_shapes.begin(), seq.gt_shapes.end());
    }
    TrainingSet set;
    set.pdm = build_pdm(shapes, m_flex);
    if (point_space) {
        set.pdm = point_space_model(set.pdm.mean);
    }
    set.images = stills.frames;
    set.params = fit_sequence(set.pdm, stills.gt_shapes);
    std::vector<std::vector<ShapeParams>> fitted;
    for (const auto& seq : sequences) {
        fitted.push_back(fit_sequence(set.pdm, seq.gt_shapes));
    }
    set.statistics = frame_statistics(fitted);
    return set;
}

} // namespace ccr
