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

#include <stdexcept>

namespace ccr {

namespace {

void check_training_set(std::size_t images, std::size_t params)
{
    if (images == 0) {
        throw DegenerateInputError("cascade training: empty training set");
    }
    require_dims(images == params, "cascade training: one ground-truth parameter set per image required");
}

std::vector<Vector> flatten(const PerturbationSet& set)
{
    std::vector<Vector> out;
    for (const auto& per_image : set.deltas) {
        out.insert(out.end(), per_image.begin(), per_image.end());
    }
    return out;
}

} // namespace

Vector CascadeLevel::features(const Vector& raw) const
{
    Vector out(pca.dim() + 1);
    out << pca.project(raw), 1.0;
    return out;
}

GroundTruthSample CascadeLevel::project(const GroundTruthSample& raw) const
{
    GroundTruthSample reduced{pca.project(raw.x_star), pca.basis.transpose() * raw.j_star};
    return with_bias(reduced);
}

LevelStats level_stats(std::vector<Vector> residuals)
{
    if (residuals.empty()) {
        throw DegenerateInputError("level_stats: no residuals");
    }
    const Index dim = residuals.front().size();
    LevelStats out;
    Vector mean = Vector::Zero(dim);
    for (const auto& r : residuals) {
        mean += r;
        out.mean_norm += r.norm();
    }
    const double count = static_cast<double>(residuals.size());
    mean /= count;
    out.mean_norm /= count;
    Matrix cov = Matrix::Zero(dim, dim);
    for (const auto& r : residuals) {
        const Vector c = r - mean;
        cov.noalias() += c * c.transpose();
    }
    cov /= count;
    out.moments = {mean, 0.5 * (cov + cov.transpose())};
    out.residuals = std::move(residuals);
    return out;
}

MomentSpec diagonalised(const MomentSpec& moments)
{
    return {Vector::Zero(moments.dim()), Matrix(moments.sigma.diagonal().asDiagonal())};
}

TrainingCache precompute_cache(std::span<const Image> images, std::span<const ShapeParams> gt_params,
                               const PdmModel& pdm, const FeatureExtractor& extractor)
{
    check_training_set(images.size(), gt_params.size());
    TrainingCache cache;
    cache.features = extractor.config();
    cache.pdm = pdm;
    cache.gt_params.assign(gt_params.begin(), gt_params.end());
    cache.samples.reserve(images.size());
    for (std::size_t j = 0; j < images.size(); ++j) {
        cache.samples.push_back(extractor.param_sample(images[j], pdm, gt_params[j]));
    }
    return cache;
}

CascadeLevel train_level(const TrainingCache& cache, const MomentSpec& moments, const CascadeConfig& cfg,
                         LevelSystem* system)
{
    CascadeLevel level;
    level.moments = moments;
    level.pca = functional_pca(cache.samples, moments, cfg.pca_dim);

    std::vector<GroundTruthSample> projected;
    projected.reserve(cache.samples.size());
    for (const auto& s : cache.samples) {
        projected.push_back(level.project(s));
    }
    NormalEquations normal(level.pca.dim() + 1, moments.dim());
    const AugmentedMoments aug = AugmentedMoments::from(moments);
    for (const auto& s : projected) {
        normal.add(s, aug);
    }
    const double ridge = cfg.ridge ? *cfg.ridge : default_ridge(normal.cov_xx());
    level.regressor = solve_correlated(projected, moments, ridge);
    if (system) {
        *system = {normal.cov_xx(), normal.cov_xy(), ridge};
    }
    return level;
}

TrainedCascade train_ccr(std::span<const Image> images, std::span<const ShapeParams> gt_params, const PdmModel& pdm,
                         const MomentSpec& init_moments, const CascadeConfig& cfg, const FeatureExtractor& extractor)
{
    const std::uint64_t before = extractor.calls();
    TrainingCache cache = precompute_cache(images, gt_params, pdm, extractor);
    const std::uint64_t sampled = extractor.calls() - before;
    TrainedCascade out = train_ccr(cache, images, init_moments, cfg, extractor);
    out.extractions = sampled;
    return out;
}

TrainedCascade train_ccr(const TrainingCache& cache, std::span<const Image> images, const MomentSpec& init_moments,
                         const CascadeConfig& cfg, const FeatureExtractor& extractor)
{
    if (cfg.levels < 1) {
        throw std::invalid_argument("train_ccr: at least one level required");
    }
    check_training_set(cache.samples.size(), cache.gt_params.size());
    require_dims(init_moments.dim() == cache.pdm.param_count(), "train_ccr: moments must live in parameter space");
    if (cfg.propagation == Propagation::extracted) {
        require_dims(images.size() == cache.samples.size(), "train_ccr: images required for extracted propagation");
    }
    const std::uint64_t before = extractor.calls();

    const PerturbationSet initial = draw_perturbations(init_moments, cache.samples.size(),
                                                       static_cast<std::size_t>(cfg.initial_draws), cfg.seed);
    std::vector<std::vector<Vector>> deltas = initial.deltas;

    TrainedCascade out;
    out.cache = cache;
    out.model.pdm = cache.pdm;
    out.model.features = cache.features;
    out.stats.push_back(level_stats(flatten(initial)));

    MomentSpec moments = init_moments;
    for (Index l = 0; l < cfg.levels; ++l) {
        const MomentSpec used = cfg.uncorrelated ? diagonalised(moments) : moments;
        LevelSystem system;
        CascadeLevel level = train_level(cache, used, cfg, &system);

        std::vector<Vector> residuals;
        for (std::size_t j = 0; j < deltas.size(); ++j) {
            const GroundTruthSample& gt = cache.samples[j];
            for (auto& delta : deltas[j]) {
                Vector raw;
                if (cfg.propagation == Propagation::taylor) {
                    raw = taylor_predict(gt.x_star, gt.j_star, delta);
                } else {
                    const ShapeParams p = ShapeParams::unpack(cache.gt_params[j].packed() + delta);
                    raw = extractor.extract(images[j], compose_shape(cache.pdm, p));
                }
                delta -= level.regressor.predict(level.features(raw));
                residuals.push_back(delta);
            }
        }
        out.model.levels.push_back(std::move(level));
        out.systems.push_back(std::move(system));
        out.stats.push_back(level_stats(std::move(residuals)));
        moments = out.stats.back().moments;
    }
    out.propagation_extractions = extractor.calls() - before;
    return out;
}

TrainedCascade retrain_from_cache(const TrainingCache& cache, std::span<const MomentSpec> level_moments,
                                  const CascadeConfig& cfg)
{
    if (level_moments.empty()) {
        throw std::invalid_argument("retrain_from_cache: no level moments");
    }
    check_training_set(cache.samples.size(), cache.gt_params.size());
    TrainedCascade out;
    out.cache = cache;
    out.model.pdm = cache.pdm;
    out.model.features = cache.features;
    for (const auto& moments : level_moments) {
        require_dims(moments.dim() == cache.pdm.param_count(), "retrain_from_cache: moments/cache dimension mismatch");
        LevelSystem system;
        out.model.levels.push_back(train_level(cache, moments, cfg, &system));
        out.systems.push_back(std::move(system));
    }
    return out;
}

ShapeParams apply_level(const CascadeModel& model, std::size_t level, const Image& img, const ShapeParams& p)
{
    const CascadeLevel& lvl = model.levels.at(level);
    const Vector raw = extract(img, compose_shape(model.pdm, p), model.features);
    return ShapeParams::unpack(p.packed() - lvl.regressor.predict(lvl.features(raw)));
}

std::vector<ShapeParams> apply_cascade_trace(const CascadeModel& model, const Image& img, const ShapeParams& init)
{
    std::vector<ShapeParams> trace{init};
    for (std::size_t l = 0; l < model.levels.size(); ++l) {
        trace.push_back(apply_level(model, l, img, trace.back()));
    }
    return trace;
}

ShapeParams apply_cascade(const CascadeModel& model, const Image& img, const ShapeParams& init)
{
    ShapeParams p = init;
    for (std::size_t l = 0; l < model.levels.size(); ++l) {
        p = apply_level(model, l, img, p);
    }
    return p;
}

SamplingCost sampling_cost_report(std::uint64_t levels, std::uint64_t k, std::uint64_t images)
{
    if (levels == 0 || k == 0 || images == 0) {
        throw std::invalid_argument("sampling_cost_report: counts must be positive");
    }
    SamplingCost cost;
    cost.sdm_extractions = levels * k * images;
    cost.ccr_extractions = 5 * images;
    cost.ratio = static_cast<double>(levels * k) / 5.0;
    return cost;
}

TrainedSdm train_sdm(std::span<const Image> images, std::span<const ShapeParams> gt_params, const PdmModel& pdm,
                     const MomentSpec& init_moments, Index k, const CascadeConfig& cfg,
                     const FeatureExtractor& extractor)
{
    check_training_set(images.size(), gt_params.size());
    if (cfg.levels < 1 || k < 1) {
        throw std::invalid_argument("train_sdm: levels and K must be positive");
    }
    const std::uint64_t before = extractor.calls();
    PerturbationSet perturbations =
        draw_perturbations(init_moments, images.size(), static_cast<std::size_t>(k), cfg.seed);

    TrainedSdm out;
    out.model.pdm = pdm;
    out.model.features = extractor.config();
    out.stats.push_back(level_stats(flatten(perturbations)));
    MomentSpec moments = init_moments;

    for (Index l = 0; l < cfg.levels; ++l) {
        std::vector<std::vector<Vector>> feats(images.size());
        Index d = 0;
        for (std::size_t j = 0; j < images.size(); ++j) {
            for (const auto& delta : perturbations.deltas[j]) {
                const ShapeParams p = ShapeParams::unpack(gt_params[j].packed() + delta);
                feats[j].push_back(extractor.extract(images[j], compose_shape(pdm, p)));
                d = feats[j].back().size();
            }
        }

        // PCA directly on the sampled features.
        CascadeLevel level;
        level.moments = moments;
        Vector mean = Vector::Zero(d);
        double count = 0.0;
        for (const auto& per_image : feats) {
            for (const auto& x : per_image) {
                mean += x;
                count += 1.0;
            }
        }
        mean /= count;
        Matrix cov = Matrix::Zero(d, d);
        for (const auto& per_image : feats) {
            for (const auto& x : per_image) {
                const Vector c = x - mean;
                cov.selfadjointView<Eigen::Lower>().rankUpdate(c);
            }
        }
        cov = Matrix(cov.selfadjointView<Eigen::Lower>()) / count;
        const Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
        const Index d_r = std::min(cfg.pca_dim, d);
        level.pca.mean = mean;
        level.pca.basis = eig.eigenvectors().rightCols(d_r).rowwise().reverse();
        level.pca.eigenvalues = eig.eigenvalues().tail(d_r).reverse();

        level.regressor = train_sampling_regressor(
            perturbations, [&](std::size_t j, std::size_t i) { return level.pca.project(feats[j][i]); }, cfg.ridge);

        std::vector<Vector> residuals;
        for (std::size_t j = 0; j < images.size(); ++j) {
            for (std::size_t i = 0; i < perturbations.deltas[j].size(); ++i) {
                auto& delta = perturbations.deltas[j][i];
                delta -= level.regressor.predict(level.features(feats[j][i]));
                residuals.push_back(delta);
            }
        }
        out.model.levels.push_back(std::move(level));
        out.stats.push_back(level_stats(std::move(residuals)));
        moments = out.stats.back().moments;
    }
    out.extractions = extractor.calls() - before;
    return out;
}

} // namespace ccr
