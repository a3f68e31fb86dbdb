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
#pragma once

#include "ccr/image.hpp"
#include "ccr/shapes.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ccr {

/// Fixed synthetic landmark constellation: eye corners, nose, mouth and chin.
struct FaceModel {
    PdmModel pdm;                  ///< generator shape model (canonical mean, RMS radius 1)
    Vector mode_sigma;             ///< prior std of each flexible mode
    std::vector<double> polarity;  ///< +1 bright / -1 dark blob per landmark
    std::vector<double> base_angle;///< blob orientation per landmark, radians
    Index outer_left = 0;          ///< landmarks used as the RMSE normaliser
    Index outer_right = 3;

    static const FaceModel& standard();
    Index points() const { return pdm.points(); }
};

/// Per-sequence appearance of the synthetic face.
struct Appearance {
    std::vector<double> amplitude; ///< signed blob amplitude per landmark
    std::vector<double> width;     ///< blob std along its axis (pixels at scale 30)
    std::vector<double> aspect;    ///< across/along ratio
    std::vector<double> angle;     ///< blob orientation offset
    double base = 0.5;
    double gain = 1.0;
};

struct GeneratorConfig {
    int width = 128;
    int height = 128;
    int frames = 200;
    double face_scale = 25.0;      ///< RMS landmark radius in pixels
    double mean_reversion = 0.04;  ///< pull of the walk towards the frame centre
    /// Walk step std for (scale, angle, tx, ty, c_1..c_6).
    Vector step_sigma = default_step_sigma();
    double step_correlation = 0.7; ///< strength of the shared factors in the step covariance
    double texture_contrast = 1.0; ///< multiplies blob amplitudes
    double background_contrast = 0.12;
    double illumination_drift = 0.0; ///< fractional gain loss and shading reached at the last frame
    double appearance_shift = 0.0;   ///< widens blobs and perturbs orientations away from the training look
    double noise_sigma = 0.01;

    static Vector default_step_sigma();
    /// Step covariance of the walk (full, correlated).
    Matrix step_covariance() const;
};

struct SyntheticSequence {
    std::vector<Image> frames;
    std::vector<Shape> gt_shapes;
    std::vector<ShapeParams> gt_params; ///< in the generator's FaceModel parameterisation
    GeneratorConfig config;
    std::uint64_t seed = 0;
    bool truncated = false;
};

/// Named difficulty tiers: "static", "easy", "medium", "hard", "drift".
GeneratorConfig tier_config(const std::string& tier, int frames);

SyntheticSequence generate_sequence(const GeneratorConfig& cfg, std::uint64_t seed);

/// Independent still images with shapes drawn from the walk's stationary
/// distribution and appearance drawn from the training look.
SyntheticSequence generate_stills(const GeneratorConfig& cfg, int count, std::uint64_t seed);

/// Renders the face at `shape` with the given appearance over a background.
Image render_face(const Image& background, const Shape& shape, double scale, double angle,
                  const Appearance& appearance, double shading, double noise_sigma, std::uint64_t noise_seed);

/// Smooth background: sum of seeded Gaussian bumps.
Image render_background(int width, int height, double contrast, std::uint64_t seed);

Appearance draw_appearance(double shift, double contrast, std::uint64_t seed);

/// Directory of frame_XXXXX.pgm files plus ground_truth.txt
/// (frame index then 2n coordinates, 17 significant digits).
void write_sequence(const std::filesystem::path& dir, const SyntheticSequence& seq);

struct LoadedSequence {
    std::vector<Image> frames;
    std::vector<Shape> gt_shapes;
};

LoadedSequence as_loaded(const SyntheticSequence& seq);
LoadedSequence read_sequence(const std::filesystem::path& dir);
std::vector<Shape> read_ground_truth(const std::filesystem::path& file);
void write_ground_truth(const std::filesystem::path& file, const std::vector<Shape>& shapes);

} // namespace ccr
