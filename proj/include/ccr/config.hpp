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

#include "ccr/cascade.hpp"
#include "ccr/features.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ccr {

/// Run configuration read from a plain key=value file ('#' starts a comment).
struct RunConfig {
    std::filesystem::path data_dir = "data";
    std::filesystem::path model_file = "model.ccrm";
    std::filesystem::path out_dir = "out";
    std::uint64_t seed = 1;

    int image_size = 128;
    int train_stills = 300;
    int train_sequences = 10;
    int train_frames = 100;
    int test_sequences = 10;
    int test_frames = 300;
    int validation_frames = 100;
    std::vector<std::string> tiers = {"static", "easy", "medium", "hard", "drift"};

    Index levels = 4;
    Index initial_draws = 10;
    Index pca_dim = 64;
    Index m_flex = 6;
    std::optional<double> ridge;
    FeatureConfig features;
    Propagation propagation = Propagation::extracted;
    bool train_sdm = false;

    std::string mode = "ccr";
    std::vector<double> lambdas;
    std::optional<double> update_threshold;
    std::optional<double> loss_threshold;

    /// Throws std::invalid_argument for unknown keys or malformed values.
    void set(const std::string& key, const std::string& value);
    void load(const std::filesystem::path& file);
    /// Canonical key=value text; load(dump()) reproduces the config.
    std::string dump() const;
    CascadeConfig cascade() const;
    std::vector<double> forgetting() const;
};

std::vector<double> parse_doubles(const std::string& text);

} // namespace ccr
