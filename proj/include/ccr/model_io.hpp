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
#include "ccr/incremental.hpp"
#include "ccr/tracker.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace ccr {

struct ModelFile {
    CascadeModel model;
    std::optional<IncrementalState> incremental;
    std::optional<GateConfig> gate;
};

/// Container layout: "CCRM", u32 version, u64 length + JSON manifest, then
/// u64-length-prefixed little-endian float64 blobs (s0, B_s, and per level
/// PCA basis, PCA mean, R, mu, Sigma), optionally followed by an "ICCR"
/// section with the incremental state.
std::string serialise_model(const ModelFile& file);
ModelFile deserialise_model(const std::string& bytes);

void save_model(const std::filesystem::path& path, const ModelFile& file);
ModelFile load_model(const std::filesystem::path& path);

} // namespace ccr
