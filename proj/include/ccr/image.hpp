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

#include <cstddef>
#include <filesystem>
#include <vector>

namespace ccr {

/// Grayscale image, row-major, intensities nominally in [0, 1].
class Image {
public:
    Image() = default;
    Image(int width, int height, double fill = 0.0);

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return pixels_.empty(); }

    double& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
    double at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

    /// Pixel lookup with replicated borders.
    double clamped(int x, int y) const;

    /// Bilinear interpolation at a sub-pixel position, replicated borders.
    double sample(double x, double y) const;

    const std::vector<double>& pixels() const { return pixels_; }
    std::vector<double>& pixels() { return pixels_; }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> pixels_;
};

/// Binary PGM (P5). Intensities are scaled by maxval on read; writes use
/// 8-bit depth with round-to-nearest after clamping to [0, 1].
Image read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Image& img);

} // namespace ccr
