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
#include "ccr/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

namespace ccr {

Image::Image(int width, int height, double fill)
    : width_(width), height_(height), pixels_(static_cast<std::size_t>(width) * height, fill)
{
    if (width <= 0 || height <= 0) {
        throw std::invalid_argument("Image: dimensions must be positive");
    }
}

double Image::clamped(int x, int y) const
{
    x = std::clamp(x, 0, width_ - 1);
    y = std::clamp(y, 0, height_ - 1);
    return at(x, y);
}

double Image::sample(double x, double y) const
{
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const double ax = x - fx;
    const double ay = y - fy;
    const int x0 = static_cast<int>(fx);
    const int y0 = static_cast<int>(fy);
    const double top = (1.0 - ax) * clamped(x0, y0) + ax * clamped(x0 + 1, y0);
    const double bottom = (1.0 - ax) * clamped(x0, y0 + 1) + ax * clamped(x0 + 1, y0 + 1);
    return (1.0 - ay) * top + ay * bottom;
}

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in)
{
    std::string token;
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') {
                c = in.get();
            }
        } else if (std::isspace(c)) {
            if (!token.empty()) {
                return token;
            }
        } else {
            token.push_back(static_cast<char>(c));
        }
        c = in.get();
    }
    return token;
}

} // namespace

Image read_pgm(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("read_pgm: cannot open " + path.string());
    }
    if (next_token(in) != "P5") {
        throw std::runtime_error("read_pgm: not a binary PGM: " + path.string());
    }
    const int width = std::stoi(next_token(in));
    const int height = std::stoi(next_token(in));
    const int maxval = std::stoi(next_token(in));
    if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) {
        throw std::runtime_error("read_pgm: bad header in " + path.string());
    }
    Image img(width, height);
    const bool wide = maxval > 255;
    const std::size_t count = static_cast<std::size_t>(width) * height;
    std::vector<unsigned char> raw(count * (wide ? 2 : 1));
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
        throw std::runtime_error("read_pgm: truncated pixel data in " + path.string());
    }
    for (std::size_t i = 0; i < count; ++i) {
        const unsigned value = wide ? (unsigned(raw[2 * i]) << 8) | raw[2 * i + 1] : raw[i];
        img.pixels()[i] = static_cast<double>(value) / maxval;
    }
    return img;
}

void write_pgm(const std::filesystem::path& path, const Image& img)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("write_pgm: cannot open " + path.string());
    }
    out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
    std::vector<unsigned char> raw(img.pixels().size());
    std::transform(img.pixels().begin(), img.pixels().end(), raw.begin(), [](double v) {
        return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    });
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) {
        throw std::runtime_error("write_pgm: write failed for " + path.string());
    }
}

} // namespace ccr
