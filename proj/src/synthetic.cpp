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
#include "ccr/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace ccr {

namespace {

constexpr double kReferenceScale = 30.0;
constexpr double kBorderMargin = 2.0;

FaceModel build_standard_face()
{
    // x then y of: outer/inner left eye, inner/outer right eye, nose tip,
    // mouth corners, upper lip, lower lip, chin.
    const double xs[] = {-1.0, -0.42, 0.42, 1.0, 0.0, -0.55, 0.55, 0.0, 0.0, 0.0};
    const double ys[] = {-0.55, -0.5, -0.5, -0.55, 0.05, 0.62, 0.62, 0.5, 0.8, 1.3};
    const Index n = 10;
    Shape s0(2 * n);
    for (Index i = 0; i < n; ++i) {
        s0[i] = xs[i];
        s0[i + n] = ys[i];
    }
    s0.head(n).array() -= s0.head(n).mean();
    s0.tail(n).array() -= s0.tail(n).mean();
    s0 *= std::sqrt(static_cast<double>(n)) / s0.norm();

    // Similarity tangent space at s0.
    Matrix tangent(2 * n, 4);
    tangent.setZero();
    tangent.col(0) = s0;
    tangent.col(1).head(n) = -s0.tail(n);
    tangent.col(1).tail(n) = s0.head(n);
    tangent.col(2).head(n).setOnes();
    tangent.col(3).tail(n).setOnes();

    const Index modes = 6;
    std::mt19937_64 rng(20160911);
    std::normal_distribution<double> normal;
    Matrix basis(2 * n, 4 + modes);
    basis.leftCols(4) = tangent;
    for (Index k = 4; k < 4 + modes; ++k) {
        Vector v(2 * n);
        for (Index i = 0; i < v.size(); ++i) {
            v[i] = normal(rng);
        }
        basis.col(k) = v;
    }
    // Orthonormalise; the flexible modes end up orthogonal to the rigid tangent.
    const Eigen::HouseholderQR<Matrix> qr(basis);
    const Matrix q = qr.householderQ() * Matrix::Identity(2 * n, 4 + modes);

    FaceModel face;
    face.pdm.mean = s0;
    face.pdm.basis = q.rightCols(modes);
    face.mode_sigma.resize(modes);
    face.mode_sigma << 0.08, 0.065, 0.05, 0.04, 0.03, 0.025;
    face.polarity = {-1, -1, -1, -1, 1, -1, -1, -1, -1, 1};
    face.base_angle = {0.0, 0.0, 0.0, 0.0, 1.5708, 0.4, -0.4, 0.0, 0.0, 0.0};
    return face;
}

Matrix cholesky_factor(const Matrix& cov)
{
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

bool inside(const Shape& s, int width, int height)
{
    const Index n = point_count(s);
    for (Index i = 0; i < n; ++i) {
        if (s[i] < kBorderMargin || s[i] > width - 1 - kBorderMargin || s[i + n] < kBorderMargin ||
            s[i + n] > height - 1 - kBorderMargin) {
            return false;
        }
    }
    return true;
}

ShapeParams centre_params(const GeneratorConfig& cfg)
{
    ShapeParams p;
    p.rigid = {cfg.face_scale, 0.0, 0.5 * (cfg.width - 1), 0.5 * (cfg.height - 1)};
    p.flex = Vector::Zero(FaceModel::standard().pdm.flex_modes());
    return p;
}

} // namespace

const FaceModel& FaceModel::standard()
{
    static const FaceModel face = build_standard_face();
    return face;
}

Vector GeneratorConfig::default_step_sigma()
{
    Vector s(10);
    s << 0.5, 0.015, 1.5, 1.5, 0.008, 0.007, 0.006, 0.005, 0.004, 0.004;
    return s;
}

Matrix GeneratorConfig::step_covariance() const
{
    const Index m = step_sigma.size();
    // Two shared factors couple head turn with horizontal motion and
    // scale with vertical motion and the first modes.
    Matrix factors = Matrix::Zero(m, 2);
    const double f1[] = {0.2, 1.0, 1.0, 0.0, 0.6, 0.0, -0.5, 0.0, 0.3, 0.0};
    const double f2[] = {1.0, 0.0, 0.0, 1.0, 0.0, 0.7, 0.0, -0.4, 0.0, 0.2};
    for (Index i = 0; i < std::min<Index>(m, 10); ++i) {
        factors(i, 0) = f1[i];
        factors(i, 1) = f2[i];
    }
    Matrix corr = step_correlation * factors * factors.transpose();
    corr.diagonal().array() += 1.0 - step_correlation;
    const Vector inv = corr.diagonal().cwiseSqrt().cwiseInverse();
    corr = inv.asDiagonal() * corr * inv.asDiagonal();
    return step_sigma.asDiagonal() * corr * step_sigma.asDiagonal();
}

GeneratorConfig tier_config(const std::string& tier, int frames)
{
    GeneratorConfig cfg;
    cfg.frames = frames;
    if (tier == "static") {
        cfg.step_sigma.setZero();
        cfg.noise_sigma = 0.0;
    } else if (tier == "easy") {
        cfg.step_sigma *= 0.5;
        cfg.noise_sigma = 0.005;
    } else if (tier == "medium") {
        // defaults
    } else if (tier == "hard") {
        cfg.step_sigma *= 1.3;
        cfg.mean_reversion = 0.06;
        cfg.texture_contrast = 0.75;
        cfg.illumination_drift = 0.3;
        cfg.noise_sigma = 0.02;
    } else if (tier == "drift") {
        cfg.appearance_shift = 0.35;
        cfg.illumination_drift = 0.5;
        cfg.texture_contrast = 0.85;
    } else {
        throw std::invalid_argument("unknown tier: " + tier);
    }
    return cfg;
}

Image render_background(int width, int height, double contrast, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(0.0, width);
    std::uniform_real_distribution<double> uy(0.0, height);
    std::uniform_real_distribution<double> amp(-1.0, 1.0);
    std::uniform_real_distribution<double> radius(8.0, 24.0);
    Image bg(width, height, 0.0);
    for (int b = 0; b < 12; ++b) {
        const double cx = ux(rng);
        const double cy = uy(rng);
        const double a = contrast * amp(rng);
        const double r = radius(rng);
        const double inv = 1.0 / (2.0 * r * r);
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const double dx = x - cx;
                const double dy = y - cy;
                bg.at(x, y) += a * std::exp(-(dx * dx + dy * dy) * inv);
            }
        }
    }
    return bg;
}

Appearance draw_appearance(double shift, double contrast, std::uint64_t seed)
{
    const FaceModel& face = FaceModel::standard();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal;
    Appearance app;
    for (Index i = 0; i < face.points(); ++i) {
        const double sign = face.polarity[static_cast<std::size_t>(i)];
        app.amplitude.push_back(sign * contrast * (0.25 + 0.15 * unit(rng)));
        app.width.push_back((2.2 + 0.8 * unit(rng)) * (1.0 + shift));
        app.aspect.push_back(0.45 + 0.25 * unit(rng));
        const double turn = shift * (unit(rng) < 0.5 ? -0.8 : 0.8);
        app.angle.push_back(0.15 * normal(rng) + turn);
    }
    app.base = 0.4 + 0.2 * unit(rng);
    app.gain = 0.85 + 0.3 * unit(rng);
    return app;
}

Image render_face(const Image& background, const Shape& shape, double scale, double angle,
                  const Appearance& appearance, double shading, double noise_sigma, std::uint64_t noise_seed)
{
    const FaceModel& face = FaceModel::standard();
    const int width = background.width();
    const int height = background.height();
    Image img = background;
    for (double& v : img.pixels()) {
        v += appearance.base;
    }
    const Index n = point_count(shape);
    const double size = scale / kReferenceScale;
    for (Index i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double along = appearance.width[k] * size;
        const double across = along * appearance.aspect[k];
        const double theta = face.base_angle[k] + appearance.angle[k] + angle;
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        const double reach = 4.0 * along;
        const int x0 = std::max(0, static_cast<int>(std::floor(shape[i] - reach)));
        const int x1 = std::min(width - 1, static_cast<int>(std::ceil(shape[i] + reach)));
        const int y0 = std::max(0, static_cast<int>(std::floor(shape[i + n] - reach)));
        const int y1 = std::min(height - 1, static_cast<int>(std::ceil(shape[i + n] + reach)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double dx = x - shape[i];
                const double dy = y - shape[i + n];
                const double a = (c * dx + s * dy) / along;
                const double b = (-s * dx + c * dy) / across;
                img.at(x, y) += appearance.amplitude[k] * std::exp(-0.5 * (a * a + b * b));
            }
        }
    }

    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> normal(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double light = appearance.gain * (1.0 - shading * static_cast<double>(x) / width);
            double v = light * img.at(x, y);
            if (noise_sigma > 0.0) {
                v += normal(rng);
            }
            img.at(x, y) = v;
        }
    }
    return img;
}

SyntheticSequence generate_sequence(const GeneratorConfig& cfg, std::uint64_t seed)
{
    const FaceModel& face = FaceModel::standard();
    require_dims(cfg.step_sigma.size() == face.pdm.param_count(), "generate_sequence: step sigma has wrong length");
    if (cfg.frames < 1 || cfg.width < 8 || cfg.height < 8) {
        throw std::invalid_argument("generate_sequence: bad generator configuration");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;

    SyntheticSequence seq;
    seq.config = cfg;
    seq.seed = seed;
    const Appearance appearance = draw_appearance(cfg.appearance_shift, cfg.texture_contrast, rng());
    const Image background = render_background(cfg.width, cfg.height, cfg.background_contrast, rng());
    const Matrix step = cholesky_factor(cfg.step_covariance());
    const Vector centre = centre_params(cfg).packed();

    Vector p = centre;
    Vector noise(p.size());
    for (int t = 0; t < cfg.frames; ++t) {
        if (t > 0) {
            for (Index i = 0; i < noise.size(); ++i) {
                noise[i] = normal(rng);
            }
            p += cfg.mean_reversion * (centre - p) + step * noise;
        }
        const ShapeParams params = ShapeParams::unpack(p);
        const Shape shape = compose_shape(face.pdm, params);
        if (!inside(shape, cfg.width, cfg.height)) {
            seq.truncated = true;
            std::fprintf(stderr, "generate_sequence: landmarks left the frame at %d, truncating\n", t);
            break;
        }
        const double progress = cfg.frames > 1 ? static_cast<double>(t) / (cfg.frames - 1) : 0.0;
        Appearance lit = appearance;
        lit.gain *= 1.0 - 0.5 * cfg.illumination_drift * progress;
        const std::uint64_t noise_seed = rng();
        seq.frames.push_back(render_face(background, shape, params.rigid.scale, params.rigid.angle, lit,
                                         cfg.illumination_drift * progress, cfg.noise_sigma, noise_seed));
        seq.gt_shapes.push_back(shape);
        seq.gt_params.push_back(params);
    }
    return seq;
}

SyntheticSequence generate_stills(const GeneratorConfig& cfg, int count, std::uint64_t seed)
{
    const FaceModel& face = FaceModel::standard();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    SyntheticSequence out;
    out.config = cfg;
    out.seed = seed;
    const Vector centre = centre_params(cfg).packed();
    while (static_cast<int>(out.frames.size()) < count) {
        Vector p = centre;
        p[0] += 0.1 * cfg.face_scale * normal(rng);
        p[1] += 0.12 * normal(rng);
        p[2] += 6.0 * normal(rng);
        p[3] += 6.0 * normal(rng);
        for (Index k = 0; k < face.mode_sigma.size(); ++k) {
            p[4 + k] += face.mode_sigma[k] * normal(rng);
        }
        const ShapeParams params = ShapeParams::unpack(p);
        const Shape shape = compose_shape(face.pdm, params);
        const Appearance appearance = draw_appearance(cfg.appearance_shift, cfg.texture_contrast, rng());
        const Image background = render_background(cfg.width, cfg.height, cfg.background_contrast, rng());
        const std::uint64_t noise_seed = rng();
        if (!inside(shape, cfg.width, cfg.height)) {
            continue;
        }
        out.frames.push_back(
            render_face(background, shape, params.rigid.scale, params.rigid.angle, appearance, 0.0, cfg.noise_sigma, noise_seed));
        out.gt_shapes.push_back(shape);
        out.gt_params.push_back(params);
    }
    return out;
}

void write_ground_truth(const std::filesystem::path& file, const std::vector<Shape>& shapes)
{
    std::ofstream out(file);
    if (!out) {
        throw std::runtime_error("cannot write " + file.string());
    }
    out << std::setprecision(17);
    for (std::size_t t = 0; t < shapes.size(); ++t) {
        out << t;
        for (Index i = 0; i < shapes[t].size(); ++i) {
            out << ' ' << shapes[t][i];
        }
        out << '\n';
    }
    if (!out) {
        throw std::runtime_error("write failed for " + file.string());
    }
}

std::vector<Shape> read_ground_truth(const std::filesystem::path& file)
{
    std::ifstream in(file);
    if (!in) {
        throw std::runtime_error("cannot read " + file.string());
    }
    std::vector<Shape> shapes;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::istringstream fields(line);
        std::size_t index = 0;
        fields >> index;
        if (!fields || index != shapes.size()) {
            throw std::runtime_error("malformed ground truth line in " + file.string());
        }
        std::vector<double> coords;
        double v = 0.0;
        while (fields >> v) {
            coords.push_back(v);
        }
        if (coords.empty() || coords.size() % 2 != 0 || (!shapes.empty() && coords.size() != static_cast<std::size_t>(shapes.front().size()))) {
            throw std::runtime_error("inconsistent landmark count in " + file.string());
        }
        shapes.push_back(Eigen::Map<const Vector>(coords.data(), static_cast<Index>(coords.size())));
    }
    return shapes;
}

void write_sequence(const std::filesystem::path& dir, const SyntheticSequence& seq)
{
    std::filesystem::create_directories(dir);
    for (std::size_t t = 0; t < seq.frames.size(); ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%05zu.pgm", t);
        write_pgm(dir / name, seq.frames[t]);
    }
    write_ground_truth(dir / "ground_truth.txt", seq.gt_shapes);
}

LoadedSequence as_loaded(const SyntheticSequence& seq)
{
    return {seq.frames, seq.gt_shapes};
}

LoadedSequence read_sequence(const std::filesystem::path& dir)
{
    LoadedSequence seq;
    seq.gt_shapes = read_ground_truth(dir / "ground_truth.txt");
    for (std::size_t t = 0; t < seq.gt_shapes.size(); ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%05zu.pgm", t);
        seq.frames.push_back(read_pgm(dir / name));
    }
    return seq;
}

} // namespace ccr
