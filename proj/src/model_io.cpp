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
#include "ccr/model_io.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

namespace ccr {

namespace {

constexpr char kMagic[4] = {'C', 'C', 'R', 'M'};
constexpr char kIncrementalTag[4] = {'I', 'C', 'C', 'R'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    void raw(const char* p, std::size_t n) { out_.append(p, n); }

    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i) {
            out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
        }
    }

    void u64(std::uint64_t v)
    {
        for (int i = 0; i < 8; ++i) {
            out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
        }
    }

    // Row-major blob.
    void blob(const Matrix& a)
    {
        u64(static_cast<std::uint64_t>(a.size()) * 8);
        for (Index r = 0; r < a.rows(); ++r) {
            for (Index c = 0; c < a.cols(); ++c) {
                u64(std::bit_cast<std::uint64_t>(a(r, c)));
            }
        }
    }

    void blob(const Vector& v) { blob(Matrix(v)); }

    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    void need(std::size_t n) const
    {
        if (pos_ + n > bytes_.size()) {
            throw std::runtime_error("model file truncated");
        }
    }

    bool at_end() const { return pos_ == bytes_.size(); }

    std::string raw(std::size_t n)
    {
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::uint64_t unsigned_le(int width)
    {
        need(static_cast<std::size_t>(width));
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)]))
                 << (8 * i);
        }
        pos_ += static_cast<std::size_t>(width);
        return v;
    }

    Matrix blob(Index rows, Index cols)
    {
        const std::uint64_t len = unsigned_le(8);
        if (len != static_cast<std::uint64_t>(rows) * static_cast<std::uint64_t>(cols) * 8) {
            throw std::runtime_error("model file blob has unexpected size");
        }
        Matrix a(rows, cols);
        for (Index r = 0; r < rows; ++r) {
            for (Index c = 0; c < cols; ++c) {
                a(r, c) = std::bit_cast<double>(unsigned_le(8));
            }
        }
        return a;
    }

    Vector vec(Index n) { return blob(n, 1).col(0); }

private:
    const std::string& bytes_;
    std::size_t pos_ = 0;
};

const char* descriptor_name(Descriptor d)
{
    return d == Descriptor::raw_patch ? "raw_patch" : "gradient_histogram";
}

Descriptor descriptor_from(const std::string& name)
{
    if (name == "raw_patch") {
        return Descriptor::raw_patch;
    }
    if (name == "gradient_histogram") {
        return Descriptor::gradient_histogram;
    }
    throw std::runtime_error("model file: unknown descriptor " + name);
}

} // namespace

std::string serialise_model(const ModelFile& file)
{
    const CascadeModel& model = file.model;
    model.pdm.validate();
    const Index n = model.pdm.points();
    const Index m = model.param_dim();
    const Index d = model.features.dim(n);

    nlohmann::json manifest;
    manifest["n"] = n;
    manifest["m"] = m;
    manifest["m_flex"] = model.pdm.flex_modes();
    manifest["d"] = d;
    manifest["L"] = model.levels.size();
    nlohmann::json dr = nlohmann::json::array();
    for (const auto& level : model.levels) {
        require_dims(level.pca.basis.rows() == d && level.regressor.r.rows() == m &&
                         level.regressor.r.cols() == level.pca.dim() + 1 && level.moments.dim() == m,
                     "serialise_model: level dimensions are inconsistent");
        dr.push_back(level.pca.dim());
    }
    manifest["d_r"] = dr;
    manifest["descriptor"] = {{"kind", descriptor_name(model.features.kind)},
                              {"patch_size", model.features.patch_size},
                              {"cells", model.features.cells},
                              {"bins", model.features.bins},
                              {"norm_floor", model.features.norm_floor}};
    manifest["iccr"] = file.incremental.has_value();
    if (file.gate) {
        const GateConfig& g = *file.gate;
        manifest["gate"] = {{"update_threshold", g.update_threshold}, {"loss_threshold", g.loss_threshold},
                            {"update_spacing", g.update_spacing},     {"window", g.window},
                            {"min_window", g.min_window},             {"reinit_jitter", g.reinit_jitter}};
    }
    const std::string text = manifest.dump();

    Writer w;
    w.raw(kMagic, 4);
    w.u32(kVersion);
    w.u64(text.size());
    w.raw(text.data(), text.size());
    w.blob(model.pdm.mean);
    w.blob(model.pdm.basis);
    for (const auto& level : model.levels) {
        w.blob(level.pca.basis);
        w.blob(level.pca.mean);
        w.blob(level.pca.eigenvalues);
        w.blob(level.regressor.r);
        w.blob(level.moments.mu);
        w.blob(level.moments.sigma);
    }
    if (file.incremental) {
        const IncrementalState& s = *file.incremental;
        require_dims(s.levels.size() == model.levels.size(), "serialise_model: incremental state level count");
        w.raw(kIncrementalTag, 4);
        w.u64(s.updates);
        w.u64(s.skipped);
        for (std::size_t l = 0; l < s.levels.size(); ++l) {
            const IncrementalLevel& lv = s.levels[l];
            const Index dl = model.levels[l].pca.dim() + 1;
            require_dims(lv.v.rows() == dl && lv.v_inv.rows() == dl && lv.cov_xy.rows() == m && lv.cov_xy.cols() == dl,
                         "serialise_model: incremental state dimensions");
            w.u64(std::bit_cast<std::uint64_t>(lv.lambda));
            w.blob(lv.v);
            w.blob(lv.v_inv);
            w.blob(lv.cov_xy);
            w.blob(lv.r);
        }
    }
    return w.take();
}

ModelFile deserialise_model(const std::string& bytes)
{
    Reader r(bytes);
    if (r.raw(4) != std::string(kMagic, 4)) {
        throw std::runtime_error("not a model file (bad magic)");
    }
    const auto version = r.unsigned_le(4);
    if (version != kVersion) {
        throw std::runtime_error("unsupported model file version " + std::to_string(version));
    }
    const auto len = r.unsigned_le(8);
    const nlohmann::json manifest = nlohmann::json::parse(r.raw(len));

    ModelFile file;
    CascadeModel& model = file.model;
    const Index n = manifest.at("n").get<Index>();
    const Index m = manifest.at("m").get<Index>();
    const Index m_flex = manifest.at("m_flex").get<Index>();
    const Index d = manifest.at("d").get<Index>();
    const auto levels = manifest.at("L").get<std::size_t>();
    const auto& desc = manifest.at("descriptor");
    model.features.kind = descriptor_from(desc.at("kind").get<std::string>());
    model.features.patch_size = desc.at("patch_size").get<int>();
    model.features.cells = desc.at("cells").get<int>();
    model.features.bins = desc.at("bins").get<int>();
    model.features.norm_floor = desc.at("norm_floor").get<double>();
    model.features.validate();
    if (model.features.dim(n) != d || m != m_flex + ShapeParams::kRigidCount) {
        throw std::runtime_error("model file manifest is inconsistent");
    }

    model.pdm.mean = r.vec(2 * n);
    model.pdm.basis = r.blob(2 * n, m_flex);
    const auto& dr = manifest.at("d_r");
    if (dr.size() != levels) {
        throw std::runtime_error("model file manifest is inconsistent");
    }
    for (std::size_t l = 0; l < levels; ++l) {
        const Index k = dr[l].get<Index>();
        CascadeLevel level;
        level.pca.basis = r.blob(d, k);
        level.pca.mean = r.vec(d);
        level.pca.eigenvalues = r.vec(k);
        level.regressor.r = r.blob(m, k + 1);
        level.moments.mu = r.vec(m);
        level.moments.sigma = r.blob(m, m);
        model.levels.push_back(std::move(level));
    }
    if (manifest.contains("gate")) {
        const auto& g = manifest.at("gate");
        GateConfig gate;
        gate.update_threshold = g.at("update_threshold").get<double>();
        gate.loss_threshold = g.at("loss_threshold").get<double>();
        gate.update_spacing = g.at("update_spacing").get<int>();
        gate.window = g.at("window").get<int>();
        gate.min_window = g.at("min_window").get<int>();
        gate.reinit_jitter = g.at("reinit_jitter").get<double>();
        file.gate = gate;
    }
    if (manifest.value("iccr", false)) {
        if (r.raw(4) != std::string(kIncrementalTag, 4)) {
            throw std::runtime_error("model file: missing incremental section");
        }
        IncrementalState s;
        s.updates = r.unsigned_le(8);
        s.skipped = r.unsigned_le(8);
        for (std::size_t l = 0; l < levels; ++l) {
            const Index dl = model.levels[l].pca.dim() + 1;
            IncrementalLevel lv;
            lv.lambda = std::bit_cast<double>(r.unsigned_le(8));
            lv.v = r.blob(dl, dl);
            lv.v_inv = r.blob(dl, dl);
            lv.cov_xy = r.blob(m, dl);
            lv.r = r.blob(m, dl);
            s.levels.push_back(std::move(lv));
        }
        file.incremental = std::move(s);
    }
    if (!r.at_end()) {
        throw std::runtime_error("model file has trailing bytes");
    }
    return file;
}

void save_model(const std::filesystem::path& path, const ModelFile& file)
{
    const std::string bytes = serialise_model(file);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw std::runtime_error("write failed for " + path.string());
    }
}

ModelFile load_model(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialise_model(bytes);
}

} // namespace ccr
