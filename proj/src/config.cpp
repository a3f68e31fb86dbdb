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
#include "ccr/config.hpp"

#include "ccr/experiment.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ccr {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value)
{
    T out{};
    const auto* end = value.data() + value.size();
    const auto res = std::from_chars(value.data(), end, out);
    if (res.ec != std::errc{} || res.ptr != end) {
        throw std::invalid_argument("config: bad value for " + key + ": '" + value + "'");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& value)
{
    if (value == "true" || value == "1") {
        return true;
    }
    if (value == "false" || value == "0") {
        return false;
    }
    throw std::invalid_argument("config: bad boolean for " + key + ": '" + value + "'");
}

std::vector<std::string> split(const std::string& text)
{
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

std::string join(const std::vector<std::string>& items)
{
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        out += (i ? "," : "") + items[i];
    }
    return out;
}

std::string number(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

} // namespace

std::vector<double> parse_doubles(const std::string& text)
{
    std::vector<double> out;
    for (const auto& item : split(text)) {
        out.push_back(parse_number<double>("list", item));
    }
    return out;
}

void RunConfig::set(const std::string& key, const std::string& raw)
{
    const std::string value = trim(raw);
    if (key == "data_dir") {
        data_dir = value;
    } else if (key == "model_file") {
        model_file = value;
    } else if (key == "out_dir") {
        out_dir = value;
    } else if (key == "seed") {
        seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "image_size") {
        image_size = parse_number<int>(key, value);
    } else if (key == "train_stills") {
        train_stills = parse_number<int>(key, value);
    } else if (key == "train_sequences") {
        train_sequences = parse_number<int>(key, value);
    } else if (key == "train_frames") {
        train_frames = parse_number<int>(key, value);
    } else if (key == "test_sequences") {
        test_sequences = parse_number<int>(key, value);
    } else if (key == "test_frames") {
        test_frames = parse_number<int>(key, value);
    } else if (key == "validation_frames") {
        validation_frames = parse_number<int>(key, value);
    } else if (key == "tiers") {
        tiers = split(value);
    } else if (key == "levels") {
        levels = parse_number<Index>(key, value);
    } else if (key == "initial_draws") {
        initial_draws = parse_number<Index>(key, value);
    } else if (key == "pca_dim") {
        pca_dim = parse_number<Index>(key, value);
    } else if (key == "m_flex") {
        m_flex = parse_number<Index>(key, value);
    } else if (key == "ridge") {
        if (value == "auto") {
            ridge.reset();
        } else {
            ridge = parse_number<double>(key, value);
        }
    } else if (key == "descriptor") {
        if (value == "raw_patch") {
            features.kind = Descriptor::raw_patch;
        } else if (value == "gradient_histogram") {
            features.kind = Descriptor::gradient_histogram;
        } else {
            throw std::invalid_argument("config: unknown descriptor '" + value + "'");
        }
    } else if (key == "patch_size") {
        features.patch_size = parse_number<int>(key, value);
    } else if (key == "cells") {
        features.cells = parse_number<int>(key, value);
    } else if (key == "bins") {
        features.bins = parse_number<int>(key, value);
    } else if (key == "norm_floor") {
        features.norm_floor = parse_number<double>(key, value);
    } else if (key == "propagation") {
        if (value == "taylor") {
            propagation = Propagation::taylor;
        } else if (value == "extracted") {
            propagation = Propagation::extracted;
        } else {
            throw std::invalid_argument("config: unknown propagation '" + value + "'");
        }
    } else if (key == "train_sdm") {
        train_sdm = parse_bool(key, value);
    } else if (key == "mode") {
        if (value != "ccr" && value != "iccr" && value != "sdm") {
            throw std::invalid_argument("config: mode must be ccr, iccr or sdm");
        }
        mode = value;
    } else if (key == "lambda") {
        lambdas = parse_doubles(value);
        for (const double l : lambdas) {
            if (!(l > 0.0)) {
                throw std::invalid_argument("config: forgetting factors must be positive");
            }
        }
    } else if (key == "update_threshold") {
        update_threshold = parse_number<double>(key, value);
    } else if (key == "loss_threshold") {
        loss_threshold = parse_number<double>(key, value);
    } else {
        throw std::invalid_argument("config: unknown key '" + key + "'");
    }
}

void RunConfig::load(const std::filesystem::path& file)
{
    std::ifstream in(file);
    if (!in) {
        throw std::runtime_error("cannot read config " + file.string());
    }
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config: line " + std::to_string(lineno) + " is not key=value");
        }
        set(trim(line.substr(0, eq)), line.substr(eq + 1));
    }
}

std::string RunConfig::dump() const
{
    std::ostringstream os;
    os << "data_dir=" << data_dir.string() << '\n'
       << "model_file=" << model_file.string() << '\n'
       << "out_dir=" << out_dir.string() << '\n'
       << "seed=" << seed << '\n'
       << "image_size=" << image_size << '\n'
       << "train_stills=" << train_stills << '\n'
       << "train_sequences=" << train_sequences << '\n'
       << "train_frames=" << train_frames << '\n'
       << "test_sequences=" << test_sequences << '\n'
       << "test_frames=" << test_frames << '\n'
       << "validation_frames=" << validation_frames << '\n'
       << "tiers=" << join(tiers) << '\n'
       << "levels=" << levels << '\n'
       << "initial_draws=" << initial_draws << '\n'
       << "pca_dim=" << pca_dim << '\n'
       << "m_flex=" << m_flex << '\n'
       << "ridge=" << (ridge ? number(*ridge) : "auto") << '\n'
       << "descriptor=" << (features.kind == Descriptor::raw_patch ? "raw_patch" : "gradient_histogram") << '\n'
       << "patch_size=" << features.patch_size << '\n'
       << "cells=" << features.cells << '\n'
       << "bins=" << features.bins << '\n'
       << "norm_floor=" << number(features.norm_floor) << '\n'
       << "propagation=" << (propagation == Propagation::taylor ? "taylor" : "extracted") << '\n'
       << "train_sdm=" << (train_sdm ? "true" : "false") << '\n'
       << "mode=" << mode << '\n';
    if (!lambdas.empty()) {
        std::vector<std::string> items;
        for (double v : lambdas) {
            items.push_back(number(v));
        }
        os << "lambda=" << join(items) << '\n';
    }
    if (update_threshold) {
        os << "update_threshold=" << number(*update_threshold) << '\n';
    }
    if (loss_threshold) {
        os << "loss_threshold=" << number(*loss_threshold) << '\n';
    }
    return os.str();
}

CascadeConfig RunConfig::cascade() const
{
    CascadeConfig cfg;
    cfg.levels = levels;
    cfg.pca_dim = pca_dim;
    cfg.initial_draws = initial_draws;
    cfg.ridge = ridge;
    cfg.seed = seed;
    cfg.propagation = propagation;
    return cfg;
}

std::vector<double> RunConfig::forgetting() const
{
    if (lambdas.empty()) {
        return desk_forgetting_schedule(static_cast<std::size_t>(levels));
    }
    if (lambdas.size() != static_cast<std::size_t>(levels)) {
        throw std::invalid_argument("config: lambda needs one value per level");
    }
    return lambdas;
}

} // namespace ccr
