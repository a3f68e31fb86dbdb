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
#include "ccr/experiment.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <map>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace ccr;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(const fs::path& dir, const std::string& args)
{
    const fs::path out = dir / "stdout.txt";
    const fs::path err = dir / "stderr.txt";
    const std::string cmd = std::string(CCR_CLI_PATH) + " --config " + (dir / "run.cfg").string() + " " + args + " > " +
                            out.string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

fs::path workspace(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("ccr_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "run.cfg") << "# small end-to-end run\n"
                                   << "data_dir = " << (dir / "data").string() << "\n"
                                   << "model_file = " << (dir / "model.ccrm").string() << "\n"
                                   << "out_dir = " << (dir / "out").string() << "\n"
                                   << "seed = 5\n"
                                   << "train_stills = 60\n"
                                   << "train_sequences = 3\n"
                                   << "train_frames = 30\n"
                                   << "validation_frames = 40\n"
                                   << "test_sequences = 1\n"
                                   << "test_frames = 40\n"
                                   << "tiers = static,drift\n"
                                   << "pca_dim = 24\n"
                                   << "train_sdm = true\n";
    return dir;
}

std::map<std::string, std::string> tree(const fs::path& root)
{
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) {
            out[fs::relative(e.path(), root).string()] = slurp(e.path());
        }
    }
    return out;
}

} // namespace

TEST_SUITE("cli")
{
    TEST_CASE("full pipeline")
    {
        const fs::path dir = workspace("pipeline");
        const Run gen = cli(dir, "gen-data");
        REQUIRE(gen.code == 0);
        CHECK(gen.out.find("tier static: 1 sequences, 40 frames") != std::string::npos);
        CHECK(gen.out.find("train stills: 60") != std::string::npos);

        const auto drift = generate_tier("drift", 1, 40, 128, 5);
        const auto gt = read_ground_truth(dir / "data" / "drift" / "seq_00" / "ground_truth.txt");
        REQUIRE(gt.size() == drift[0].gt_shapes.size());
        for (std::size_t t = 0; t < gt.size(); ++t) {
            CHECK(gt[t] == drift[0].gt_shapes[t]);
        }

        const Run train = cli(dir, "train");
        REQUIRE(train.code == 0);
        CHECK(train.out.find("extractions: regression = 300 (5 x 60)") != std::string::npos);
        CHECK(train.out.find("sdm extractions: 2400 (L K M = 4 x 10 x 60)") != std::string::npos);
        const std::string model = slurp(dir / "model.ccrm");
        REQUIRE(cli(dir, "train").code == 0);
        CHECK(slurp(dir / "model.ccrm") == model);

        const Run track = cli(dir, "--mode iccr track");
        REQUIRE(track.code == 0);
        const std::string csv = slurp(dir / "out" / "track" / "iccr" / "drift" / "seq_00.csv");
        CHECK(csv.rfind("frame,rmse,reinit,updated\n", 0) == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 41);

        const Run eval = cli(dir, "eval --sweep");
        REQUIRE(eval.code == 0);
        const std::string auc = slurp(dir / "out" / "auc.csv");
        for (const char* row : {"static,ccr", "static,iccr", "drift,ccr", "drift,iccr", "drift,sdm"}) {
            CHECK(auc.find(row) != std::string::npos);
        }
        CHECK(fs::exists(dir / "out" / "ced_drift_iccr.dat"));
        CHECK(slurp(dir / "out" / "lambda_sweep.csv").find("oracle,") != std::string::npos);

        const Run bench = cli(dir, "--levels 4 bench");
        REQUIRE(bench.code == 0);
        CHECK(bench.out.find("ratio LK/5 = 8") != std::string::npos);
        CHECK(slurp(dir / "out" / "bench_update.csv").find("\n256,10,") != std::string::npos);

        const Run taylor = cli(dir, "validate-taylor");
        REQUIRE(taylor.code == 0);
        const std::string tv = slurp(dir / "out" / "taylor_validity.csv");
        CHECK(std::count(tv.begin(), tv.end(), '\n') == 6);
    }

    TEST_CASE("seeded data generation is reproducible")
    {
        const fs::path a = workspace("repro_a");
        const fs::path b = workspace("repro_b");
        for (const auto& dir : {a, b}) {
            std::ofstream(dir / "run.cfg", std::ios::app) << "train_stills = 12\ntrain_sequences = 2\n";
            REQUIRE(cli(dir, "gen-data").code == 0);
        }
        const auto ta = tree(a / "data");
        const auto tb = tree(b / "data");
        CHECK(ta.size() > 10);
        CHECK(ta == tb);

        const fs::path c = workspace("repro_c");
        std::ofstream(c / "run.cfg", std::ios::app) << "train_stills = 12\ntrain_sequences = 2\n";
        REQUIRE(cli(c, "--seed 6 gen-data").code == 0);
        CHECK(tree(c / "data") != ta);
    }

    TEST_CASE("failures exit non-zero with a machine-readable line")
    {
        const fs::path dir = workspace("errors");
        const Run missing = cli(dir, "train");
        CHECK(missing.code != 0);
        const auto line = nlohmann::json::parse(missing.err.substr(0, missing.err.find('\n')));
        CHECK(line["status"] == "error");
        CHECK(line["command"] == "train");
        CHECK_FALSE(line["message"].get<std::string>().empty());

        CHECK(cli(dir, "--mode fast track").code != 0);
        CHECK(cli(dir, "").code != 0);
        CHECK(cli(dir, "--lambda 0.1,0.2 track").code != 0);
    }
}
