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

#include "ccr/experiment.hpp"

namespace ccr::test {

/// Small trained system shared by the cascade, incremental and tracker tests.
struct Trained {
    ExperimentConfig cfg;
    TrainingData data;
    TrainedSystem sys;
};

inline ExperimentConfig small_experiment()
{
    ExperimentConfig cfg;
    cfg.seed = 3;
    cfg.train_stills = 200;
    cfg.train_sequences = 6;
    cfg.train_frames = 60;
    cfg.calibration_stills = 40;
    cfg.cascade.pca_dim = 48;
    return cfg;
}

inline const Trained& trained()
{
    static const Trained t = [] {
        Trained out;
        out.cfg = small_experiment();
        out.data = generate_training_data(out.cfg);
        out.sys = train_system(out.data, out.cfg, FeatureExtractor(out.cfg.features));
        return out;
    }();
    return t;
}

} // namespace ccr::test
