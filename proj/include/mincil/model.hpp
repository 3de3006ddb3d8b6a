#pragma once

#include "mincil/analytic_classifier.hpp"
#include "mincil/backbone.hpp"
#include "mincil/pinoise.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mincil {

struct ModelParams {
    BackboneParams backbone;
    int d2 = 16;
    double lambda = 100.0;
    bool pinoise_enabled = true;
    std::uint64_t seed = 7;  // frozen parameters: adapter, blocks, buffer, W_down, W_up
};

/// Frozen backbone + buffer, one Pi-Noise layer per block, analytic classifier.
struct MinModel {
    Backbone backbone;
    BufferExpansion buffer;
    std::vector<PiNoiseLayer> layers;  // empty when Pi-Noise is disabled
    AnalyticClassifier classifier;
    int sessions_completed = 0;

    bool pinoise_enabled() const { return !layers.empty(); }
};

MinModel make_model(int d_raw, const ModelParams& params);

/// Classifier input z = expand(r_L) for a batch.
Matrix extract_features(const MinModel& model, const Matrix& batch, const NoiseOptions& options, SeededRng& rng);

/// SHA-256 of the frozen projections W_down / W_up of every layer.
std::string projection_hash(const MinModel& model);

/// SHA-256 of everything the model holds, including the classifier.
std::string model_state_hash(const MinModel& model);

}  // namespace mincil
