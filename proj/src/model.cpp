#include "mincil/model.hpp"

#include "mincil/errors.hpp"
#include "mincil/hashing.hpp"

namespace mincil {
namespace {
constexpr std::uint64_t kBackboneSalt = 11;
constexpr std::uint64_t kBufferSalt = 12;
constexpr std::uint64_t kProjectionSalt = 13;
}  // namespace

MinModel make_model(int d_raw, const ModelParams& params) {
    if (params.d2 < 1) {
        throw ValidationError("d2 must be positive");
    }
    const SeededRng root(params.seed);
    MinModel model;
    SeededRng bb_rng = root.derive(kBackboneSalt);
    model.backbone = make_backbone(d_raw, params.backbone, bb_rng);
    SeededRng buf_rng = root.derive(kBufferSalt);
    model.buffer = make_buffer_expansion(params.backbone.d1, params.backbone.buffer_size, buf_rng);
    if (params.pinoise_enabled) {
        SeededRng proj_rng = root.derive(kProjectionSalt);
        for (int l = 0; l < params.backbone.blocks; ++l) {
            model.layers.push_back(make_pinoise_layer(params.backbone.d1, params.d2, l + 1, proj_rng));
        }
    }
    model.classifier = AnalyticClassifier(params.backbone.buffer_size, params.lambda);
    return model;
}

Matrix extract_features(const MinModel& model, const Matrix& batch, const NoiseOptions& options, SeededRng& rng) {
    const ForwardTrace trace = forward(model.backbone, &model.layers, batch, options, rng);
    return expand(model.buffer, trace.final_features());
}

std::string projection_hash(const MinModel& model) {
    ContentHasher h;
    h.text("projections");
    for (const auto& layer : model.layers) {
        h.matrix(layer.w_down).matrix(layer.w_up);
    }
    return h.hex_digest();
}

std::string model_state_hash(const MinModel& model) {
    ContentHasher h;
    h.text("model").text(frozen_parameter_hash(model.backbone, model.buffer)).text(projection_hash(model));
    for (const auto& layer : model.layers) {
        for (const auto& gen : layer.generators) {
            h.text(generator_hash(gen));
        }
        for (const auto& p : layer.prototypes) {
            h.vector(p);
        }
        h.vector(layer.omega);
    }
    h.text(model.classifier.state_hash()).u64(static_cast<std::uint64_t>(model.sessions_completed));
    return h.hex_digest();
}

}  // namespace mincil
