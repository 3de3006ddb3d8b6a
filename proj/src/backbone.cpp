#include "mincil/backbone.hpp"

#include "mincil/errors.hpp"
#include "mincil/hashing.hpp"

#include <cmath>
#include <string>

namespace mincil {

Backbone make_backbone(int d_raw, const BackboneParams& params, SeededRng& rng) {
    if (d_raw < 1 || params.d1 < 1 || params.blocks < 1) {
        throw ValidationError("make_backbone: widths and depth must be positive");
    }
    Backbone bb;
    bb.input_adapter = sample_standard_normal(rng, d_raw, params.d1) / std::sqrt(static_cast<double>(d_raw));
    for (int l = 0; l < params.blocks; ++l) {
        FrozenBlock block;
        block.weight = sample_standard_normal(rng, params.d1, params.d1) / std::sqrt(static_cast<double>(params.d1));
        block.gain = params.gain;
        bb.blocks.push_back(std::move(block));
    }
    return bb;
}

BufferExpansion make_buffer_expansion(int d1, int buffer_size, SeededRng& rng) {
    if (buffer_size < d1) {
        throw ValidationError("buffer_size (" + std::to_string(buffer_size) + ") must be at least d1 (" +
                              std::to_string(d1) + ")");
    }
    return BufferExpansion{sample_standard_normal(rng, d1, buffer_size)};
}

Matrix block_forward(const FrozenBlock& block, const Matrix& r, Matrix* activation) {
    Matrix act = (r * block.weight).array().tanh().matrix();
    Matrix out = r + block.gain * act;
    if (activation != nullptr) {
        *activation = std::move(act);
    }
    return out;
}

Matrix expand(const BufferExpansion& buffer, const Matrix& features) {
    if (features.cols() != buffer.projection.rows()) {
        throw ValidationError("expand: feature width " + std::to_string(features.cols()) + " != d1 " +
                              std::to_string(buffer.projection.rows()));
    }
    return (features * buffer.projection).cwiseMax(0.0);
}

ForwardTrace forward(const Backbone& backbone, const std::vector<PiNoiseLayer>* layers, const Matrix& batch,
                     const NoiseOptions& options, SeededRng& rng) {
    if (batch.cols() != backbone.d_raw()) {
        throw ValidationError("forward: batch width " + std::to_string(batch.cols()) + " != input width " +
                              std::to_string(backbone.d_raw()));
    }
    const bool with_noise = layers != nullptr && !layers->empty();
    if (with_noise && static_cast<int>(layers->size()) != backbone.depth()) {
        throw ValidationError("forward: " + std::to_string(layers->size()) + " Pi-Noise layers for " +
                              std::to_string(backbone.depth()) + " blocks");
    }
    ForwardTrace trace;
    trace.layers.resize(backbone.blocks.size());
    Matrix current = batch * backbone.input_adapter;
    for (std::size_t l = 0; l < backbone.blocks.size(); ++l) {
        LayerRecord& rec = trace.layers[l];
        rec.input = std::move(current);
        rec.block_out = block_forward(backbone.blocks[l], rec.input, &rec.activation);
        if (with_noise) {
            rec.output = apply_layer((*layers)[l], rec.block_out, options, rng, &rec.noise);
        } else {
            rec.output = rec.block_out;
        }
        require_finite(rec.output, "backbone layer " + std::to_string(l + 1));
        current = rec.output;
    }
    return trace;
}

std::string frozen_parameter_hash(const Backbone& backbone, const BufferExpansion& buffer) {
    ContentHasher h;
    h.text("backbone").matrix(backbone.input_adapter);
    for (const auto& block : backbone.blocks) {
        h.matrix(block.weight).f64(block.gain);
    }
    h.matrix(buffer.projection);
    return h.hex_digest();
}

}  // namespace mincil
