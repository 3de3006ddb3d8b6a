#pragma once

#include "mincil/matrix.hpp"
#include "mincil/pinoise.hpp"
#include "mincil/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mincil {

/// Residual block f(r) = r + gain * tanh(r A), A entries N(0, 1/d1).
struct FrozenBlock {
    Matrix weight;  // d1 x d1
    double gain = 0.5;
};

struct BackboneParams {
    int blocks = 4;
    int d1 = 64;
    double gain = 0.5;
    int buffer_size = 2048;
};

/// Frozen stand-in for a pretrained feature extractor. Nothing in here is
/// written after construction.
struct Backbone {
    Matrix input_adapter;  // d_raw x d1, entries N(0, 1/d_raw)
    std::vector<FrozenBlock> blocks;

    int d_raw() const { return static_cast<int>(input_adapter.rows()); }
    int d1() const { return static_cast<int>(input_adapter.cols()); }
    int depth() const { return static_cast<int>(blocks.size()); }
};

/// Frozen random projection + rectifier widening r_L to the classifier input.
struct BufferExpansion {
    Matrix projection;  // d1 x buffer_size, entries N(0, 1)

    int buffer_size() const { return static_cast<int>(projection.cols()); }
};

Backbone make_backbone(int d_raw, const BackboneParams& params, SeededRng& rng);
BufferExpansion make_buffer_expansion(int d1, int buffer_size, SeededRng& rng);

/// Block output, also returning tanh(r A) for backprop when `activation` is set.
Matrix block_forward(const FrozenBlock& block, const Matrix& r, Matrix* activation = nullptr);

/// z = max(0, r_L P).
Matrix expand(const BufferExpansion& buffer, const Matrix& features);

struct LayerRecord {
    Matrix input;       // r_{l-1}
    Matrix activation;  // tanh(r_{l-1} A_l)
    Matrix block_out;   // f_l(r_{l-1})
    NoiseTrace noise;   // empty when no Pi-Noise layer ran
    Matrix output;      // r_l
};

/// Per-layer intermediates of one forward pass.
struct ForwardTrace {
    std::vector<LayerRecord> layers;

    const Matrix& final_features() const { return layers.back().output; }
};

/// Runs adapter, blocks and (optionally) the Pi-Noise layer after each block.
/// `layers` may be null or empty for the plain backbone.
ForwardTrace forward(const Backbone& backbone, const std::vector<PiNoiseLayer>* layers, const Matrix& batch,
                     const NoiseOptions& options, SeededRng& rng);

/// SHA-256 over every frozen parameter of the backbone and buffer.
std::string frozen_parameter_hash(const Backbone& backbone, const BufferExpansion& buffer);

}  // namespace mincil
