#pragma once

#include "mincil/matrix.hpp"
#include "mincil/rng.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mincil {

/// How the per-task noises of one layer are combined.
enum class MixtureStrategy {
    LearnedOmega,  // sum_i omega_i * noise_i, omega trained per session
    Average,       // mean of full noises
    MuOnly,        // mean of the mu terms (sigma path zeroed)
    SigmaOnly,     // mean of the eps * sigma terms (mu path zeroed)
    LastTask,      // newest generator only
    RandomTask,    // one generator per batch, uniformly from rng
};

std::string_view to_string(MixtureStrategy s);
/// Accepts learned-omega, average, mu-only, sigma-only, last-task, random-task.
MixtureStrategy parse_strategy(std::string_view name);

/// y = h W + b, broadcast over rows.
struct AffineMap {
    Matrix weight;   // d2 x d2
    RowVector bias;  // 1 x d2

    Matrix apply(const Matrix& h) const;
};

/// Task-specific mean/scale generator.  Single affine maps for both heads, so a
/// generator costs two d2 x d2 matrices plus biases.
struct NoiseGenerator {
    AffineMap mu;
    AffineMap sigma;
    int task_index = 0;
    bool frozen = false;

    std::size_t parameter_count() const;
};

/// Weights N(0, 1/d2) * init_scale, zero biases. init_scale = 0 gives a
/// generator whose noise is exactly zero.
NoiseGenerator make_generator(int d2, int task_index, double init_scale, SeededRng& rng);

struct GeneratorOutput {
    Matrix mu;     // n x d2
    Matrix sigma;  // n x d2
    Matrix noise;  // eps (.) sigma + mu
};

/// Reparameterized draw eps (.) phi_sigma(h) + phi_mu(h).
GeneratorOutput generate_noise(const NoiseGenerator& gen, const Matrix& h, const Matrix& eps);

/// Combines equally shaped noises. `omega` is read only for LearnedOmega.
/// For RandomTask the chosen index is drawn from rng and written to `chosen`.
Matrix mix(MixtureStrategy strategy, std::span<const Matrix> noises, const Vector& omega, SeededRng& rng,
           std::size_t* chosen = nullptr);

struct PiNoiseLayer {
    int layer_index = 0;
    Matrix w_down;  // d1 x d2, frozen N(0,1)
    Matrix w_up;    // d2 x d1, frozen N(0,1)
    std::vector<NoiseGenerator> generators;
    std::vector<Vector> prototypes;
    Vector omega;

    int d1() const { return static_cast<int>(w_down.rows()); }
    int d2() const { return static_cast<int>(w_down.cols()); }
    int tasks_seen() const { return static_cast<int>(generators.size()); }
};

PiNoiseLayer make_pinoise_layer(int d1, int d2, int layer_index, SeededRng& rng);

/// Everything apply_layer computed, kept for the backward pass.
struct NoiseTrace {
    Matrix h;       // r_l W_down
    Matrix eps;     // shared by every generator of the layer
    std::vector<GeneratorOutput> outputs;
    std::vector<Matrix> terms;  // what was handed to mix(), per generator
    Matrix mixed;
    std::size_t chosen = 0;
};

struct NoiseOptions {
    MixtureStrategy strategy = MixtureStrategy::LearnedOmega;
    bool eval_mode = true;  // eps = 0
};

/// r_hat = r + mix(noises) W_up; identity when the layer has no generators.
Matrix apply_layer(const PiNoiseLayer& layer, const Matrix& r, const NoiseOptions& options, SeededRng& rng,
                   NoiseTrace* trace = nullptr);

/// Mean over all rows of (inputs W_down); batches may have any row counts.
Vector compute_prototype(const PiNoiseLayer& layer, std::span<const Matrix> batches);

/// softmax(cos(mu_t, mu_i) / tau) with mu_t the last prototype.
Vector init_omega(std::span<const Vector> prototypes, double tau);

/// Cosine similarities of the last prototype against every prototype.
Vector prototype_similarity(std::span<const Vector> prototypes);

/// SHA-256 of one generator's parameters.
std::string generator_hash(const NoiseGenerator& gen);

}  // namespace mincil
