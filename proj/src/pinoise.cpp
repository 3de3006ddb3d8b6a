#include "mincil/pinoise.hpp"

#include "mincil/errors.hpp"
#include "mincil/hashing.hpp"
#include "mincil/numeric.hpp"

#include <cmath>
#include <string>

namespace mincil {

std::string_view to_string(MixtureStrategy s) {
    switch (s) {
        case MixtureStrategy::LearnedOmega: return "learned-omega";
        case MixtureStrategy::Average: return "average";
        case MixtureStrategy::MuOnly: return "mu-only";
        case MixtureStrategy::SigmaOnly: return "sigma-only";
        case MixtureStrategy::LastTask: return "last-task";
        case MixtureStrategy::RandomTask: return "random-task";
    }
    return "unknown";
}

MixtureStrategy parse_strategy(std::string_view name) {
    for (auto s : {MixtureStrategy::LearnedOmega, MixtureStrategy::Average, MixtureStrategy::MuOnly,
                   MixtureStrategy::SigmaOnly, MixtureStrategy::LastTask, MixtureStrategy::RandomTask}) {
        if (to_string(s) == name) {
            return s;
        }
    }
    throw ValidationError("unknown mixture strategy '" + std::string(name) + "'");
}

Matrix AffineMap::apply(const Matrix& h) const {
    Matrix out = h * weight;
    out.rowwise() += bias;
    return out;
}

std::size_t NoiseGenerator::parameter_count() const {
    return static_cast<std::size_t>(mu.weight.size() + mu.bias.size() + sigma.weight.size() + sigma.bias.size());
}

NoiseGenerator make_generator(int d2, int task_index, double init_scale, SeededRng& rng) {
    if (d2 < 1) {
        throw ValidationError("make_generator: d2 must be positive");
    }
    const double scale = init_scale / std::sqrt(static_cast<double>(d2));
    NoiseGenerator gen;
    gen.task_index = task_index;
    gen.mu.weight = sample_standard_normal(rng, d2, d2) * scale;
    gen.mu.bias = RowVector::Zero(d2);
    gen.sigma.weight = sample_standard_normal(rng, d2, d2) * scale;
    gen.sigma.bias = RowVector::Zero(d2);
    return gen;
}

GeneratorOutput generate_noise(const NoiseGenerator& gen, const Matrix& h, const Matrix& eps) {
    const auto d2 = gen.mu.weight.rows();
    if (h.cols() != d2) {
        throw ValidationError("generate_noise: feature width " + std::to_string(h.cols()) + " != d2 " +
                              std::to_string(d2));
    }
    require_shape(eps, h.rows(), d2, "generate_noise epsilon");
    GeneratorOutput out;
    out.mu = gen.mu.apply(h);
    out.sigma = gen.sigma.apply(h);
    out.noise = eps.cwiseProduct(out.sigma) + out.mu;
    return out;
}

Matrix mix(MixtureStrategy strategy, std::span<const Matrix> noises, const Vector& omega, SeededRng& rng,
           std::size_t* chosen) {
    if (noises.empty()) {
        throw ValidationError("mix: no noises");
    }
    for (const auto& n : noises) {
        require_shape(n, noises.front().rows(), noises.front().cols(), "mix operand");
    }
    const std::size_t count = noises.size();
    switch (strategy) {
        case MixtureStrategy::LearnedOmega: {
            if (static_cast<std::size_t>(omega.size()) != count) {
                throw ValidationError("mix: omega length " + std::to_string(omega.size()) + " != noise count " +
                                      std::to_string(count));
            }
            Matrix out = noises[0] * omega[0];
            for (std::size_t i = 1; i < count; ++i) {
                out += noises[i] * omega[static_cast<Eigen::Index>(i)];
            }
            return out;
        }
        case MixtureStrategy::Average:
        case MixtureStrategy::MuOnly:
        case MixtureStrategy::SigmaOnly: {
            Matrix out = noises[0];
            for (std::size_t i = 1; i < count; ++i) {
                out += noises[i];
            }
            return out / static_cast<double>(count);
        }
        case MixtureStrategy::LastTask:
            if (chosen != nullptr) {
                *chosen = count - 1;
            }
            return noises.back();
        case MixtureStrategy::RandomTask: {
            const auto pick = static_cast<std::size_t>(rng.uniform_index(count));
            if (chosen != nullptr) {
                *chosen = pick;
            }
            return noises[pick];
        }
    }
    throw ValidationError("mix: unknown strategy");
}

PiNoiseLayer make_pinoise_layer(int d1, int d2, int layer_index, SeededRng& rng) {
    if (d1 < 1 || d2 < 1) {
        throw ValidationError("make_pinoise_layer: widths must be positive");
    }
    PiNoiseLayer layer;
    layer.layer_index = layer_index;
    layer.w_down = sample_standard_normal(rng, d1, d2);
    layer.w_up = sample_standard_normal(rng, d2, d1);
    return layer;
}

Matrix apply_layer(const PiNoiseLayer& layer, const Matrix& r, const NoiseOptions& options, SeededRng& rng,
                   NoiseTrace* trace) {
    if (r.cols() != layer.d1()) {
        throw ValidationError("apply_layer: feature width " + std::to_string(r.cols()) + " != d1 " +
                              std::to_string(layer.d1()));
    }
    if (layer.generators.empty()) {
        return r;
    }
    NoiseTrace local;
    NoiseTrace& t = trace != nullptr ? *trace : local;
    t.h = r * layer.w_down;
    t.eps = options.eval_mode ? Matrix::Zero(r.rows(), layer.d2())
                              : sample_standard_normal(rng, r.rows(), layer.d2());
    t.outputs.clear();
    t.terms.clear();
    for (const auto& gen : layer.generators) {
        t.outputs.push_back(generate_noise(gen, t.h, t.eps));
        const auto& out = t.outputs.back();
        switch (options.strategy) {
            case MixtureStrategy::MuOnly: t.terms.push_back(out.mu); break;
            case MixtureStrategy::SigmaOnly: t.terms.push_back(t.eps.cwiseProduct(out.sigma)); break;
            default: t.terms.push_back(out.noise); break;
        }
    }
    t.chosen = 0;
    t.mixed = mix(options.strategy, t.terms, layer.omega, rng, &t.chosen);
    Matrix out = r + t.mixed * layer.w_up;
    require_finite(out, "Pi-Noise layer output");
    return out;
}

Vector compute_prototype(const PiNoiseLayer& layer, std::span<const Matrix> batches) {
    Vector sum = Vector::Zero(layer.d2());
    Eigen::Index rows = 0;
    for (const auto& b : batches) {
        if (b.rows() == 0) {
            continue;
        }
        if (b.cols() != layer.d1()) {
            throw ValidationError("compute_prototype: batch width mismatch");
        }
        sum += (b * layer.w_down).colwise().sum().transpose();
        rows += b.rows();
    }
    if (rows == 0) {
        throw ValidationError("compute_prototype: no samples");
    }
    return sum / static_cast<double>(rows);
}

Vector prototype_similarity(std::span<const Vector> prototypes) {
    if (prototypes.empty()) {
        throw ValidationError("prototype_similarity: no prototypes");
    }
    for (const auto& p : prototypes) {
        if (!(p.norm() > 0.0)) {
            throw ValidationError("prototype_similarity: zero-norm prototype");
        }
    }
    const Vector& current = prototypes.back();
    Vector s(static_cast<Eigen::Index>(prototypes.size()));
    for (std::size_t i = 0; i < prototypes.size(); ++i) {
        s[static_cast<Eigen::Index>(i)] = current.dot(prototypes[i]) / (current.norm() * prototypes[i].norm());
    }
    s[s.size() - 1] = 1.0;
    return s;
}

Vector init_omega(std::span<const Vector> prototypes, double tau) {
    const Vector s = prototype_similarity(prototypes);
    const auto w = softmax(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())), tau);
    return Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
}

std::string generator_hash(const NoiseGenerator& gen) {
    ContentHasher h;
    h.text("generator").u64(static_cast<std::uint64_t>(gen.task_index));
    h.matrix(gen.mu.weight).matrix(gen.mu.bias).matrix(gen.sigma.weight).matrix(gen.sigma.bias);
    return h.hex_digest();
}

}  // namespace mincil
