#include "mincil/errors.hpp"
#include "mincil/pinoise.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace mincil;

namespace {

NoiseGenerator random_generator(int d2, int task, SeededRng& rng) {
    NoiseGenerator g = make_generator(d2, task, 1.0, rng);
    g.mu.bias = sample_standard_normal(rng, 1, d2);
    g.sigma.bias = sample_standard_normal(rng, 1, d2);
    return g;
}

PiNoiseLayer random_layer(int d1, int d2, int tasks, std::uint64_t seed) {
    SeededRng rng(seed);
    PiNoiseLayer layer = make_pinoise_layer(d1, d2, 0, rng);
    for (int t = 1; t <= tasks; ++t) {
        layer.generators.push_back(random_generator(d2, t, rng));
        layer.prototypes.push_back(sample_standard_normal(rng, d2, 1));
    }
    layer.omega = Vector::Constant(tasks, 1.0 / tasks);
    return layer;
}

}  // namespace

TEST_SUITE("pinoise") {

TEST_CASE("strategy names round-trip") {
    for (auto s : {MixtureStrategy::LearnedOmega, MixtureStrategy::Average, MixtureStrategy::MuOnly,
                   MixtureStrategy::SigmaOnly, MixtureStrategy::LastTask, MixtureStrategy::RandomTask}) {
        CHECK(parse_strategy(to_string(s)) == s);
    }
    CHECK_THROWS_AS(parse_strategy("bogus"), ValidationError);
}

TEST_CASE("generator init: zero biases, scaled weights, two d2 x d2 maps") {
    SeededRng rng(1);
    const auto g = make_generator(64, 3, 0.5, rng);
    CHECK(g.task_index == 3);
    CHECK_FALSE(g.frozen);
    CHECK(g.mu.bias.isZero());
    CHECK(g.sigma.bias.isZero());
    CHECK(g.parameter_count() == 2u * (64 * 64 + 64));
    // N(0, 1/d2) * 0.5 -> second moment 0.25 / 64
    CHECK(g.mu.weight.squaredNorm() / g.mu.weight.size() == doctest::Approx(0.25 / 64).epsilon(0.1));
    const auto z = make_generator(8, 1, 0.0, rng);
    CHECK(z.mu.weight.isZero());
    CHECK(z.sigma.weight.isZero());
}

TEST_CASE("generate_noise examples") {
    SeededRng rng(2);
    const Matrix h = sample_standard_normal(rng, 5, 4);
    const Matrix eps = sample_standard_normal(rng, 5, 4);

    const auto zero = make_generator(4, 1, 0.0, rng);
    CHECK(generate_noise(zero, h, eps).noise.isZero());

    const auto g = random_generator(4, 1, rng);
    const auto mean_path = generate_noise(g, h, Matrix::Zero(5, 4));
    CHECK(mean_path.noise == g.mu.apply(h));

    NoiseGenerator scalar;
    scalar.mu = AffineMap{Matrix::Zero(1, 1), RowVector::Constant(1, 1.0)};
    scalar.sigma = AffineMap{Matrix::Zero(1, 1), RowVector::Constant(1, 2.0)};
    const auto out = generate_noise(scalar, Matrix::Ones(1, 1), Matrix::Constant(1, 1, 0.5));
    CHECK(out.noise(0, 0) == 2.0);

    CHECK_THROWS_AS(generate_noise(g, Matrix::Zero(5, 3), Matrix::Zero(5, 3)), ValidationError);
}

TEST_CASE("generate_noise matches an elementwise oracle") {
    SeededRng rng(3);
    const auto g = random_generator(3, 1, rng);
    const Matrix h = sample_standard_normal(rng, 2, 3);
    const Matrix eps = sample_standard_normal(rng, 2, 3);
    const auto out = generate_noise(g, h, eps);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 3; ++j) {
            double mu = g.mu.bias(j);
            double sigma = g.sigma.bias(j);
            for (int k = 0; k < 3; ++k) {
                mu += h(i, k) * g.mu.weight(k, j);
                sigma += h(i, k) * g.sigma.weight(k, j);
            }
            CHECK(out.noise(i, j) == doctest::Approx(eps(i, j) * sigma + mu).epsilon(1e-13));
        }
    }
}

TEST_CASE("mix examples") {
    SeededRng rng(4);
    const Matrix n = sample_standard_normal(rng, 3, 4);
    const std::vector<Matrix> one{n};
    CHECK(mix(MixtureStrategy::LearnedOmega, one, Vector::Ones(1), rng) == n);

    const std::vector<Matrix> same{n, n};
    Vector w(2);
    w << 0.3, 0.7;
    CHECK((mix(MixtureStrategy::LearnedOmega, same, w, rng) - n).cwiseAbs().maxCoeff() < 1e-15);

    const std::vector<Matrix> cancel{n, Matrix(-n)};
    CHECK(mix(MixtureStrategy::Average, cancel, Vector(), rng).isZero());
}

TEST_CASE("mix strategies pick what they claim") {
    SeededRng rng(5);
    const std::vector<Matrix> noises{sample_standard_normal(rng, 2, 3), sample_standard_normal(rng, 2, 3),
                                     sample_standard_normal(rng, 2, 3)};
    std::size_t chosen = 99;
    CHECK(mix(MixtureStrategy::LastTask, noises, Vector(), rng, &chosen) == noises[2]);
    CHECK(chosen == 2);

    std::vector<int> hits(3, 0);
    for (int k = 0; k < 300; ++k) {
        const Matrix m = mix(MixtureStrategy::RandomTask, noises, Vector(), rng, &chosen);
        REQUIRE(chosen < 3);
        CHECK(m == noises[chosen]);
        ++hits[chosen];
    }
    for (int h : hits) {
        CHECK(h > 50);
    }

    const Matrix avg = (noises[0] + noises[1] + noises[2]) / 3.0;
    CHECK((mix(MixtureStrategy::Average, noises, Vector(), rng) - avg).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("learned-omega mix is linear") {
    SeededRng rng(6);
    const Matrix a = sample_standard_normal(rng, 4, 3);
    const Matrix b = sample_standard_normal(rng, 4, 3);
    Vector w(2);
    w << 0.8, -0.4;
    const std::vector<Matrix> base{a, b};
    const std::vector<Matrix> scaled{2.5 * a, 2.5 * b};
    const Matrix lhs = mix(MixtureStrategy::LearnedOmega, scaled, w, rng);
    const Matrix rhs = 2.5 * mix(MixtureStrategy::LearnedOmega, base, w, rng);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("mix errors") {
    SeededRng rng(7);
    const std::vector<Matrix> none;
    CHECK_THROWS_AS(mix(MixtureStrategy::Average, none, Vector(), rng), ValidationError);
    const std::vector<Matrix> ragged{Matrix::Zero(2, 2), Matrix::Zero(2, 3)};
    CHECK_THROWS_AS(mix(MixtureStrategy::Average, ragged, Vector(), rng), ValidationError);
    const std::vector<Matrix> two{Matrix::Zero(2, 2), Matrix::Zero(2, 2)};
    CHECK_THROWS_AS(mix(MixtureStrategy::LearnedOmega, two, Vector::Ones(3), rng), ValidationError);
}

TEST_CASE("apply_layer: identity without generators or with zero generators") {
    SeededRng rng(8);
    PiNoiseLayer layer = make_pinoise_layer(6, 3, 0, rng);
    const Matrix r = sample_standard_normal(rng, 4, 6);
    CHECK(apply_layer(layer, r, NoiseOptions{}, rng) == r);
    layer.generators.push_back(make_generator(3, 1, 0.0, rng));
    layer.generators.push_back(make_generator(3, 2, 0.0, rng));
    layer.omega = Vector::Constant(2, 0.5);
    for (auto s : {MixtureStrategy::LearnedOmega, MixtureStrategy::Average, MixtureStrategy::RandomTask}) {
        CHECK(apply_layer(layer, r, NoiseOptions{s, false}, rng) == r);
    }
}

TEST_CASE("apply_layer: eval mode is deterministic and uses the mean path") {
    const PiNoiseLayer layer = random_layer(6, 3, 2, 9);
    SeededRng data(10);
    const Matrix r = sample_standard_normal(data, 4, 6);
    SeededRng r1(1), r2(2);
    const Matrix a = apply_layer(layer, r, NoiseOptions{}, r1);
    const Matrix b = apply_layer(layer, r, NoiseOptions{}, r2);
    CHECK(a == b);
    const Matrix h = r * layer.w_down;
    const Matrix mean = 0.5 * layer.generators[0].mu.apply(h) + 0.5 * layer.generators[1].mu.apply(h);
    CHECK((a - (r + mean * layer.w_up)).cwiseAbs().maxCoeff() < 1e-10);

    SeededRng s1(1), s2(2);
    CHECK(apply_layer(layer, r, NoiseOptions{MixtureStrategy::LearnedOmega, false}, s1) !=
          apply_layer(layer, r, NoiseOptions{MixtureStrategy::LearnedOmega, false}, s2));
}

TEST_CASE("apply_layer: one task with omega [1] equals the single-generator path") {
    PiNoiseLayer layer = random_layer(5, 3, 1, 11);
    layer.omega = Vector::Ones(1);
    SeededRng data(12);
    const Matrix r = sample_standard_normal(data, 3, 5);
    SeededRng r1(4), r2(4);
    NoiseTrace trace;
    const Matrix out = apply_layer(layer, r, NoiseOptions{MixtureStrategy::LearnedOmega, false}, r1, &trace);
    const Matrix eps = sample_standard_normal(r2, 3, 3);
    const Matrix direct = r + generate_noise(layer.generators[0], r * layer.w_down, eps).noise * layer.w_up;
    CHECK(out == direct);
}

TEST_CASE("apply_layer: mu-only and sigma-only keep one path") {
    const PiNoiseLayer layer = random_layer(5, 3, 2, 13);
    SeededRng data(14);
    const Matrix r = sample_standard_normal(data, 3, 5);
    const Matrix h = r * layer.w_down;
    SeededRng r1(4), r2(4), e(4);
    const Matrix eps = sample_standard_normal(e, 3, 3);
    const Matrix mu_only = apply_layer(layer, r, NoiseOptions{MixtureStrategy::MuOnly, false}, r1);
    const Matrix mu = 0.5 * (layer.generators[0].mu.apply(h) + layer.generators[1].mu.apply(h));
    CHECK((mu_only - (r + mu * layer.w_up)).cwiseAbs().maxCoeff() < 1e-10);
    const Matrix sigma_only = apply_layer(layer, r, NoiseOptions{MixtureStrategy::SigmaOnly, false}, r2);
    const Matrix sig = 0.5 * eps.cwiseProduct(layer.generators[0].sigma.apply(h) + layer.generators[1].sigma.apply(h));
    CHECK((sigma_only - (r + sig * layer.w_up)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("apply_layer rejects a wrong width") {
    const PiNoiseLayer layer = random_layer(5, 3, 1, 15);
    SeededRng rng(0);
    CHECK_THROWS_AS(apply_layer(layer, Matrix::Zero(2, 4), NoiseOptions{}, rng), ValidationError);
}

TEST_CASE("prototypes") {
    SeededRng rng(16);
    const PiNoiseLayer layer = make_pinoise_layer(6, 3, 0, rng);
    const Matrix x = sample_standard_normal(rng, 1, 6);
    const std::vector<Matrix> single{x};
    const Vector p = compute_prototype(layer, single);
    CHECK((p.transpose() - x * layer.w_down).cwiseAbs().maxCoeff() < 1e-14);

    const Matrix batch = sample_standard_normal(rng, 7, 6);
    const std::vector<Matrix> once{batch};
    const std::vector<Matrix> twice{batch, batch};
    CHECK((compute_prototype(layer, once) - compute_prototype(layer, twice)).cwiseAbs().maxCoeff() < 1e-14);

    // split into uneven batches: mean over rows, not over batches
    const std::vector<Matrix> split{Matrix(batch.topRows(2)), Matrix(batch.bottomRows(5))};
    CHECK((compute_prototype(layer, once) - compute_prototype(layer, split)).cwiseAbs().maxCoeff() < 1e-13);

    const std::vector<Matrix> none;
    CHECK_THROWS_AS(compute_prototype(layer, none), ValidationError);
}

TEST_CASE("orthogonal prototypes have zero similarity") {
    std::vector<Vector> protos{Vector::Unit(3, 0), Vector::Unit(3, 1)};
    const Vector s = prototype_similarity(protos);
    CHECK(s[0] == 0.0);
    CHECK(s[1] == 1.0);
}

TEST_CASE("init_omega closed forms") {
    std::vector<Vector> one{Vector::Ones(4)};
    CHECK(init_omega(one, 2.0)[0] == 1.0);

    std::vector<Vector> same(4, Vector::Constant(3, 0.7));
    for (double w : init_omega(same, 2.0)) {
        CHECK(std::abs(w - 0.25) < 1e-15);
    }

    std::vector<Vector> orth{Vector::Unit(2, 1), Vector::Unit(2, 0)};
    const Vector w = init_omega(orth, 2.0);
    // s = [0, 1] with the current task last
    CHECK(std::abs(w[1] - 0.6225) < 1e-4);
    CHECK(std::abs(w[0] - 0.3775) < 1e-4);
}

TEST_CASE("init_omega is a simplex point invariant to prototype scale") {
    SeededRng rng(17);
    std::vector<Vector> protos;
    for (int i = 0; i < 5; ++i) {
        protos.push_back(sample_standard_normal(rng, 6, 1));
    }
    const Vector w = init_omega(protos, 1.5);
    CHECK((w.array() > 0.0).all());
    CHECK(std::abs(w.sum() - 1.0) < 1e-12);
    auto scaled = protos;
    scaled[1] *= 40.0;
    scaled[4] *= 0.01;
    CHECK((init_omega(scaled, 1.5) - w).cwiseAbs().maxCoeff() < 1e-12);

    protos[2].setZero();
    CHECK_THROWS_AS(init_omega(protos, 1.5), ValidationError);
}

TEST_CASE("generator hash tracks parameters") {
    SeededRng rng(18);
    auto g = random_generator(3, 1, rng);
    const auto h = generator_hash(g);
    CHECK(h == generator_hash(g));
    g.sigma.bias(0) += 1e-12;
    CHECK(h != generator_hash(g));
}

}
