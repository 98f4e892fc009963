#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "finrl_dapo/policy_net.hpp"
#include "support/test_support.hpp"

using namespace finrl_dapo;

namespace {

policy::PolicyShape small_shape(std::size_t in, std::vector<std::size_t> hidden,
                                std::size_t out) {
    policy::PolicyShape s;
    s.input_dim = in;
    s.hidden = std::move(hidden);
    s.output_dim = out;
    return s;
}

void randomize(policy::PolicyParams& params, std::uint64_t seed, double scale = 0.5) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (double& v : params.value) v = u(rng);
    params.clamp_log_std();
}

// Scalar reference for one squashed-Gaussian component.
double scalar_log_density(double action, double mean, double sd) {
    const double z = 0.5 * (std::log1p(action) - std::log1p(-action));
    const double u = (z - mean) / sd;
    return -0.5 * u * u - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi) -
           std::log1p(-action * action);
}

}  // namespace

TEST_CASE("shape bookkeeping: dims, offsets and parameter count") {
    const auto shape = small_shape(3, {4, 5}, 2);
    CHECK(shape.dims() == std::vector<std::size_t>{3, 4, 5, 2});
    const std::size_t expected = (4 * 3 + 4) + (5 * 4 + 5) + (2 * 5 + 2) + 2;
    CHECK(shape.param_count() == expected);
    CHECK(shape.log_std_offset() == expected - 2);
    CHECK(shape.bias_offset(0) == 12);
    CHECK(shape.weight_offset(1) == 16);
}

TEST_CASE("forward: zero output layer gives zero means; std honors the clamp") {
    auto params = policy::init_params(small_shape(5, {8, 8}, 3), 99, -0.5);
    std::vector<double> obs = {0.3, -1.0, 2.0, 0.0, 5.0};
    const auto head = policy::forward(params, obs);
    for (double m : head.mean) CHECK(m == 0.0);
    for (double s : head.std) CHECK(s == doctest::Approx(std::exp(-0.5)));

    params.log_std()[0] = -20.0;  // below the clamp floor
    const auto clamped = policy::forward(params, obs);
    CHECK(clamped.std[0] == doctest::Approx(std::exp(-5.0)));
}

TEST_CASE("forward: deterministic and dimension-checked") {
    auto params = policy::init_params(small_shape(4, {6}, 2), 7);
    randomize(params, 12);
    const std::vector<double> obs = {0.1, 0.2, -0.4, 1.0};
    const auto a = policy::forward(params, obs);
    const auto b = policy::forward(params, obs);
    CHECK(a.mean == b.mean);
    CHECK(a.std == b.std);
    CHECK_THROWS_AS(policy::forward(params, std::vector<double>{1.0, 2.0}), DimensionMismatch);
}

TEST_CASE("init_params: hidden layers orthogonal-ish, output layer zero") {
    const auto shape = small_shape(6, {8, 8}, 2);
    const auto params = policy::init_params(shape, 123);
    // First hidden matrix is 8x6 (rows >= cols): its columns are orthonormal.
    for (std::size_t c = 0; c < 6; ++c) {
        double norm = 0.0;
        double cross = 0.0;
        for (std::size_t r = 0; r < 8; ++r) {
            norm += params.weight(0, r, c) * params.weight(0, r, c);
            cross += params.weight(0, r, c) * params.weight(0, r, (c + 1) % 6);
        }
        CHECK(norm == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(std::fabs(cross) < 1e-9);
    }
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(params.bias(2, i) == 0.0);
        for (std::size_t j = 0; j < 8; ++j) CHECK(params.weight(2, i, j) == 0.0);
    }
    // Two seeds differ.
    const auto other = policy::init_params(shape, 124);
    CHECK(params.value != other.value);
}

TEST_CASE("sample_group: seeded reproducibility and squash bounds") {
    auto params = policy::init_params(small_shape(3, {4}, 2), 5);
    randomize(params, 6);
    const std::vector<double> obs = {0.5, -0.25, 1.5};

    std::mt19937_64 rng_a(77);
    std::mt19937_64 rng_b(77);
    const auto group_a = policy::sample_group(params, obs, 5, rng_a);
    const auto group_b = policy::sample_group(params, obs, 5, rng_b);
    CHECK(group_a == group_b);

    std::mt19937_64 rng(78);
    std::size_t draws = 0;
    for (int rep = 0; rep < 200; ++rep) {
        for (const auto& action : policy::sample_group(params, obs, 500, rng)) {
            for (double a : action) {
                CHECK(a >= -1.0);
                CHECK(a <= 1.0);
            }
            ++draws;
        }
    }
    CHECK(draws == 100000);
}

TEST_CASE("sample_group: vanishing std collapses onto tanh(mean)") {
    // Constant-mean policy (all weights zero) so the limit point is exact.
    auto params = policy::init_params(small_shape(2, {4}, 2), 15);
    std::fill(params.value.begin(), params.value.end(), 0.0);
    params.bias(1, 0) = 1.5;
    params.bias(1, 1) = -1.5;
    for (double& v : params.log_std()) v = -5.0;
    const std::vector<double> obs = {1.0, -0.5};
    const auto head = policy::forward(params, obs);
    std::mt19937_64 rng(17);
    const auto group = policy::sample_group(params, obs, 16, rng);
    double max_dist = 0.0;
    for (const auto& action : group) {
        for (std::size_t k = 0; k < action.size(); ++k)
            max_dist = std::max(max_dist, std::fabs(action[k] - std::tanh(head.mean[k])));
    }
    for (std::size_t i = 0; i < group.size(); ++i) {
        for (std::size_t j = i + 1; j < group.size(); ++j) {
            for (std::size_t k = 0; k < group[i].size(); ++k)
                max_dist = std::max(max_dist, std::fabs(group[i][k] - group[j][k]));
        }
    }
    CHECK(max_dist < 1e-2);
}

TEST_CASE("log_prob: matches the scalar 1-D oracle and factorizes over components") {
    auto params = policy::init_params(small_shape(3, {5}, 2), 25);
    randomize(params, 26);
    const std::vector<double> obs = {0.2, 0.9, -1.2};
    const auto head = policy::forward(params, obs);

    SUBCASE("peak action") {
        const env::ActionVector action = {std::tanh(head.mean[0]), std::tanh(head.mean[1])};
        const double expected = scalar_log_density(action[0], head.mean[0], head.std[0]) +
                                scalar_log_density(action[1], head.mean[1], head.std[1]);
        CHECK(policy::log_prob(params, obs, action) == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("generic action factorizes") {
        const env::ActionVector action = {0.31, -0.77};
        const double expected = scalar_log_density(action[0], head.mean[0], head.std[0]) +
                                scalar_log_density(action[1], head.mean[1], head.std[1]);
        CHECK(policy::log_prob(params, obs, action) == doctest::Approx(expected).epsilon(1e-12));
        CHECK(policy::log_prob(params, obs, action) == policy::log_prob(params, obs, action));
    }
    SUBCASE("boundary actions are rejected") {
        CHECK_THROWS_AS(policy::log_prob(params, obs, {1.0, 0.0}), ActionOnBoundary);
        CHECK_THROWS_AS(policy::log_prob(params, obs, {0.0, -1.0}), ActionOnBoundary);
        CHECK_THROWS_AS(policy::log_prob(params, obs, {1.2, 0.0}), ActionOnBoundary);
    }
}

TEST_CASE("grad_log_prob: full finite-difference sweep on a toy net") {
    auto params = policy::init_params(small_shape(3, {4}, 2), 35);
    randomize(params, 36);
    for (double& v : params.log_std()) v = -0.3;  // keep well inside the clamp
    const std::vector<double> obs = {0.7, -0.3, 0.15};
    const env::ActionVector action = {0.42, -0.58};

    const auto grad = policy::grad_log_prob(params, obs, action);
    REQUIRE(grad.size() == params.value.size());
    const double h = 1e-6;
    for (std::size_t i = 0; i < params.value.size(); ++i) {
        auto plus = params;
        auto minus = params;
        plus.value[i] += h;
        minus.value[i] -= h;
        const double fd =
            (policy::log_prob(plus, obs, action) - policy::log_prob(minus, obs, action)) /
            (2.0 * h);
        CHECK(std::fabs(grad[i] - fd) / (std::fabs(grad[i]) + 1e-8) < 1e-4);
    }
}

TEST_CASE("grad_log_prob: zero output layer kills hidden-layer gradients") {
    const auto shape = small_shape(3, {4, 4}, 2);
    auto params = policy::init_params(shape, 45);  // output layer zeroed by init
    const std::vector<double> obs = {0.4, 0.1, -0.9};
    const auto grad = policy::grad_log_prob(params, obs, {0.2, 0.3});
    // Dead path: nothing flows back past the zero output weights.
    for (std::size_t l = 0; l < 2; ++l) {
        const auto dims = shape.dims();
        for (std::size_t i = 0; i < dims[l + 1]; ++i) {
            CHECK(grad[shape.bias_offset(l) + i] == 0.0);
            for (std::size_t j = 0; j < dims[l]; ++j)
                CHECK(grad[shape.weight_offset(l) + i * dims[l] + j] == 0.0);
        }
    }
    // The output layer itself still learns.
    double norm = 0.0;
    for (std::size_t i = shape.weight_offset(2); i < shape.log_std_offset(); ++i)
        norm += std::fabs(grad[i]);
    CHECK(norm > 0.0);
}

TEST_CASE("grad_log_prob: 1-D constant-mean bias matches the Gaussian score") {
    // All weights zero: mean == output bias b, a pure 1-D Gaussian head.
    auto params = policy::init_params(small_shape(1, {2}, 1), 55);
    std::fill(params.value.begin(), params.value.end(), 0.0);
    const double b = 0.3;
    const double log_sd = -0.2;
    params.bias(1, 0) = b;  // output layer of the 1-hidden-layer net
    params.log_std()[0] = log_sd;

    const std::vector<double> obs = {0.77};
    const double a = 0.5;
    const auto grad = policy::grad_log_prob(params, obs, {a});
    const double z = 0.5 * (std::log1p(a) - std::log1p(-a));
    const double sd = std::exp(log_sd);
    const double d_mean = (z - b) / (sd * sd);
    const double d_log_sd = (z - b) * (z - b) / (sd * sd) - 1.0;
    CHECK(grad[params.shape.bias_offset(1)] == doctest::Approx(d_mean).epsilon(1e-12));
    CHECK(grad[params.shape.log_std_offset()] == doctest::Approx(d_log_sd).epsilon(1e-12));
}

TEST_CASE("sampling/density consistency: empirical means match quadrature within 3 SE") {
    auto params = policy::init_params(small_shape(2, {4}, 1), 65);
    randomize(params, 66);
    params.log_std()[0] = -0.1;
    const std::vector<double> obs = {0.6, -0.2};

    constexpr std::size_t kSamples = 1000000;
    std::mt19937_64 rng(67);
    std::vector<double> mean_emp(3, 0.0);
    std::vector<double> m2_emp(3, 0.0);
    std::size_t count = 0;
    auto f = [](int which, double a) {
        switch (which) {
            case 0: return a;
            case 1: return a * a;
            default: return std::sin(3.0 * a);
        }
    };
    for (std::size_t chunk = 0; chunk < 100; ++chunk) {
        for (const auto& action : policy::sample_group(params, obs, kSamples / 100, rng)) {
            ++count;
            for (int w = 0; w < 3; ++w) {
                const double v = f(w, action[0]);
                const double delta = v - mean_emp[w];
                mean_emp[w] += delta / static_cast<double>(count);
                m2_emp[w] += delta * (v - mean_emp[w]);
            }
        }
    }
    REQUIRE(count == kSamples);

    // Trapezoid quadrature of f against exp(log_prob) over the open interval.
    constexpr std::size_t kGrid = 400001;
    const double lo = -1.0 + 1e-9;
    const double hi = 1.0 - 1e-9;
    const double h = (hi - lo) / static_cast<double>(kGrid - 1);
    std::vector<double> quad(3, 0.0);
    double mass = 0.0;
    for (std::size_t i = 0; i < kGrid; ++i) {
        const double a = lo + h * static_cast<double>(i);
        const double w = (i == 0 || i == kGrid - 1) ? 0.5 : 1.0;
        const double density = std::exp(policy::log_prob(params, obs, {a}));
        mass += w * density;
        for (int which = 0; which < 3; ++which) quad[which] += w * density * f(which, a);
    }
    mass *= h;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));  // density integrates to one
    for (int w = 0; w < 3; ++w) {
        const double expected = quad[w] * h;
        const double se = std::sqrt(m2_emp[w] / static_cast<double>(count)) /
                          std::sqrt(static_cast<double>(count));
        CHECK(std::fabs(mean_emp[w] - expected) < 3.0 * se);
    }
}

TEST_CASE("outputs stay finite for large observations") {
    auto params = policy::init_params(small_shape(4, {16, 16}, 3), 75);
    randomize(params, 76, 2.0);
    const std::vector<double> obs = {1e3, -1e3, 999.0, -0.1};
    const auto head = policy::forward(params, obs);
    for (double m : head.mean) CHECK(std::isfinite(m));
    for (double s : head.std) CHECK(std::isfinite(s));
    const double lp = policy::log_prob(params, obs, {0.9, -0.9, 0.0});
    CHECK(std::isfinite(lp));
    for (double g : policy::grad_log_prob(params, obs, {0.9, -0.9, 0.0}))
        CHECK(std::isfinite(g));
}

TEST_CASE("normalizer: identity before data, standardizes after, clips at 10 sigma") {
    policy::ObsNormalizer norm(2);
    const std::vector<double> raw = {5.0, -3.0};
    CHECK(norm.normalize(raw) == raw);  // no samples yet

    std::mt19937_64 rng(85);
    std::normal_distribution<double> g(10.0, 2.0);
    for (int i = 0; i < 5000; ++i) norm.update(std::vector<double>{g(rng), g(rng) * 3.0});
    const auto z = norm.normalize(std::vector<double>{10.0, 30.0});
    CHECK(std::fabs(z[0]) < 0.1);
    CHECK(std::fabs(z[1]) < 0.1);
    const auto clipped = norm.normalize(std::vector<double>{1e9, -1e9});
    CHECK(clipped[0] == 10.0);
    CHECK(clipped[1] == -10.0);
}

TEST_CASE("checkpoint: round trip is bit-exact, corrupt files error") {
    testsupport::TempDir dir("ckpt");
    policy::Policy original;
    original.params = policy::init_params(small_shape(7, {16, 8}, 3), 95);
    randomize(original.params, 96, 1.3);
    original.normalizer = policy::ObsNormalizer(7);
    std::mt19937_64 rng(97);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    for (int i = 0; i < 137; ++i) {
        std::vector<double> obs(7);
        for (double& v : obs) v = u(rng);
        original.normalizer.update(obs);
    }

    const auto path = dir.file("policy.ckpt").string();
    policy::save_checkpoint(original, path);
    const auto loaded = policy::load_checkpoint(path);
    CHECK(loaded.params.shape == original.params.shape);
    CHECK(loaded.params.value == original.params.value);  // exact doubles
    CHECK(loaded.normalizer == original.normalizer);

    // Saving the loaded policy again produces identical bytes.
    const auto path2 = dir.file("policy2.ckpt").string();
    policy::save_checkpoint(loaded, path2);
    CHECK(testsupport::read_file(path) == testsupport::read_file(path2));

    testsupport::write_file(dir.file("bad.ckpt"), "definitely not a checkpoint");
    CHECK_THROWS_AS(policy::load_checkpoint(dir.file("bad.ckpt").string()), CheckpointError);
    CHECK_THROWS_AS(policy::load_checkpoint(dir.file("missing.ckpt").string()), CheckpointError);
}
