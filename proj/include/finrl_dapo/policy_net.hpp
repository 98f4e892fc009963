#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "finrl_dapo/errors.hpp"
#include "finrl_dapo/trading_env.hpp"

namespace finrl_dapo::policy {

/// Architecture of the policy MLP: input -> tanh hidden layers -> per-ticker
/// Gaussian mean, plus a learnable per-ticker log standard deviation.
struct PolicyShape {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden = {64, 64};
    std::size_t output_dim = 0;

    /// Layer widths [input, hidden..., output].
    std::vector<std::size_t> dims() const;
    std::size_t num_layers() const { return hidden.size() + 1; }
    std::size_t param_count() const;

    std::size_t weight_offset(std::size_t layer) const;
    std::size_t bias_offset(std::size_t layer) const;
    std::size_t log_std_offset() const;

    bool operator==(const PolicyShape&) const = default;
};

/// All parameters in one flat buffer, laid out layer-major:
/// W0 (row-major), b0, W1, b1, ..., W_{L-1}, b_{L-1}, log_std.
struct PolicyParams {
    static constexpr double kLogStdMin = -5.0;
    static constexpr double kLogStdMax = 2.0;

    PolicyShape shape;
    std::vector<double> value;

    double weight(std::size_t layer, std::size_t row, std::size_t col) const;
    double& weight(std::size_t layer, std::size_t row, std::size_t col);
    double bias(std::size_t layer, std::size_t row) const;
    double& bias(std::size_t layer, std::size_t row);
    std::span<const double> log_std() const;
    std::span<double> log_std();

    /// Re-clamp log_std into [kLogStdMin, kLogStdMax].
    void clamp_log_std();
};

/// Gradient with respect to every parameter, same flat layout as
/// PolicyParams::value.
using Gradient = std::vector<double>;

struct GaussianHead {
    std::vector<double> mean;
    std::vector<double> std;
};

/// Orthogonal-style scaled random init for the hidden layers, zeros for the
/// output layer, log_std filled with log_std_init.
PolicyParams init_params(const PolicyShape& shape, std::uint64_t seed,
                         double log_std_init = -0.5);

/// Deterministic forward pass; std = exp(log_std clamped to its bounds).
/// Throws DimensionMismatch when obs length differs from input_dim.
GaussianHead forward(const PolicyParams& params, std::span<const double> obs);

/// Draw n actions, each sampled componentwise from Normal(mean, std) and
/// squashed through tanh. Reproducible given the generator state.
std::vector<env::ActionVector> sample_group(const PolicyParams& params,
                                            std::span<const double> obs, std::size_t n,
                                            std::mt19937_64& rng);

/// Log density of a squashed action under the policy, including the tanh
/// change-of-variables term. Throws ActionOnBoundary for |component| >= 1.
double log_prob(const PolicyParams& params, std::span<const double> obs,
                const env::ActionVector& action);

/// Exact reverse-mode gradient of log_prob with respect to every parameter.
Gradient grad_log_prob(const PolicyParams& params, std::span<const double> obs,
                       const env::ActionVector& action);

/// log_prob and its gradient in one backward pass.
double log_prob_with_grad(const PolicyParams& params, std::span<const double> obs,
                          const env::ActionVector& action, Gradient& grad);

/// Running mean/variance standardizer for observation features (Welford).
/// With no observed samples it is the identity. Normalized features are
/// clipped to [-10, 10].
class ObsNormalizer {
public:
    ObsNormalizer() = default;
    explicit ObsNormalizer(std::size_t dim) : mean_(dim, 0.0), m2_(dim, 0.0) {}

    void update(std::span<const double> obs);
    std::vector<double> normalize(std::span<const double> obs) const;

    std::size_t dim() const { return mean_.size(); }
    std::uint64_t count() const { return count_; }
    std::span<const double> mean() const { return mean_; }
    std::span<const double> m2() const { return m2_; }

    /// Restore state loaded from a checkpoint.
    static ObsNormalizer restore(std::uint64_t count, std::vector<double> mean,
                                 std::vector<double> m2);

    bool operator==(const ObsNormalizer&) const = default;

private:
    std::uint64_t count_ = 0;
    std::vector<double> mean_;
    std::vector<double> m2_;
};

/// The trainable policy: parameters plus the feature normalizer whose output
/// feeds the network.
struct Policy {
    PolicyParams params;
    ObsNormalizer normalizer;
};

// Checkpoint file layout (version 1, all integers and doubles little-endian):
//   bytes 0..7    magic "FDAPOCKP"
//   u32           version
//   u32           input_dim
//   u32           hidden layer count H
//   u32 x H       hidden sizes
//   u32           output_dim
//   u64           parameter count P
//   f64 x P       parameter values, flat layout (see PolicyParams)
//   u64           normalizer sample count
//   f64 x input   normalizer running mean
//   f64 x input   normalizer running M2
// Round-tripping through save/load is bit-exact.
void save_checkpoint(const Policy& policy, const std::string& path);
Policy load_checkpoint(const std::string& path);

}  // namespace finrl_dapo::policy
