#include "finrl_dapo/policy_net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace finrl_dapo::policy {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727417803297364056176;  // log(2*pi)/2

double atanh_stable(double x) { return 0.5 * (std::log1p(x) - std::log1p(-x)); }

double clamp_log_std_value(double v) {
    return std::clamp(v, PolicyParams::kLogStdMin, PolicyParams::kLogStdMax);
}

/// Forward pass keeping every layer's activation for the backward pass.
/// activations[0] is the input; activations[l] for l >= 1 is the (tanh'd)
/// output of layer l-1, except the last entry which is the raw mean.
std::vector<std::vector<double>> forward_cached(const PolicyParams& params,
                                                std::span<const double> obs) {
    const auto dims = params.shape.dims();
    if (obs.size() != dims.front())
        throw DimensionMismatch("observation has " + std::to_string(obs.size()) +
                                " features, network expects " + std::to_string(dims.front()));
    std::vector<std::vector<double>> activations(dims.size());
    activations[0].assign(obs.begin(), obs.end());
    const std::size_t layers = params.shape.num_layers();
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t rows = dims[l + 1];
        const std::size_t cols = dims[l];
        std::vector<double>& out = activations[l + 1];
        out.resize(rows);
        const bool last = (l + 1 == layers);
        for (std::size_t i = 0; i < rows; ++i) {
            double z = params.bias(l, i);
            for (std::size_t j = 0; j < cols; ++j) z += params.weight(l, i, j) * activations[l][j];
            out[i] = last ? z : std::tanh(z);
        }
    }
    return activations;
}

/// Log-density pieces shared by log_prob and its gradient. Returns the value
/// and fills d/d mean and d/d log_std when requested.
double gaussian_tanh_log_density(const PolicyParams& params, std::span<const double> mean,
                                 const env::ActionVector& action, std::vector<double>* d_mean,
                                 std::vector<double>* d_log_std) {
    const std::size_t out = mean.size();
    if (action.size() != out)
        throw DimensionMismatch("action has " + std::to_string(action.size()) +
                                " components, policy outputs " + std::to_string(out));
    const auto log_std = params.log_std();
    if (d_mean != nullptr) d_mean->assign(out, 0.0);
    if (d_log_std != nullptr) d_log_std->assign(out, 0.0);

    double logp = 0.0;
    for (std::size_t k = 0; k < out; ++k) {
        const double a = action[k];
        if (!(std::fabs(a) < 1.0)) throw ActionOnBoundary();
        const double ls = clamp_log_std_value(log_std[k]);
        const double sd = std::exp(ls);
        const double z = atanh_stable(a);
        const double u = (z - mean[k]) / sd;
        logp += -0.5 * u * u - ls - kHalfLog2Pi - std::log1p(-a * a);
        if (d_mean != nullptr) (*d_mean)[k] = u / sd;
        if (d_log_std != nullptr) {
            // Gradient of the clamp is taken as 1 on [min, max], 0 outside.
            const bool active =
                log_std[k] >= PolicyParams::kLogStdMin && log_std[k] <= PolicyParams::kLogStdMax;
            (*d_log_std)[k] = active ? (u * u - 1.0) : 0.0;
        }
    }
    return logp;
}

/// Backpropagate d(logp)/d(mean) through the MLP into the flat gradient.
void backprop_mean(const PolicyParams& params,
                   const std::vector<std::vector<double>>& activations,
                   std::vector<double> delta, Gradient& grad) {
    const auto dims = params.shape.dims();
    const std::size_t layers = params.shape.num_layers();
    for (std::size_t l = layers; l-- > 0;) {
        const std::size_t rows = dims[l + 1];
        const std::size_t cols = dims[l];
        const std::size_t w_off = params.shape.weight_offset(l);
        const std::size_t b_off = params.shape.bias_offset(l);
        for (std::size_t i = 0; i < rows; ++i) {
            grad[b_off + i] += delta[i];
            const double di = delta[i];
            for (std::size_t j = 0; j < cols; ++j)
                grad[w_off + i * cols + j] += di * activations[l][j];
        }
        if (l == 0) break;
        std::vector<double> prev(cols, 0.0);
        for (std::size_t i = 0; i < rows; ++i) {
            const double di = delta[i];
            for (std::size_t j = 0; j < cols; ++j) prev[j] += params.weight(l, i, j) * di;
        }
        // activations[l] is tanh output of layer l-1.
        for (std::size_t j = 0; j < cols; ++j)
            prev[j] *= (1.0 - activations[l][j] * activations[l][j]);
        delta = std::move(prev);
    }
}

/// Orthonormal rows/columns from a QR-style Gram-Schmidt of a Gaussian draw.
std::vector<double> orthogonal_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                                      double gain) {
    const std::size_t n = std::max(rows, cols);
    const std::size_t m = std::min(rows, cols);
    std::normal_distribution<double> normal(0.0, 1.0);
    // n x m column-major sample; orthonormalize the m columns.
    std::vector<double> a(n * m);
    for (double& v : a) v = normal(rng);
    for (std::size_t c = 0; c < m; ++c) {
        for (std::size_t p = 0; p < c; ++p) {
            double dot = 0.0;
            for (std::size_t r = 0; r < n; ++r) dot += a[r * m + c] * a[r * m + p];
            for (std::size_t r = 0; r < n; ++r) a[r * m + c] -= dot * a[r * m + p];
        }
        double norm = 0.0;
        for (std::size_t r = 0; r < n; ++r) norm += a[r * m + c] * a[r * m + c];
        norm = std::sqrt(norm);
        if (norm < 1e-12) {
            for (std::size_t r = 0; r < n; ++r) a[r * m + c] = (r == c) ? 1.0 : 0.0;
            norm = 1.0;
        }
        for (std::size_t r = 0; r < n; ++r) a[r * m + c] /= norm;
    }
    std::vector<double> w(rows * cols);
    if (rows >= cols) {
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) w[i * cols + j] = gain * a[i * m + j];
    } else {
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) w[i * cols + j] = gain * a[j * m + i];
    }
    return w;
}

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw CheckpointError("truncated file");
    return v;
}

}  // namespace

std::vector<std::size_t> PolicyShape::dims() const {
    std::vector<std::size_t> d;
    d.reserve(hidden.size() + 2);
    d.push_back(input_dim);
    d.insert(d.end(), hidden.begin(), hidden.end());
    d.push_back(output_dim);
    return d;
}

std::size_t PolicyShape::param_count() const {
    const auto d = dims();
    std::size_t count = 0;
    for (std::size_t l = 0; l + 1 < d.size(); ++l) count += d[l + 1] * d[l] + d[l + 1];
    return count + output_dim;
}

std::size_t PolicyShape::weight_offset(std::size_t layer) const {
    const auto d = dims();
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l) off += d[l + 1] * d[l] + d[l + 1];
    return off;
}

std::size_t PolicyShape::bias_offset(std::size_t layer) const {
    const auto d = dims();
    return weight_offset(layer) + d[layer + 1] * d[layer];
}

std::size_t PolicyShape::log_std_offset() const { return param_count() - output_dim; }

double PolicyParams::weight(std::size_t layer, std::size_t row, std::size_t col) const {
    return value[shape.weight_offset(layer) + row * shape.dims()[layer] + col];
}
double& PolicyParams::weight(std::size_t layer, std::size_t row, std::size_t col) {
    return value[shape.weight_offset(layer) + row * shape.dims()[layer] + col];
}
double PolicyParams::bias(std::size_t layer, std::size_t row) const {
    return value[shape.bias_offset(layer) + row];
}
double& PolicyParams::bias(std::size_t layer, std::size_t row) {
    return value[shape.bias_offset(layer) + row];
}
std::span<const double> PolicyParams::log_std() const {
    return {value.data() + shape.log_std_offset(), shape.output_dim};
}
std::span<double> PolicyParams::log_std() {
    return {value.data() + shape.log_std_offset(), shape.output_dim};
}

void PolicyParams::clamp_log_std() {
    for (double& v : log_std()) v = clamp_log_std_value(v);
}

PolicyParams init_params(const PolicyShape& shape, std::uint64_t seed, double log_std_init) {
    if (shape.input_dim == 0 || shape.output_dim == 0)
        throw InvalidConfig("policy needs non-zero input and output dims");
    PolicyParams params;
    params.shape = shape;
    params.value.assign(shape.param_count(), 0.0);
    std::mt19937_64 rng(seed);
    const auto dims = shape.dims();
    // Hidden layers get orthogonal-style init; the output layer stays zero so
    // the initial policy is a centered Gaussian regardless of features.
    for (std::size_t l = 0; l + 1 < shape.num_layers(); ++l) {
        const auto w = orthogonal_matrix(dims[l + 1], dims[l], rng, 1.0);
        std::copy(w.begin(), w.end(), params.value.begin() + shape.weight_offset(l));
    }
    std::fill(params.log_std().begin(), params.log_std().end(),
              clamp_log_std_value(log_std_init));
    return params;
}

GaussianHead forward(const PolicyParams& params, std::span<const double> obs) {
    const auto activations = forward_cached(params, obs);
    GaussianHead head;
    head.mean = activations.back();
    head.std.resize(params.shape.output_dim);
    const auto log_std = params.log_std();
    for (std::size_t k = 0; k < head.std.size(); ++k)
        head.std[k] = std::exp(clamp_log_std_value(log_std[k]));
    return head;
}

std::vector<env::ActionVector> sample_group(const PolicyParams& params,
                                            std::span<const double> obs, std::size_t n,
                                            std::mt19937_64& rng) {
    if (n == 0) throw InvalidConfig("sample_group needs n >= 1");
    const GaussianHead head = forward(params, obs);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<env::ActionVector> actions(n);
    for (std::size_t i = 0; i < n; ++i) {
        env::ActionVector a(head.mean.size());
        for (std::size_t k = 0; k < a.size(); ++k)
            a[k] = std::tanh(head.mean[k] + head.std[k] * normal(rng));
        actions[i] = std::move(a);
    }
    return actions;
}

double log_prob(const PolicyParams& params, std::span<const double> obs,
                const env::ActionVector& action) {
    const auto activations = forward_cached(params, obs);
    return gaussian_tanh_log_density(params, activations.back(), action, nullptr, nullptr);
}

double log_prob_with_grad(const PolicyParams& params, std::span<const double> obs,
                          const env::ActionVector& action, Gradient& grad) {
    grad.assign(params.value.size(), 0.0);
    const auto activations = forward_cached(params, obs);
    std::vector<double> d_mean;
    std::vector<double> d_log_std;
    const double logp =
        gaussian_tanh_log_density(params, activations.back(), action, &d_mean, &d_log_std);
    backprop_mean(params, activations, std::move(d_mean), grad);
    const std::size_t ls_off = params.shape.log_std_offset();
    for (std::size_t k = 0; k < d_log_std.size(); ++k) grad[ls_off + k] += d_log_std[k];
    return logp;
}

Gradient grad_log_prob(const PolicyParams& params, std::span<const double> obs,
                       const env::ActionVector& action) {
    Gradient grad;
    log_prob_with_grad(params, obs, action, grad);
    return grad;
}

void ObsNormalizer::update(std::span<const double> obs) {
    if (mean_.empty()) {
        mean_.assign(obs.begin(), obs.end());
        std::fill(mean_.begin(), mean_.end(), 0.0);
        m2_.assign(obs.size(), 0.0);
    }
    if (obs.size() != mean_.size())
        throw DimensionMismatch("normalizer dim " + std::to_string(mean_.size()) +
                                " vs obs dim " + std::to_string(obs.size()));
    ++count_;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const double delta = obs[i] - mean_[i];
        mean_[i] += delta / static_cast<double>(count_);
        m2_[i] += delta * (obs[i] - mean_[i]);
    }
}

std::vector<double> ObsNormalizer::normalize(std::span<const double> obs) const {
    std::vector<double> out(obs.begin(), obs.end());
    if (count_ == 0) return out;
    if (obs.size() != mean_.size())
        throw DimensionMismatch("normalizer dim " + std::to_string(mean_.size()) +
                                " vs obs dim " + std::to_string(obs.size()));
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double var = m2_[i] / static_cast<double>(count_);
        out[i] = std::clamp((out[i] - mean_[i]) / std::sqrt(var + 1e-8), -10.0, 10.0);
    }
    return out;
}

ObsNormalizer ObsNormalizer::restore(std::uint64_t count, std::vector<double> mean,
                                     std::vector<double> m2) {
    ObsNormalizer n;
    n.count_ = count;
    n.mean_ = std::move(mean);
    n.m2_ = std::move(m2);
    if (n.mean_.size() != n.m2_.size()) throw CheckpointError("normalizer state size mismatch");
    return n;
}

void save_checkpoint(const Policy& policy, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot open for writing: " + path);
    out.write("FDAPOCKP", 8);
    write_pod<std::uint32_t>(out, 1);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(policy.params.shape.input_dim));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(policy.params.shape.hidden.size()));
    for (std::size_t h : policy.params.shape.hidden)
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(h));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(policy.params.shape.output_dim));
    write_pod<std::uint64_t>(out, policy.params.value.size());
    out.write(reinterpret_cast<const char*>(policy.params.value.data()),
              static_cast<std::streamsize>(policy.params.value.size() * sizeof(double)));
    write_pod<std::uint64_t>(out, policy.normalizer.count());
    const std::size_t dim = policy.params.shape.input_dim;
    std::vector<double> mean(dim, 0.0);
    std::vector<double> m2(dim, 0.0);
    if (policy.normalizer.dim() == dim) {
        std::copy(policy.normalizer.mean().begin(), policy.normalizer.mean().end(), mean.begin());
        std::copy(policy.normalizer.m2().begin(), policy.normalizer.m2().end(), m2.begin());
    } else if (policy.normalizer.count() != 0) {
        throw CheckpointError("normalizer dim does not match the network input");
    }
    out.write(reinterpret_cast<const char*>(mean.data()),
              static_cast<std::streamsize>(dim * sizeof(double)));
    out.write(reinterpret_cast<const char*>(m2.data()),
              static_cast<std::streamsize>(dim * sizeof(double)));
    if (!out) throw CheckpointError("write failed: " + path);
}

Policy load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "FDAPOCKP", 8) != 0)
        throw CheckpointError("bad magic in " + path);
    const auto version = read_pod<std::uint32_t>(in);
    if (version != 1) throw CheckpointError("unsupported version " + std::to_string(version));

    Policy policy;
    policy.params.shape.input_dim = read_pod<std::uint32_t>(in);
    const auto n_hidden = read_pod<std::uint32_t>(in);
    policy.params.shape.hidden.resize(n_hidden);
    for (auto& h : policy.params.shape.hidden) h = read_pod<std::uint32_t>(in);
    policy.params.shape.output_dim = read_pod<std::uint32_t>(in);
    const auto count = read_pod<std::uint64_t>(in);
    if (count != policy.params.shape.param_count())
        throw CheckpointError("parameter count does not match the declared shape");
    policy.params.value.resize(count);
    in.read(reinterpret_cast<char*>(policy.params.value.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw CheckpointError("truncated parameter block");

    const auto norm_count = read_pod<std::uint64_t>(in);
    const std::size_t dim = policy.params.shape.input_dim;
    std::vector<double> mean(dim);
    std::vector<double> m2(dim);
    in.read(reinterpret_cast<char*>(mean.data()), static_cast<std::streamsize>(dim * sizeof(double)));
    in.read(reinterpret_cast<char*>(m2.data()), static_cast<std::streamsize>(dim * sizeof(double)));
    if (!in) throw CheckpointError("truncated normalizer block");
    policy.normalizer = ObsNormalizer::restore(norm_count, std::move(mean), std::move(m2));
    return policy;
}

}  // namespace finrl_dapo::policy
