#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "tats/matrix.hpp"
#include "tats/random.hpp"

namespace tats::nn {

/// A trainable tensor exposed as flat value/gradient views.
struct ParamView {
    std::string name;
    std::span<double> value;
    std::span<double> grad;
};

enum class Mode { Train, Eval };

/// y = x W^T + b over a batch of rows.
class Dense {
public:
    Dense(std::size_t in, std::size_t out);

    /// uniform(-1/sqrt(in), 1/sqrt(in)) for weights and bias
    void init_uniform(Rng& rng);

    Matrix forward(const Matrix& x);
    /// Accumulates parameter gradients and returns d(loss)/dx.
    Matrix backward(const Matrix& upstream);

    std::size_t in_features() const noexcept { return weight_.cols(); }
    std::size_t out_features() const noexcept { return weight_.rows(); }
    std::size_t parameter_count() const noexcept { return weight_.size() + bias_.size(); }

    Matrix& weight() noexcept { return weight_; }
    std::vector<double>& bias() noexcept { return bias_; }
    const Matrix& weight_grad() const noexcept { return weight_grad_; }
    const std::vector<double>& bias_grad() const noexcept { return bias_grad_; }

    void collect(std::vector<ParamView>& out, const std::string& prefix);

private:
    Matrix weight_;
    std::vector<double> bias_;
    Matrix weight_grad_;
    std::vector<double> bias_grad_;
    Matrix input_;
};

/// Dense stack with ReLU and inverted dropout between layers (none after the last).
class Mlp {
public:
    Mlp(std::vector<std::size_t> widths, double dropout);

    void init_uniform(Rng& rng);

    /// Dropout masks are drawn from `dropout_rng` in Train mode; it may be null in Eval mode.
    Matrix forward(const Matrix& x, Mode mode, Rng* dropout_rng);
    Matrix backward(const Matrix& upstream);

    std::size_t in_features() const noexcept { return layers_.front().in_features(); }
    std::size_t out_features() const noexcept { return layers_.back().out_features(); }
    std::size_t parameter_count() const noexcept;
    std::vector<Dense>& layers() noexcept { return layers_; }
    double dropout() const noexcept { return dropout_; }

    void collect(std::vector<ParamView>& out, const std::string& prefix);

private:
    std::vector<Dense> layers_;
    double dropout_;
    std::vector<Matrix> pre_activation_;
    std::vector<Matrix> keep_scale_;  // per hidden layer: 0 or 1/(1-p), or empty in Eval
};

struct LossResult {
    double loss = 0.0;
    Matrix grad;  ///< d(loss)/d(pred)
};

/// mean((pred - target)^2) and its gradient 2(pred - target)/n.
LossResult mse_loss(const Matrix& pred, const Matrix& target);

/// Mean squared error over cells where weight == 1; zero loss and gradient if none.
LossResult masked_mse_loss(const Matrix& pred, const Matrix& target, const Matrix& weight);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam over a fixed parameter set.
class Adam {
public:
    Adam(std::vector<ParamView> params, AdamConfig cfg);

    void step();
    void zero_grad();
    /// Multiplies every gradient by `factor` (batch averaging).
    void scale_grad(double factor);

    std::uint64_t steps() const noexcept { return steps_; }
    const AdamConfig& config() const noexcept { return cfg_; }
    const std::vector<std::vector<double>>& first_moment() const noexcept { return m_; }
    const std::vector<std::vector<double>>& second_moment() const noexcept { return v_; }

private:
    std::vector<ParamView> params_;
    AdamConfig cfg_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::uint64_t steps_ = 0;
};

inline constexpr double kNormEps = 1e-5;

struct InstanceNormState {
    std::vector<double> mean;
    std::vector<double> stdev;  ///< already clamped to >= eps
};

/// Per-column (x - mean) / max(std, eps) with population std.
std::pair<Matrix, InstanceNormState> instance_normalize(const Matrix& x, double eps = kNormEps);

/// Statistics from observed cells only; missing cells come out as 0.
/// Throws AllMasked when a column has no observed cell.
std::pair<Matrix, InstanceNormState> instance_normalize_masked(const Matrix& x, const Matrix& mask,
                                                               double eps = kNormEps);

Matrix instance_denormalize(const Matrix& y, const InstanceNormState& state);

/// Copies of every parameter value, in collect() order.
std::vector<std::vector<double>> snapshot(const std::vector<ParamView>& params);
void restore(const std::vector<ParamView>& params, const std::vector<std::vector<double>>& values);
std::size_t count_parameters(const std::vector<ParamView>& params);

/// Checkpoint layout: "TATSCKPT" | u64 header length | JSON header | f64 payload (little-endian).
/// The header records each tensor's name and size alongside caller metadata.
void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& meta,
                     const std::vector<ParamView>& params);
std::vector<std::uint8_t> encode_checkpoint(const nlohmann::json& meta, const std::vector<ParamView>& params);

struct Checkpoint {
    nlohmann::json meta;
    std::vector<std::pair<std::string, std::vector<double>>> tensors;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);
/// Copies tensors into params; names and sizes must match exactly.
void apply_checkpoint(const Checkpoint& ck, const std::vector<ParamView>& params);

}  // namespace tats::nn
