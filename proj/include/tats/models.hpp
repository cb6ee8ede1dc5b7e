#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tats/matrix.hpp"
#include "tats/nn.hpp"

namespace tats::models {

enum class ModelKind { Linear, DLinear, Mlp };

ModelKind parse_model_kind(const std::string& name);
std::string to_string(ModelKind kind);

struct ModelConfig {
    std::size_t seq_len = 24;
    std::size_t pred_len = 12;
    std::size_t channels = 1;
    /// false: one temporal head shared by every channel (channels never interact).
    bool channel_mixing = true;
    std::size_t dlinear_kernel = 25;  ///< clamped to the largest odd value <= seq_len
    std::size_t hidden = 256;         ///< MLP backbones
    double dropout = 0.1;             ///< MLP backbones
};

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Maps an L x C window to an H x C forecast.
class ForecastModel {
public:
    virtual ~ForecastModel() = default;

    virtual void init(Rng& rng) = 0;
    virtual Matrix forward(const Matrix& x, nn::Mode mode, Rng* dropout_rng) = 0;
    /// Gradient w.r.t. the last forward input; parameter gradients accumulate.
    virtual Matrix backward(const Matrix& grad_out) = 0;
    virtual std::vector<nn::ParamView> parameters() = 0;
    virtual ModelKind kind() const = 0;

    const ModelConfig& config() const noexcept { return cfg_; }
    std::size_t parameter_count() { return nn::count_parameters(parameters()); }

protected:
    explicit ForecastModel(ModelConfig cfg);
    void check_input(const Matrix& x) const;
    ModelConfig cfg_;
};

/// Maps (L x C values, L x C mask) to an L x C reconstruction.
class ImputeModel {
public:
    virtual ~ImputeModel() = default;

    virtual void init(Rng& rng) = 0;
    virtual Matrix forward(const Matrix& values, const Matrix& mask, nn::Mode mode, Rng* dropout_rng) = 0;
    /// Gradient w.r.t. the values input of the last forward call.
    virtual Matrix backward(const Matrix& grad_out) = 0;
    virtual std::vector<nn::ParamView> parameters() = 0;
    virtual ModelKind kind() const = 0;

    const ModelConfig& config() const noexcept { return cfg_; }
    std::size_t parameter_count() { return nn::count_parameters(parameters()); }

protected:
    explicit ImputeModel(ModelConfig cfg) : cfg_(cfg) {}
    ModelConfig cfg_;
};

/// Linear map over the time axis. With channel mixing every output channel
/// reads every input channel: y = W vec(x) + b.
class LinearForecaster final : public ForecastModel {
public:
    explicit LinearForecaster(ModelConfig cfg);

    void init(Rng& rng) override;
    Matrix forward(const Matrix& x, nn::Mode mode, Rng* dropout_rng) override;
    Matrix backward(const Matrix& grad_out) override;
    std::vector<nn::ParamView> parameters() override;
    ModelKind kind() const override { return ModelKind::Linear; }

    nn::Dense& head() noexcept { return head_; }

private:
    Matrix to_rows(const Matrix& x) const;
    Matrix from_rows(const Matrix& rows, std::size_t length) const;

    nn::Dense head_;
};

struct Decomposition {
    Matrix trend;
    Matrix remainder;
};

/// Largest odd kernel <= seq_len, never above the request.
std::size_t clamp_kernel(std::size_t requested, std::size_t seq_len);

/// Centered moving average with edge replication; remainder = x - trend.
Decomposition moving_average_decompose(const Matrix& x, std::size_t kernel);

/// Trend head + remainder head over a moving-average split.
class DLinearForecaster final : public ForecastModel {
public:
    explicit DLinearForecaster(ModelConfig cfg);

    void init(Rng& rng) override;
    Matrix forward(const Matrix& x, nn::Mode mode, Rng* dropout_rng) override;
    Matrix backward(const Matrix& grad_out) override;
    std::vector<nn::ParamView> parameters() override;
    ModelKind kind() const override { return ModelKind::DLinear; }

    std::size_t kernel() const noexcept { return kernel_; }
    LinearForecaster& trend_head() noexcept { return trend_; }
    LinearForecaster& remainder_head() noexcept { return remainder_; }

private:
    std::size_t kernel_;
    LinearForecaster trend_;
    LinearForecaster remainder_;
};

/// Flattened window -> hidden -> hidden -> H*C.
class MlpForecaster final : public ForecastModel {
public:
    explicit MlpForecaster(ModelConfig cfg);

    void init(Rng& rng) override;
    Matrix forward(const Matrix& x, nn::Mode mode, Rng* dropout_rng) override;
    Matrix backward(const Matrix& grad_out) override;
    std::vector<nn::ParamView> parameters() override;
    ModelKind kind() const override { return ModelKind::Mlp; }

    nn::Mlp& net() noexcept { return net_; }

private:
    nn::Mlp net_;
};

/// Flattened [values | mask] -> hidden -> hidden -> L*C.
class MlpImputer final : public ImputeModel {
public:
    explicit MlpImputer(ModelConfig cfg);

    void init(Rng& rng) override;
    Matrix forward(const Matrix& values, const Matrix& mask, nn::Mode mode, Rng* dropout_rng) override;
    Matrix backward(const Matrix& grad_out) override;
    std::vector<nn::ParamView> parameters() override;
    ModelKind kind() const override { return ModelKind::Mlp; }

    nn::Mlp& net() noexcept { return net_; }

private:
    nn::Mlp net_;
};

/// Single dense map from flattened [values | mask] to the reconstruction.
class LinearImputer final : public ImputeModel {
public:
    explicit LinearImputer(ModelConfig cfg);

    void init(Rng& rng) override;
    Matrix forward(const Matrix& values, const Matrix& mask, nn::Mode mode, Rng* dropout_rng) override;
    Matrix backward(const Matrix& grad_out) override;
    std::vector<nn::ParamView> parameters() override;
    ModelKind kind() const override { return ModelKind::Linear; }

private:
    nn::Dense head_;
};

std::unique_ptr<ForecastModel> make_forecast_model(ModelKind kind, const ModelConfig& cfg);
std::unique_ptr<ImputeModel> make_impute_model(ModelKind kind, const ModelConfig& cfg);

}  // namespace tats::models
