#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "json.hpp"
#include "tats/core_data.hpp"
#include "tats/models.hpp"
#include "tats/nn.hpp"

namespace tats::framework {

/// max(4 * d_mapped, 32)
std::size_t default_projector_hidden(std::size_t d_mapped);

/// Three dense layers d_text -> hidden -> hidden -> d_mapped applied to every row.
class MlpProjector {
public:
    MlpProjector(std::size_t d_text, std::size_t d_mapped, std::size_t hidden, double dropout);

    void init(Rng& rng) { net_.init_uniform(rng); }
    /// L x d_text -> L x d_mapped. Dropout only in Train mode.
    Matrix project(const Matrix& embeddings, nn::Mode mode, Rng* dropout_rng);
    Matrix backward(const Matrix& grad_z) { return net_.backward(grad_z); }
    std::vector<nn::ParamView> parameters();

    std::size_t d_text() const noexcept { return net_.in_features(); }
    std::size_t d_mapped() const noexcept { return net_.out_features(); }
    std::size_t hidden() const noexcept { return hidden_; }
    std::size_t parameter_count() const noexcept { return net_.parameter_count(); }
    nn::Mlp& net() noexcept { return net_; }

private:
    std::size_t hidden_;
    nn::Mlp net_;
};

/// [x | Z], original channels first.
Matrix augment(const Matrix& x_norm, const Matrix& z);

struct TatsConfig {
    std::size_t n_vars = 1;
    std::size_t d_text = 1;
    std::size_t d_mapped = 12;  ///< 0 disables the text path entirely
    std::size_t projector_hidden = 0;  ///< 0 selects default_projector_hidden(d_mapped)
    double projector_dropout = 0.1;
    bool use_norm = true;
    models::ModelKind model = models::ModelKind::Linear;
    models::ModelConfig base;  ///< channels is overwritten with n_vars + d_mapped
};

nlohmann::json to_json(const TatsConfig& cfg);
TatsConfig tats_config_from_json(const nlohmann::json& j);

enum class LossSpace {
    Normalized,  ///< training objective: instance-normalized units
    Raw,         ///< after denormalization, in dataset units
};

struct RandomStreams {
    Rng* base_dropout = nullptr;
    Rng* projector_dropout = nullptr;
};

/// Base forecaster over N + d_mapped channels whose first N outputs are the forecast.
class AugmentedForecaster {
public:
    AugmentedForecaster(TatsConfig cfg, std::uint64_t seed);

    /// Eval-mode forecast in dataset units, H x N.
    Matrix forecast(const data::WindowSample& sample);

    /// Forward + backward on one window; parameter gradients accumulate.
    /// Returns the MSE over the N original variables in the requested space.
    double loss_and_backward(const data::WindowSample& sample, nn::Mode mode, RandomStreams streams,
                             LossSpace space = LossSpace::Normalized);

    /// Loss without touching gradients.
    double loss(const data::WindowSample& sample, nn::Mode mode, RandomStreams streams,
                LossSpace space = LossSpace::Normalized);

    std::vector<nn::ParamView> base_parameters() { return base_->parameters(); }
    std::vector<nn::ParamView> projector_parameters();
    std::vector<nn::ParamView> parameters();
    std::size_t base_parameter_count() { return base_->parameter_count(); }
    std::size_t projector_parameter_count() const { return projector_ ? projector_->parameter_count() : 0; }

    const TatsConfig& config() const noexcept { return cfg_; }
    models::ForecastModel& base() noexcept { return *base_; }
    MlpProjector* projector() noexcept { return projector_ ? &*projector_ : nullptr; }

    void save(const std::filesystem::path& path);
    static AugmentedForecaster load(const std::filesystem::path& path);

private:
    struct Forward {
        Matrix pred_norm;  // H x N
        nn::InstanceNormState norm;
    };
    Forward run_forward(const data::WindowSample& sample, nn::Mode mode, RandomStreams streams);

    TatsConfig cfg_;
    std::unique_ptr<models::ForecastModel> base_;
    std::optional<MlpProjector> projector_;
};

/// Imputer over [(X * M) | Z]; the reconstruction's first N columns are the series.
class AugmentedImputer {
public:
    AugmentedImputer(TatsConfig cfg, std::uint64_t seed);

    /// Eval-mode reconstruction of every cell, dataset units, L x N.
    Matrix impute(const data::ImputeSample& sample);

    /// MSE over the missing (mask == 0) cells; gradients accumulate.
    double loss_and_backward(const data::ImputeSample& sample, nn::Mode mode, RandomStreams streams,
                             LossSpace space = LossSpace::Normalized);
    double loss(const data::ImputeSample& sample, nn::Mode mode, RandomStreams streams,
                LossSpace space = LossSpace::Normalized);

    std::vector<nn::ParamView> base_parameters() { return base_->parameters(); }
    std::vector<nn::ParamView> projector_parameters();
    std::vector<nn::ParamView> parameters();
    std::size_t base_parameter_count() { return base_->parameter_count(); }
    std::size_t projector_parameter_count() const { return projector_ ? projector_->parameter_count() : 0; }

    const TatsConfig& config() const noexcept { return cfg_; }
    models::ImputeModel& base() noexcept { return *base_; }
    MlpProjector* projector() noexcept { return projector_ ? &*projector_ : nullptr; }

    void save(const std::filesystem::path& path);
    static AugmentedImputer load(const std::filesystem::path& path);

private:
    struct Forward {
        Matrix recon_norm;  // L x N
        Matrix target_norm;
        nn::InstanceNormState norm;
    };
    Forward run_forward(const data::ImputeSample& sample, nn::Mode mode, RandomStreams streams);

    TatsConfig cfg_;
    std::unique_ptr<models::ImputeModel> base_;
    std::optional<MlpProjector> projector_;
};

struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t patience = 20;
    double lr = 1e-4;   ///< base model
    double lr2 = 1e-2;  ///< projector
    std::size_t batch = 32;
    std::uint64_t seed = 1;
};

nlohmann::json to_json(const TrainConfig& cfg);

struct EpochRecord {
    double train_loss = 0.0;
    double val_loss = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;  ///< 1-based; 0 when no epoch ran
    double best_val_loss = 0.0;
};

nlohmann::json history_json(const TrainResult& r, bool include_timing);

/// Joint Adam training of base (lr) and projector (lr2) with early stopping on
/// validation loss; the best-validation parameters are restored on return.
TrainResult train_forecast(AugmentedForecaster& model, const std::vector<data::WindowSample>& train,
                           const std::vector<data::WindowSample>& val, const TrainConfig& cfg);

TrainResult train_impute(AugmentedImputer& model, const std::vector<data::ImputeSample>& train,
                         const std::vector<data::ImputeSample>& val, const TrainConfig& cfg);

}  // namespace tats::framework
