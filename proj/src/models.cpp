#include "tats/models.hpp"

#include <algorithm>
#include <string>

namespace tats::models {

ModelKind parse_model_kind(const std::string& name) {
    if (name == "linear") return ModelKind::Linear;
    if (name == "dlinear") return ModelKind::DLinear;
    if (name == "mlp") return ModelKind::Mlp;
    fail(ErrorCode::InvalidArgument, "unknown model kind '" + name + "' (expected linear, dlinear or mlp)");
}

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::Linear: return "linear";
        case ModelKind::DLinear: return "dlinear";
        case ModelKind::Mlp: return "mlp";
    }
    return "unknown";
}

nlohmann::json to_json(const ModelConfig& cfg) {
    return {{"seq_len", cfg.seq_len},         {"pred_len", cfg.pred_len}, {"channels", cfg.channels},
            {"channel_mixing", cfg.channel_mixing}, {"dlinear_kernel", cfg.dlinear_kernel},
            {"hidden", cfg.hidden},           {"dropout", cfg.dropout}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.seq_len = j.at("seq_len").get<std::size_t>();
    cfg.pred_len = j.at("pred_len").get<std::size_t>();
    cfg.channels = j.at("channels").get<std::size_t>();
    cfg.channel_mixing = j.at("channel_mixing").get<bool>();
    cfg.dlinear_kernel = j.at("dlinear_kernel").get<std::size_t>();
    cfg.hidden = j.at("hidden").get<std::size_t>();
    cfg.dropout = j.at("dropout").get<double>();
    return cfg;
}

ForecastModel::ForecastModel(ModelConfig cfg) : cfg_(cfg) {
    require(cfg_.seq_len >= 1 && cfg_.pred_len >= 1 && cfg_.channels >= 1, ErrorCode::InvalidArgument,
            "model needs seq_len, pred_len and channels >= 1");
}

void ForecastModel::check_input(const Matrix& x) const {
    if (x.rows() != cfg_.seq_len || x.cols() != cfg_.channels)
        fail(ErrorCode::ShapeMismatch, "model expects " + std::to_string(cfg_.seq_len) + "x" +
                                           std::to_string(cfg_.channels) + " input, got " +
                                           std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
}

namespace {

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
    return t;
}

Matrix flatten(const Matrix& m) { return Matrix(1, m.size(), std::vector<double>(m.data().begin(), m.data().end())); }

Matrix unflatten(const Matrix& row, std::size_t rows, std::size_t cols) {
    return Matrix(rows, cols, std::vector<double>(row.data().begin(), row.data().end()));
}

}  // namespace

LinearForecaster::LinearForecaster(ModelConfig cfg)
    : ForecastModel(cfg),
      head_(cfg.channel_mixing ? cfg.seq_len * cfg.channels : cfg.seq_len,
            cfg.channel_mixing ? cfg.pred_len * cfg.channels : cfg.pred_len) {}

void LinearForecaster::init(Rng& rng) { head_.init_uniform(rng); }

Matrix LinearForecaster::to_rows(const Matrix& x) const { return cfg_.channel_mixing ? flatten(x) : transpose(x); }

Matrix LinearForecaster::from_rows(const Matrix& rows, std::size_t length) const {
    return cfg_.channel_mixing ? unflatten(rows, length, cfg_.channels) : transpose(rows);
}

Matrix LinearForecaster::forward(const Matrix& x, nn::Mode, Rng*) {
    check_input(x);
    return from_rows(head_.forward(to_rows(x)), cfg_.pred_len);
}

Matrix LinearForecaster::backward(const Matrix& grad_out) {
    require(grad_out.rows() == cfg_.pred_len && grad_out.cols() == cfg_.channels, ErrorCode::ShapeMismatch,
            "linear backward gradient shape");
    return from_rows(head_.backward(to_rows(grad_out)), cfg_.seq_len);
}

std::vector<nn::ParamView> LinearForecaster::parameters() {
    std::vector<nn::ParamView> out;
    head_.collect(out, "linear");
    return out;
}

std::size_t clamp_kernel(std::size_t requested, std::size_t seq_len) {
    std::size_t k = std::min(requested, seq_len);
    if (k % 2 == 0) --k;
    return std::max<std::size_t>(k, 1);
}

Decomposition moving_average_decompose(const Matrix& x, std::size_t kernel) {
    if (kernel == 0 || kernel % 2 == 0 || kernel > x.rows())
        fail(ErrorCode::BadKernel, "moving-average kernel must be odd and <= " + std::to_string(x.rows()) +
                                       ", got " + std::to_string(kernel));
    const auto L = static_cast<std::ptrdiff_t>(x.rows());
    const auto half = static_cast<std::ptrdiff_t>(kernel / 2);
    Decomposition d{Matrix(x.rows(), x.cols()), Matrix(x.rows(), x.cols())};
    for (std::size_t c = 0; c < x.cols(); ++c) {
        for (std::ptrdiff_t t = 0; t < L; ++t) {
            double sum = 0.0;
            for (std::ptrdiff_t j = -half; j <= half; ++j)
                sum += x(static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(t + j, 0, L - 1)), c);
            const auto r = static_cast<std::size_t>(t);
            d.trend(r, c) = sum / static_cast<double>(kernel);
            d.remainder(r, c) = x(r, c) - d.trend(r, c);
        }
    }
    return d;
}

namespace {

// Adjoint of the replicated-edge moving average.
Matrix moving_average_adjoint(const Matrix& g, std::size_t kernel) {
    const auto L = static_cast<std::ptrdiff_t>(g.rows());
    const auto half = static_cast<std::ptrdiff_t>(kernel / 2);
    Matrix out(g.rows(), g.cols());
    for (std::size_t c = 0; c < g.cols(); ++c)
        for (std::ptrdiff_t t = 0; t < L; ++t) {
            const double share = g(static_cast<std::size_t>(t), c) / static_cast<double>(kernel);
            for (std::ptrdiff_t j = -half; j <= half; ++j)
                out(static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(t + j, 0, L - 1)), c) += share;
        }
    return out;
}

}  // namespace

DLinearForecaster::DLinearForecaster(ModelConfig cfg)
    : ForecastModel(cfg), kernel_(clamp_kernel(cfg.dlinear_kernel, cfg.seq_len)), trend_(cfg), remainder_(cfg) {}

void DLinearForecaster::init(Rng& rng) {
    trend_.init(rng);
    remainder_.init(rng);
}

Matrix DLinearForecaster::forward(const Matrix& x, nn::Mode mode, Rng* dropout_rng) {
    check_input(x);
    const auto parts = moving_average_decompose(x, kernel_);
    Matrix y = trend_.forward(parts.trend, mode, dropout_rng);
    const Matrix r = remainder_.forward(parts.remainder, mode, dropout_rng);
    for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] += r.data()[i];
    return y;
}

Matrix DLinearForecaster::backward(const Matrix& grad_out) {
    const Matrix d_trend = trend_.backward(grad_out);
    const Matrix d_rem = remainder_.backward(grad_out);
    // x feeds the remainder directly and both branches through the average.
    Matrix diff(d_trend.rows(), d_trend.cols());
    for (std::size_t i = 0; i < diff.size(); ++i) diff.data()[i] = d_trend.data()[i] - d_rem.data()[i];
    Matrix dx = moving_average_adjoint(diff, kernel_);
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data()[i] += d_rem.data()[i];
    return dx;
}

std::vector<nn::ParamView> DLinearForecaster::parameters() {
    std::vector<nn::ParamView> out;
    for (auto& p : trend_.parameters()) out.push_back({"trend." + p.name, p.value, p.grad});
    for (auto& p : remainder_.parameters()) out.push_back({"remainder." + p.name, p.value, p.grad});
    return out;
}

MlpForecaster::MlpForecaster(ModelConfig cfg)
    : ForecastModel(cfg),
      net_({cfg.seq_len * cfg.channels, cfg.hidden, cfg.hidden, cfg.pred_len * cfg.channels}, cfg.dropout) {}

void MlpForecaster::init(Rng& rng) { net_.init_uniform(rng); }

Matrix MlpForecaster::forward(const Matrix& x, nn::Mode mode, Rng* dropout_rng) {
    check_input(x);
    return unflatten(net_.forward(flatten(x), mode, dropout_rng), cfg_.pred_len, cfg_.channels);
}

Matrix MlpForecaster::backward(const Matrix& grad_out) {
    require(grad_out.rows() == cfg_.pred_len && grad_out.cols() == cfg_.channels, ErrorCode::ShapeMismatch,
            "mlp backward gradient shape");
    return unflatten(net_.backward(flatten(grad_out)), cfg_.seq_len, cfg_.channels);
}

std::vector<nn::ParamView> MlpForecaster::parameters() {
    std::vector<nn::ParamView> out;
    net_.collect(out, "mlp");
    return out;
}

namespace {

Matrix stack_values_and_mask(const Matrix& values, const Matrix& mask, const ModelConfig& cfg) {
    if (values.rows() != cfg.seq_len || values.cols() != cfg.channels)
        fail(ErrorCode::ShapeMismatch, "imputer expects " + std::to_string(cfg.seq_len) + "x" +
                                           std::to_string(cfg.channels) + " values");
    require_same_shape(values, mask, "imputer mask");
    Matrix in(1, 2 * values.size());
    std::copy(values.data().begin(), values.data().end(), in.data().begin());
    std::copy(mask.data().begin(), mask.data().end(), in.data().begin() + static_cast<std::ptrdiff_t>(values.size()));
    return in;
}

Matrix values_part(const Matrix& grad_in, const ModelConfig& cfg) {
    Matrix out(cfg.seq_len, cfg.channels);
    std::copy(grad_in.data().begin(), grad_in.data().begin() + static_cast<std::ptrdiff_t>(out.size()),
              out.data().begin());
    return out;
}

}  // namespace

MlpImputer::MlpImputer(ModelConfig cfg)
    : ImputeModel(cfg),
      net_({2 * cfg.seq_len * cfg.channels, cfg.hidden, cfg.hidden, cfg.seq_len * cfg.channels}, cfg.dropout) {}

void MlpImputer::init(Rng& rng) { net_.init_uniform(rng); }

Matrix MlpImputer::forward(const Matrix& values, const Matrix& mask, nn::Mode mode, Rng* dropout_rng) {
    return unflatten(net_.forward(stack_values_and_mask(values, mask, cfg_), mode, dropout_rng), cfg_.seq_len,
                     cfg_.channels);
}

Matrix MlpImputer::backward(const Matrix& grad_out) {
    require(grad_out.rows() == cfg_.seq_len && grad_out.cols() == cfg_.channels, ErrorCode::ShapeMismatch,
            "imputer backward gradient shape");
    return values_part(net_.backward(flatten(grad_out)), cfg_);
}

std::vector<nn::ParamView> MlpImputer::parameters() {
    std::vector<nn::ParamView> out;
    net_.collect(out, "mlp");
    return out;
}

LinearImputer::LinearImputer(ModelConfig cfg)
    : ImputeModel(cfg), head_(2 * cfg.seq_len * cfg.channels, cfg.seq_len * cfg.channels) {}

void LinearImputer::init(Rng& rng) { head_.init_uniform(rng); }

Matrix LinearImputer::forward(const Matrix& values, const Matrix& mask, nn::Mode, Rng*) {
    return unflatten(head_.forward(stack_values_and_mask(values, mask, cfg_)), cfg_.seq_len, cfg_.channels);
}

Matrix LinearImputer::backward(const Matrix& grad_out) {
    require(grad_out.rows() == cfg_.seq_len && grad_out.cols() == cfg_.channels, ErrorCode::ShapeMismatch,
            "imputer backward gradient shape");
    return values_part(head_.backward(flatten(grad_out)), cfg_);
}

std::vector<nn::ParamView> LinearImputer::parameters() {
    std::vector<nn::ParamView> out;
    head_.collect(out, "linear");
    return out;
}

std::unique_ptr<ForecastModel> make_forecast_model(ModelKind kind, const ModelConfig& cfg) {
    switch (kind) {
        case ModelKind::Linear: return std::make_unique<LinearForecaster>(cfg);
        case ModelKind::DLinear: return std::make_unique<DLinearForecaster>(cfg);
        case ModelKind::Mlp: return std::make_unique<MlpForecaster>(cfg);
    }
    fail(ErrorCode::InvalidArgument, "unknown model kind");
}

std::unique_ptr<ImputeModel> make_impute_model(ModelKind kind, const ModelConfig& cfg) {
    switch (kind) {
        case ModelKind::Linear: return std::make_unique<LinearImputer>(cfg);
        case ModelKind::Mlp: return std::make_unique<MlpImputer>(cfg);
        case ModelKind::DLinear: break;
    }
    fail(ErrorCode::InvalidArgument, "no imputation variant for model kind " + to_string(kind));
}

}  // namespace tats::models
