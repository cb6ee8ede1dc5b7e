#include "tats/framework.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <string>

namespace tats::framework {

std::size_t default_projector_hidden(std::size_t d_mapped) { return std::max<std::size_t>(4 * d_mapped, 32); }

MlpProjector::MlpProjector(std::size_t d_text, std::size_t d_mapped, std::size_t hidden, double dropout)
    : hidden_(hidden), net_({d_text, hidden, hidden, d_mapped}, dropout) {
    require(d_mapped >= 1, ErrorCode::InvalidArgument, "projector output width must be >= 1");
}

Matrix MlpProjector::project(const Matrix& embeddings, nn::Mode mode, Rng* dropout_rng) {
    if (embeddings.cols() != d_text())
        fail(ErrorCode::ShapeMismatch, "projector expects embedding width " + std::to_string(d_text()) + ", got " +
                                           std::to_string(embeddings.cols()));
    return net_.forward(embeddings, mode, dropout_rng);
}

std::vector<nn::ParamView> MlpProjector::parameters() {
    std::vector<nn::ParamView> out;
    net_.collect(out, "projector");
    return out;
}

Matrix augment(const Matrix& x_norm, const Matrix& z) {
    if (z.cols() == 0) return x_norm;
    return hconcat(x_norm, z);
}

nlohmann::json to_json(const TatsConfig& cfg) {
    return {{"n_vars", cfg.n_vars},
            {"d_text", cfg.d_text},
            {"d_mapped", cfg.d_mapped},
            {"projector_hidden", cfg.projector_hidden},
            {"projector_dropout", cfg.projector_dropout},
            {"use_norm", cfg.use_norm},
            {"model", models::to_string(cfg.model)},
            {"base", models::to_json(cfg.base)}};
}

TatsConfig tats_config_from_json(const nlohmann::json& j) {
    TatsConfig cfg;
    cfg.n_vars = j.at("n_vars").get<std::size_t>();
    cfg.d_text = j.at("d_text").get<std::size_t>();
    cfg.d_mapped = j.at("d_mapped").get<std::size_t>();
    cfg.projector_hidden = j.at("projector_hidden").get<std::size_t>();
    cfg.projector_dropout = j.at("projector_dropout").get<double>();
    cfg.use_norm = j.at("use_norm").get<bool>();
    cfg.model = models::parse_model_kind(j.at("model").get<std::string>());
    cfg.base = models::model_config_from_json(j.at("base"));
    return cfg;
}

namespace {

TatsConfig resolve(TatsConfig cfg) {
    require(cfg.n_vars >= 1, ErrorCode::InvalidArgument, "n_vars must be >= 1");
    if (cfg.d_mapped > 0) {
        require(cfg.d_text >= 1, ErrorCode::InvalidArgument, "d_text must be >= 1");
        require(cfg.d_mapped < cfg.d_text, ErrorCode::InvalidArgument,
                "d_mapped (" + std::to_string(cfg.d_mapped) + ") must be smaller than d_text (" +
                    std::to_string(cfg.d_text) + ")");
        if (cfg.projector_hidden == 0) cfg.projector_hidden = default_projector_hidden(cfg.d_mapped);
    }
    cfg.base.channels = cfg.n_vars + cfg.d_mapped;
    return cfg;
}

std::optional<MlpProjector> make_projector(const TatsConfig& cfg, std::uint64_t seed) {
    if (cfg.d_mapped == 0) return std::nullopt;
    MlpProjector p(cfg.d_text, cfg.d_mapped, cfg.projector_hidden, cfg.projector_dropout);
    Rng rng(seed, stream::kProjectorInit);
    p.init(rng);
    return p;
}

nn::InstanceNormState identity_norm(std::size_t n) {
    return {std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)};
}

Matrix normalize_with(const Matrix& x, const nn::InstanceNormState& st) {
    Matrix out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = (x(r, c) - st.mean[c]) / st.stdev[c];
    return out;
}

// Pads an H x N gradient with zero columns for the auxiliary channels.
Matrix widen(const Matrix& g, std::size_t channels) {
    if (g.cols() == channels) return g;
    Matrix out(g.rows(), channels);
    for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) out(r, c) = g(r, c);
    return out;
}

std::vector<nn::ParamView> prefixed(std::vector<nn::ParamView> params, const std::string& prefix) {
    for (auto& p : params) p.name = prefix + p.name;
    return params;
}

nlohmann::json bundle_meta(const char* kind, const TatsConfig& cfg) {
    return {{"kind", kind}, {"tats", to_json(cfg)}};
}

}  // namespace

AugmentedForecaster::AugmentedForecaster(TatsConfig cfg, std::uint64_t seed) : cfg_(resolve(std::move(cfg))) {
    base_ = models::make_forecast_model(cfg_.model, cfg_.base);
    Rng base_rng(seed, stream::kBaseInit);
    base_->init(base_rng);
    projector_ = make_projector(cfg_, seed);
}

std::vector<nn::ParamView> AugmentedForecaster::projector_parameters() {
    return projector_ ? projector_->parameters() : std::vector<nn::ParamView>{};
}

std::vector<nn::ParamView> AugmentedForecaster::parameters() {
    auto out = prefixed(projector_parameters(), "");
    for (auto& p : prefixed(base_parameters(), "base.")) out.push_back(std::move(p));
    return out;
}

AugmentedForecaster::Forward AugmentedForecaster::run_forward(const data::WindowSample& sample, nn::Mode mode,
                                                              RandomStreams streams) {
    const Matrix& x = sample.input_series;
    if (x.cols() != cfg_.n_vars)
        fail(ErrorCode::ShapeMismatch, "window has " + std::to_string(x.cols()) + " variables, model expects " +
                                           std::to_string(cfg_.n_vars));
    Forward f;
    Matrix x_norm;
    if (cfg_.use_norm) {
        auto [normed, st] = nn::instance_normalize(x);
        x_norm = std::move(normed);
        f.norm = std::move(st);
    } else {
        x_norm = x;
        f.norm = identity_norm(x.cols());
    }
    Matrix u = x_norm;
    if (projector_) u = augment(x_norm, projector_->project(sample.input_embeddings, mode, streams.projector_dropout));
    const Matrix out = base_->forward(u, mode, streams.base_dropout);
    f.pred_norm = out.slice_cols(0, cfg_.n_vars);
    return f;
}

Matrix AugmentedForecaster::forecast(const data::WindowSample& sample) {
    const auto f = run_forward(sample, nn::Mode::Eval, {});
    return nn::instance_denormalize(f.pred_norm, f.norm);
}

double AugmentedForecaster::loss(const data::WindowSample& sample, nn::Mode mode, RandomStreams streams,
                                 LossSpace space) {
    const auto f = run_forward(sample, mode, streams);
    if (space == LossSpace::Raw) return nn::mse_loss(nn::instance_denormalize(f.pred_norm, f.norm), sample.target).loss;
    return nn::mse_loss(f.pred_norm, normalize_with(sample.target, f.norm)).loss;
}

double AugmentedForecaster::loss_and_backward(const data::WindowSample& sample, nn::Mode mode,
                                              RandomStreams streams, LossSpace space) {
    const auto f = run_forward(sample, mode, streams);
    nn::LossResult lr;
    if (space == LossSpace::Raw) {
        lr = nn::mse_loss(nn::instance_denormalize(f.pred_norm, f.norm), sample.target);
        for (std::size_t r = 0; r < lr.grad.rows(); ++r)
            for (std::size_t c = 0; c < lr.grad.cols(); ++c) lr.grad(r, c) *= f.norm.stdev[c];
    } else {
        lr = nn::mse_loss(f.pred_norm, normalize_with(sample.target, f.norm));
    }
    const Matrix du = base_->backward(widen(lr.grad, cfg_.base.channels));
    if (projector_) projector_->backward(du.slice_cols(cfg_.n_vars, du.cols()));
    return lr.loss;
}

void AugmentedForecaster::save(const std::filesystem::path& path) {
    nn::save_checkpoint(path, bundle_meta("tats-forecaster", cfg_), parameters());
}

AugmentedForecaster AugmentedForecaster::load(const std::filesystem::path& path) {
    const auto ck = nn::load_checkpoint(path);
    require(ck.meta.value("kind", "") == "tats-forecaster", ErrorCode::BadMagic, "checkpoint is not a forecaster");
    AugmentedForecaster model(tats_config_from_json(ck.meta.at("tats")), 0);
    nn::apply_checkpoint(ck, model.parameters());
    return model;
}

AugmentedImputer::AugmentedImputer(TatsConfig cfg, std::uint64_t seed) : cfg_(resolve(std::move(cfg))) {
    base_ = models::make_impute_model(cfg_.model, cfg_.base);
    Rng base_rng(seed, stream::kBaseInit);
    base_->init(base_rng);
    projector_ = make_projector(cfg_, seed);
}

std::vector<nn::ParamView> AugmentedImputer::projector_parameters() {
    return projector_ ? projector_->parameters() : std::vector<nn::ParamView>{};
}

std::vector<nn::ParamView> AugmentedImputer::parameters() {
    auto out = projector_parameters();
    for (auto& p : prefixed(base_parameters(), "base.")) out.push_back(std::move(p));
    return out;
}

AugmentedImputer::Forward AugmentedImputer::run_forward(const data::ImputeSample& sample, nn::Mode mode,
                                                        RandomStreams streams) {
    if (sample.values.cols() != cfg_.n_vars)
        fail(ErrorCode::ShapeMismatch, "window has " + std::to_string(sample.values.cols()) +
                                           " variables, model expects " + std::to_string(cfg_.n_vars));
    require_same_shape(sample.values, sample.mask, "impute mask");
    Forward f;
    Matrix x_norm;
    if (cfg_.use_norm) {
        auto [normed, st] = nn::instance_normalize_masked(sample.values, sample.mask);
        x_norm = std::move(normed);
        f.norm = std::move(st);
    } else {
        x_norm = sample.values;
        for (std::size_t i = 0; i < x_norm.size(); ++i) x_norm.data()[i] *= sample.mask.data()[i];
        for (std::size_t c = 0; c < sample.mask.cols(); ++c) {
            double observed = 0.0;
            for (std::size_t r = 0; r < sample.mask.rows(); ++r) observed += sample.mask(r, c);
            if (observed == 0.0) fail(ErrorCode::AllMasked, "variable " + std::to_string(c) + " fully masked");
        }
        f.norm = identity_norm(sample.values.cols());
    }
    f.target_norm = normalize_with(sample.values, f.norm);

    Matrix u = x_norm;
    Matrix mask = sample.mask;
    if (projector_) {
        u = augment(x_norm, projector_->project(sample.input_embeddings, mode, streams.projector_dropout));
        mask = hconcat(sample.mask, Matrix(sample.mask.rows(), cfg_.d_mapped, 1.0));
    }
    const Matrix out = base_->forward(u, mask, mode, streams.base_dropout);
    f.recon_norm = out.slice_cols(0, cfg_.n_vars);
    return f;
}

Matrix AugmentedImputer::impute(const data::ImputeSample& sample) {
    const auto f = run_forward(sample, nn::Mode::Eval, {});
    return nn::instance_denormalize(f.recon_norm, f.norm);
}

namespace {

Matrix missing_weight(const Matrix& mask) {
    Matrix w(mask.rows(), mask.cols());
    for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = mask.data()[i] == 0.0 ? 1.0 : 0.0;
    return w;
}

}  // namespace

double AugmentedImputer::loss(const data::ImputeSample& sample, nn::Mode mode, RandomStreams streams,
                              LossSpace space) {
    const auto f = run_forward(sample, mode, streams);
    const Matrix w = missing_weight(sample.mask);
    if (space == LossSpace::Raw)
        return nn::masked_mse_loss(nn::instance_denormalize(f.recon_norm, f.norm), sample.values, w).loss;
    return nn::masked_mse_loss(f.recon_norm, f.target_norm, w).loss;
}

double AugmentedImputer::loss_and_backward(const data::ImputeSample& sample, nn::Mode mode, RandomStreams streams,
                                           LossSpace space) {
    const auto f = run_forward(sample, mode, streams);
    const Matrix w = missing_weight(sample.mask);
    nn::LossResult lr;
    if (space == LossSpace::Raw) {
        lr = nn::masked_mse_loss(nn::instance_denormalize(f.recon_norm, f.norm), sample.values, w);
        for (std::size_t r = 0; r < lr.grad.rows(); ++r)
            for (std::size_t c = 0; c < lr.grad.cols(); ++c) lr.grad(r, c) *= f.norm.stdev[c];
    } else {
        lr = nn::masked_mse_loss(f.recon_norm, f.target_norm, w);
    }
    const Matrix du = base_->backward(widen(lr.grad, cfg_.base.channels));
    if (projector_) projector_->backward(du.slice_cols(cfg_.n_vars, du.cols()));
    return lr.loss;
}

void AugmentedImputer::save(const std::filesystem::path& path) {
    nn::save_checkpoint(path, bundle_meta("tats-imputer", cfg_), parameters());
}

AugmentedImputer AugmentedImputer::load(const std::filesystem::path& path) {
    const auto ck = nn::load_checkpoint(path);
    require(ck.meta.value("kind", "") == "tats-imputer", ErrorCode::BadMagic, "checkpoint is not an imputer");
    AugmentedImputer model(tats_config_from_json(ck.meta.at("tats")), 0);
    nn::apply_checkpoint(ck, model.parameters());
    return model;
}

nlohmann::json to_json(const TrainConfig& cfg) {
    return {{"epochs", cfg.epochs}, {"patience", cfg.patience}, {"lr", cfg.lr},
            {"lr2", cfg.lr2},       {"batch", cfg.batch},       {"seed", cfg.seed}};
}

nlohmann::json history_json(const TrainResult& r, bool include_timing) {
    auto out = nlohmann::json::array();
    for (const auto& e : r.history) {
        nlohmann::json row = {{"train_loss", e.train_loss}, {"val_loss", e.val_loss}};
        if (include_timing) row["seconds"] = e.seconds;
        out.push_back(std::move(row));
    }
    return out;
}

namespace {

template <typename Model, typename Sample>
TrainResult train_loop(Model& model, const std::vector<Sample>& train, const std::vector<Sample>& val,
                       const TrainConfig& cfg) {
    if (train.empty()) fail(ErrorCode::EmptyTrainSet, "no training windows");
    require(cfg.batch >= 1, ErrorCode::InvalidArgument, "batch size must be >= 1");

    nn::Adam base_opt(model.base_parameters(), {.lr = cfg.lr});
    nn::Adam proj_opt(model.projector_parameters(), {.lr = cfg.lr2});
    Rng order_rng(cfg.seed, stream::kBatchOrder);
    Rng base_drop(cfg.seed, stream::kBaseDropout);
    Rng proj_drop(cfg.seed, stream::kProjectorDropout);
    const RandomStreams streams{&base_drop, &proj_drop};
    const auto all_params = model.parameters();

    TrainResult result;
    std::vector<std::vector<double>> best = nn::snapshot(all_params);
    double best_val = INFINITY;
    std::size_t stale = 0;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        order_rng.shuffle(std::span<std::size_t>(order));
        double batch_loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t b = 0; b < order.size(); b += cfg.batch) {
            const std::size_t end = std::min(order.size(), b + cfg.batch);
            base_opt.zero_grad();
            proj_opt.zero_grad();
            double loss = 0.0;
            for (std::size_t i = b; i < end; ++i)
                loss += model.loss_and_backward(train[order[i]], nn::Mode::Train, streams);
            const double inv = 1.0 / static_cast<double>(end - b);
            base_opt.scale_grad(inv);
            proj_opt.scale_grad(inv);
            base_opt.step();
            proj_opt.step();
            batch_loss_sum += loss * inv;
            ++batches;
        }

        EpochRecord rec;
        rec.train_loss = batch_loss_sum / static_cast<double>(batches);
        if (!val.empty()) {
            double v = 0.0;
            for (const auto& s : val) v += model.loss(s, nn::Mode::Eval, {});
            rec.val_loss = v / static_cast<double>(val.size());
        } else {
            rec.val_loss = rec.train_loss;
        }
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        result.history.push_back(rec);

        if (rec.val_loss < best_val) {
            best_val = rec.val_loss;
            best = nn::snapshot(all_params);
            result.best_epoch = epoch;
            stale = 0;
        } else if (++stale >= cfg.patience) {
            break;
        }
    }
    nn::restore(all_params, best);
    result.best_val_loss = result.best_epoch == 0 ? 0.0 : best_val;
    return result;
}

}  // namespace

TrainResult train_forecast(AugmentedForecaster& model, const std::vector<data::WindowSample>& train,
                           const std::vector<data::WindowSample>& val, const TrainConfig& cfg) {
    return train_loop(model, train, val, cfg);
}

TrainResult train_impute(AugmentedImputer& model, const std::vector<data::ImputeSample>& train,
                         const std::vector<data::ImputeSample>& val, const TrainConfig& cfg) {
    return train_loop(model, train, val, cfg);
}

}  // namespace tats::framework
