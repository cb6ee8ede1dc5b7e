#include "tats/metrics.hpp"

#include <cmath>

#include "tats/error.hpp"

namespace tats::metrics {

void Accumulator::add(const Matrix& pred, const Matrix& target, const std::optional<Matrix>& mask) {
    require_same_shape(pred, target, "evaluate");
    if (mask) require_same_shape(pred, *mask, "evaluate mask");
    const auto p = pred.data();
    const auto y = target.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (mask && mask->data()[i] == 0.0) continue;
        const double e = y[i] - p[i];
        se_ += e * e;
        ae_ += std::abs(e);
        ++n_;
        if (y[i] == 0.0) {
            ++zeros_;
            continue;
        }
        const double rel = e / y[i];
        ape_ += std::abs(rel);
        spe_ += rel * rel;
        ++pct_n_;
    }
}

EvalReport Accumulator::report() const {
    if (n_ == 0) fail(ErrorCode::EmptySelection, "no cells selected for evaluation");
    EvalReport r;
    r.n = n_;
    r.zero_target_count = zeros_;
    r.mse = se_ / static_cast<double>(n_);
    r.mae = ae_ / static_cast<double>(n_);
    r.rmse = std::sqrt(r.mse);
    if (pct_n_ > 0) {
        r.mape = 100.0 * ape_ / static_cast<double>(pct_n_);
        r.mspe = spe_ / static_cast<double>(pct_n_);
    } else {
        r.mape = r.mspe = NAN;
    }
    return r;
}

EvalReport evaluate(const Matrix& pred, const Matrix& target, const std::optional<Matrix>& mask) {
    Accumulator acc;
    acc.add(pred, target, mask);
    return acc.report();
}

nlohmann::json to_json(const EvalReport& r) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    return {{"mse", r.mse},   {"mae", r.mae}, {"rmse", r.rmse}, {"mape", num(r.mape)},
            {"mspe", num(r.mspe)}, {"n", r.n}, {"zero_target_count", r.zero_target_count}};
}

double promotion_percent(double baseline, double ours) {
    require(baseline != 0.0, ErrorCode::InvalidArgument, "promotion needs a nonzero baseline");
    return 100.0 * (baseline - ours) / baseline;
}

}  // namespace tats::metrics
