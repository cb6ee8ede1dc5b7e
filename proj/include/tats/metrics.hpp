#pragma once

#include <cstddef>
#include <optional>

#include "json.hpp"
#include "tats/matrix.hpp"

namespace tats::metrics {

struct EvalReport {
    double mse = 0.0;
    double mae = 0.0;
    double rmse = 0.0;
    double mape = 0.0;  ///< percent
    double mspe = 0.0;  ///< fraction, no x100
    std::size_t n = 0;
    std::size_t zero_target_count = 0;  ///< cells left out of mape/mspe
};

/// Metrics over the cells where mask (if given) is nonzero.
EvalReport evaluate(const Matrix& pred, const Matrix& target, const std::optional<Matrix>& mask = std::nullopt);

/// Sample-weighted pooling of several reports (e.g. over test windows).
class Accumulator {
public:
    void add(const Matrix& pred, const Matrix& target, const std::optional<Matrix>& mask = std::nullopt);
    EvalReport report() const;
    std::size_t count() const noexcept { return n_; }

private:
    double se_ = 0.0, ae_ = 0.0, ape_ = 0.0, spe_ = 0.0;
    std::size_t n_ = 0, pct_n_ = 0, zeros_ = 0;
};

nlohmann::json to_json(const EvalReport& r);

/// 100 * (baseline - ours) / baseline
double promotion_percent(double baseline, double ours);

}  // namespace tats::metrics
