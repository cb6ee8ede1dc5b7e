#pragma once

// Independent reference implementations used by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "tats/error.hpp"
#include "tats/matrix.hpp"
#include "tats/nn.hpp"
#include "tats/random.hpp"

namespace oracle {

/// The ErrorCode thrown by fn, or nullopt when it returns normally.
template <typename Fn>
std::optional<tats::ErrorCode> error_code(Fn&& fn) {
    try {
        fn();
    } catch (const tats::Error& e) {
        return e.code();
    }
    return std::nullopt;
}

/// |X_k| = |sum_t x_t e^{-2 pi i k t / T}| for k = 1..floor(T/2), term by term.
inline std::vector<double> direct_dft_magnitudes(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<double> out;
    for (std::size_t k = 1; k <= n / 2; ++k) {
        long double re = 0, im = 0;
        for (std::size_t t = 0; t < n; ++t) {
            // reduce k*t mod n first so the angle stays small and exact
            const long double angle = 2.0L * std::numbers::pi_v<long double> *
                                      static_cast<long double>((k * t) % n) / static_cast<long double>(n);
            re += x[t] * std::cos(angle);
            im -= x[t] * std::sin(angle);
        }
        out.push_back(static_cast<double>(std::sqrt(re * re + im * im)));
    }
    return out;
}

inline std::size_t argmax(const std::vector<double>& v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

/// W1 on the line via the quantile functions: integral over u of |F_p^-1(u) - F_q^-1(u)|.
inline double quantile_w1(std::vector<std::pair<double, double>> p, std::vector<std::pair<double, double>> q) {
    std::sort(p.begin(), p.end());
    std::sort(q.begin(), q.end());
    std::size_t i = 0, j = 0;
    double wp = p[0].second, wq = q[0].second, total = 0.0;
    while (i < p.size() && j < q.size()) {
        const double step = std::min(wp, wq);
        total += step * std::abs(p[i].first - q[j].first);
        wp -= step;
        wq -= step;
        if (wp <= 1e-15 && ++i < p.size()) wp = p[i].second;
        if (wq <= 1e-15 && ++j < q.size()) wq = q[j].second;
    }
    return total;
}

inline void fill_normal(tats::Matrix& m, tats::Rng& rng, double scale = 1.0) {
    for (auto& v : m.data()) v = scale * rng.normal();
}

inline tats::Matrix random_matrix(std::size_t r, std::size_t c, tats::Rng& rng, double scale = 1.0) {
    tats::Matrix m(r, c);
    fill_normal(m, rng, scale);
    return m;
}

struct GradCheck {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
};

/// Compares accumulated analytic gradients in `params` against central differences of `loss`.
/// Relative error uses max(|a|, |n|, floor) so that near-zero gradients compare absolutely.
inline GradCheck finite_difference(const std::vector<tats::nn::ParamView>& params,
                                   const std::function<double()>& loss, double h = 1e-5, double floor = 1e-3,
                                   std::size_t max_per_tensor = 0) {
    GradCheck out;
    for (const auto& p : params) {
        const std::size_t n = p.value.size();
        const std::size_t stride = (max_per_tensor == 0 || n <= max_per_tensor) ? 1 : n / max_per_tensor;
        for (std::size_t i = 0; i < n; i += stride) {
            const double saved = p.value[i];
            p.value[i] = saved + h;
            const double up = loss();
            p.value[i] = saved - h;
            const double down = loss();
            p.value[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double analytic = p.grad[i];
            const double scale = std::max({std::abs(numeric), std::abs(analytic), floor});
            out.max_rel_err = std::max(out.max_rel_err, std::abs(numeric - analytic) / scale);
            ++out.checked;
        }
    }
    return out;
}

/// Same check against an input matrix and its analytic gradient.
inline GradCheck finite_difference_input(tats::Matrix& x, const tats::Matrix& grad,
                                         const std::function<double()>& loss, double h = 1e-5,
                                         double floor = 1e-3) {
    GradCheck out;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x.data()[i];
        x.data()[i] = saved + h;
        const double up = loss();
        x.data()[i] = saved - h;
        const double down = loss();
        x.data()[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double scale = std::max({std::abs(numeric), std::abs(grad.data()[i]), floor});
        out.max_rel_err = std::max(out.max_rel_err, std::abs(numeric - grad.data()[i]) / scale);
        ++out.checked;
    }
    return out;
}

/// OLS via normal equations and Gaussian elimination with partial pivoting. Returns residual variance.
inline double ols_residual_variance(const std::vector<std::vector<double>>& features, const std::vector<double>& y) {
    const std::size_t n = y.size();
    const std::size_t k = features.front().size() + 1;
    std::vector<std::vector<double>> a(k, std::vector<double>(k + 1, 0.0));
    for (std::size_t r = 0; r < n; ++r) {
        std::vector<double> row = features[r];
        row.push_back(1.0);
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = 0; j < k; ++j) a[i][j] += row[i] * row[j];
            a[i][k] += row[i] * y[r];
        }
    }
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < k; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        std::swap(a[c], a[piv]);
        for (std::size_t r = 0; r < k; ++r) {
            if (r == c) continue;
            const double f = a[r][c] / a[c][c];
            for (std::size_t j = c; j <= k; ++j) a[r][j] -= f * a[c][j];
        }
    }
    double ss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        double pred = a[k - 1][k] / a[k - 1][k - 1];
        for (std::size_t i = 0; i + 1 < k; ++i) pred += features[r][i] * a[i][k] / a[i][i];
        ss += (y[r] - pred) * (y[r] - pred);
    }
    return ss / static_cast<double>(n);
}

}  // namespace oracle
