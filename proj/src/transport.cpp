#include "tats/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tats/random.hpp"

namespace tats::transport {

NormalizedSpectrum normalize_spectrum(const spectral::Spectrum& s) {
    double total = 0.0;
    for (double a : s.amplitudes) total += a;
    if (!(total > 0.0)) fail(ErrorCode::ZeroSpectrum, "spectrum carries no amplitude");
    NormalizedSpectrum out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.amplitudes[i] <= 0.0) continue;
        out.support.push_back(s.frequencies[i] / 0.5);
        out.weights.push_back(s.amplitudes[i] / total);
    }
    return out;
}

void validate(const NormalizedSpectrum& p) {
    require(!p.support.empty() && p.support.size() == p.weights.size(), ErrorCode::InvalidArgument,
            "normalized spectrum needs matching non-empty support and weights");
    double sum = 0.0;
    for (std::size_t i = 0; i < p.support.size(); ++i) {
        require(p.weights[i] >= 0.0, ErrorCode::InvalidArgument, "negative transport mass");
        require(i == 0 || p.support[i] > p.support[i - 1], ErrorCode::InvalidArgument,
                "support must be strictly increasing");
        sum += p.weights[i];
    }
    require(std::abs(sum - 1.0) <= 1e-9, ErrorCode::InvalidArgument, "weights must sum to 1");
}

double wasserstein_1d(const NormalizedSpectrum& p, const NormalizedSpectrum& q) {
    validate(p);
    validate(q);
    std::size_t i = 0, j = 0;
    double cdf_p = 0.0, cdf_q = 0.0;
    double position = std::min(p.support.front(), q.support.front());
    double total = 0.0;
    while (i < p.support.size() || j < q.support.size()) {
        const double next_p = i < p.support.size() ? p.support[i] : INFINITY;
        const double next_q = j < q.support.size() ? q.support[j] : INFINITY;
        const double next = std::min(next_p, next_q);
        total += std::abs(cdf_p - cdf_q) * (next - position);
        position = next;
        if (next_p == next) cdf_p += p.weights[i++];
        if (next_q == next) cdf_q += q.weights[j++];
    }
    return total;
}

namespace {

// Dense two-phase simplex for: min c.x  s.t.  A x = b, x >= 0.
// Bland's rule keeps it finite on the degenerate vertices transport LPs produce.
class Simplex {
public:
    Simplex(const Matrix& a, std::vector<double> b, std::vector<double> c)
        : rows_(a.rows()), vars_(a.cols()), cost_(std::move(c)), tab_(rows_ + 1, vars_ + rows_ + 1),
          basis_(rows_) {
        for (std::size_t i = 0; i < rows_; ++i) {
            const double sign = b[i] < 0 ? -1.0 : 1.0;
            for (std::size_t j = 0; j < vars_; ++j) tab_(i, j) = sign * a(i, j);
            tab_(i, vars_ + i) = 1.0;
            tab_(i, rhs()) = sign * b[i];
            basis_[i] = vars_ + i;
        }
    }

    std::vector<double> solve() {
        // Phase I: minimize the sum of artificials.
        for (std::size_t j = 0; j <= rhs(); ++j) tab_(rows_, j) = 0.0;
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < vars_; ++j) tab_(rows_, j) -= tab_(i, j);
        for (std::size_t i = 0; i < rows_; ++i) tab_(rows_, rhs()) -= tab_(i, rhs());
        iterate(vars_ + rows_);
        if (-tab_(rows_, rhs()) > kEps * 100) fail(ErrorCode::InvalidArgument, "transport LP infeasible");

        // Pivot artificials out where possible; rows that cannot pivot are redundant.
        for (std::size_t i = 0; i < rows_; ++i) {
            if (basis_[i] < vars_) continue;
            for (std::size_t j = 0; j < vars_; ++j) {
                if (std::abs(tab_(i, j)) > kEps) {
                    pivot(i, j);
                    break;
                }
            }
        }

        // Phase II objective in terms of the current basis.
        for (std::size_t j = 0; j <= rhs(); ++j) tab_(rows_, j) = j < vars_ ? cost_[j] : 0.0;
        for (std::size_t i = 0; i < rows_; ++i) {
            const double cb = basis_[i] < vars_ ? cost_[basis_[i]] : 0.0;
            if (cb == 0.0) continue;
            for (std::size_t j = 0; j <= rhs(); ++j) tab_(rows_, j) -= cb * tab_(i, j);
        }
        iterate(vars_);

        std::vector<double> x(vars_, 0.0);
        for (std::size_t i = 0; i < rows_; ++i)
            if (basis_[i] < vars_) x[basis_[i]] = tab_(i, rhs());
        return x;
    }

private:
    static constexpr double kEps = 1e-12;

    std::size_t rhs() const { return vars_ + rows_; }

    void iterate(std::size_t enterable) {
        for (std::size_t guard = 0; guard < 100000; ++guard) {
            std::size_t enter = enterable;
            for (std::size_t j = 0; j < enterable; ++j) {
                if (tab_(rows_, j) < -kEps) {
                    enter = j;
                    break;
                }
            }
            if (enter == enterable) return;
            std::size_t leave = rows_;
            double best = INFINITY;
            for (std::size_t i = 0; i < rows_; ++i) {
                if (tab_(i, enter) <= kEps) continue;
                const double ratio = tab_(i, rhs()) / tab_(i, enter);
                if (ratio < best - kEps || (std::abs(ratio - best) <= kEps && basis_[i] < basis_[leave])) {
                    best = ratio;
                    leave = i;
                }
            }
            if (leave == rows_) fail(ErrorCode::InvalidArgument, "transport LP unbounded");
            pivot(leave, enter);
        }
        fail(ErrorCode::InvalidArgument, "simplex iteration limit");
    }

    void pivot(std::size_t row, std::size_t col) {
        const double p = tab_(row, col);
        for (std::size_t j = 0; j <= rhs(); ++j) tab_(row, j) /= p;
        for (std::size_t i = 0; i <= rows_; ++i) {
            if (i == row) continue;
            const double f = tab_(i, col);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j <= rhs(); ++j) tab_(i, j) -= f * tab_(row, j);
        }
        basis_[row] = col;
    }

    std::size_t rows_;
    std::size_t vars_;
    std::vector<double> cost_;
    Matrix tab_;
    std::vector<std::size_t> basis_;
};

}  // namespace

LpSolution lp_oracle(const NormalizedSpectrum& p, const NormalizedSpectrum& q) {
    validate(p);
    validate(q);
    const std::size_t n = p.support.size();
    const std::size_t m = q.support.size();
    if (n * m > 64) fail(ErrorCode::TooLarge, "lp_oracle is limited to n*m <= 64");

    Matrix a(n + m, n * m);
    std::vector<double> b(n + m);
    std::vector<double> c(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const std::size_t v = i * m + j;
            a(i, v) = 1.0;
            a(n + j, v) = 1.0;
            c[v] = std::abs(p.support[i] - q.support[j]);
        }
    }
    for (std::size_t i = 0; i < n; ++i) b[i] = p.weights[i];
    for (std::size_t j = 0; j < m; ++j) b[n + j] = q.weights[j];

    const auto x = Simplex(a, b, c).solve();
    LpSolution out;
    out.plan.gamma = Matrix(n, m);
    for (std::size_t v = 0; v < n * m; ++v) {
        out.plan.gamma.data()[v] = std::max(0.0, x[v]);
        out.value += c[v] * x[v];
    }
    return out;
}

spectral::Spectrum series_spectrum(const Matrix& values) {
    spectral::Spectrum mean;
    std::size_t used = 0;
    for (std::size_t n = 0; n < values.cols(); ++n) {
        const auto s = spectral::magnitude_spectrum(spectral::difference(values.column(n)));
        const double total = std::accumulate(s.amplitudes.begin(), s.amplitudes.end(), 0.0);
        if (!(total > 0.0)) continue;  // constant channel, nothing to transport
        if (used == 0) {
            mean.frequencies = s.frequencies;
            mean.amplitudes.assign(s.size(), 0.0);
        }
        for (std::size_t k = 0; k < s.size(); ++k) mean.amplitudes[k] += s.amplitudes[k] / total;
        ++used;
    }
    if (used == 0) fail(ErrorCode::ZeroSpectrum, "every series variable is constant");
    for (double& a : mean.amplitudes) a /= static_cast<double>(used);
    return mean;
}

double tt_wasserstein(const data::TimeSeries& series, const data::EmbeddingSequence& embeddings,
                      const TtConfig& cfg) {
    require(series.length() == embeddings.length(), ErrorCode::ShapeMismatch, "series/embedding length");
    const std::size_t max_lag = cfg.max_lag == 0 ? spectral::default_max_lag(series.length()) : cfg.max_lag;
    spectral::Spectrum text;
    try {
        text = spectral::text_spectrum(embeddings, max_lag);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::DegenerateEmbeddings)
            fail(ErrorCode::ZeroSpectrum, "text spectrum is empty: embeddings are constant");
        throw;
    }
    return wasserstein_1d(normalize_spectrum(text), normalize_spectrum(series_spectrum(series.values())));
}

double tt_wasserstein(const data::MultimodalDataset& ds, const TtConfig& cfg) {
    return tt_wasserstein(ds.series(), ds.embeddings(), cfg);
}

double shuffle_ratio_percent(double original, double ts_shuffled_mean, double text_shuffled_mean) {
    const double denom = 0.5 * (ts_shuffled_mean + text_shuffled_mean);
    require(denom > 0.0, ErrorCode::InvalidArgument, "shuffled distances must be positive");
    return 100.0 * original / denom;
}

Matrix permute_rows(const Matrix& m, std::uint64_t seed, std::uint64_t stream) {
    std::vector<std::size_t> order(m.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed, stream);
    rng.shuffle(std::span<std::size_t>(order));
    Matrix out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r)
        std::copy(m.row(order[r]).begin(), m.row(order[r]).end(), out.row(r).begin());
    return out;
}

ShuffleReport shuffle_ratio(const data::TimeSeries& series, const data::EmbeddingSequence& embeddings,
                            const std::vector<std::uint64_t>& seeds, const TtConfig& cfg) {
    require(!seeds.empty(), ErrorCode::InvalidArgument, "shuffle_ratio needs at least one seed");
    ShuffleReport r;
    r.original = tt_wasserstein(series, embeddings, cfg);
    for (auto seed : seeds) {
        const data::TimeSeries ts(permute_rows(series.values(), seed, stream::kSeriesShuffle));
        r.ts_shuffled.push_back(tt_wasserstein(ts, embeddings, cfg));
        const data::EmbeddingSequence te(permute_rows(embeddings.vectors(), seed, stream::kTextShuffle));
        r.text_shuffled.push_back(tt_wasserstein(series, te, cfg));
    }
    const auto mean = [](const std::vector<double>& v) {
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    r.ts_shuffled_mean = mean(r.ts_shuffled);
    r.text_shuffled_mean = mean(r.text_shuffled);
    r.ratio_percent = shuffle_ratio_percent(r.original, r.ts_shuffled_mean, r.text_shuffled_mean);
    return r;
}

}  // namespace tats::transport
