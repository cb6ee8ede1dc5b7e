#include "tats/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numeric>
#include <string>

namespace tats::spectral {

namespace {

// fftw planning mutates global state; execution on a private plan does not.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct PlanDeleter {
    void operator()(fftw_plan_s* p) const {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(p);
    }
};

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

}  // namespace

std::vector<double> difference(std::span<const double> x) {
    require(x.size() >= 2, ErrorCode::TooShort, "difference needs at least 2 samples");
    std::vector<double> out(x.size() - 1);
    for (std::size_t t = 0; t + 1 < x.size(); ++t) out[t] = x[t + 1] - x[t];
    return out;
}

Spectrum magnitude_spectrum(std::span<const double> x) {
    const std::size_t n = x.size();
    require(n >= 2, ErrorCode::TooShort, "magnitude spectrum needs at least 2 samples");
    const std::size_t bins = n / 2 + 1;

    std::unique_ptr<double, FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
    std::unique_ptr<fftw_complex, FftwFree> out(
        static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins)));
    std::unique_ptr<fftw_plan_s, PlanDeleter> plan;
    {
        std::lock_guard lock(planner_mutex());
        plan.reset(fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE));
    }
    std::copy(x.begin(), x.end(), in.get());
    fftw_execute(plan.get());

    Spectrum s;
    s.frequencies.reserve(bins - 1);
    s.amplitudes.reserve(bins - 1);
    for (std::size_t k = 1; k < bins; ++k) {
        const double re = out.get()[k][0];
        const double im = out.get()[k][1];
        s.frequencies.push_back(static_cast<double>(k) / static_cast<double>(n));
        s.amplitudes.push_back(std::sqrt(re * re + im * im));
    }
    return s;
}

Spectrum nms(const Spectrum& s, std::size_t radius) {
    require(radius >= 1, ErrorCode::InvalidArgument, "nms radius must be >= 1");
    Spectrum out = s;
    const std::size_t n = s.size();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= radius ? i - radius : 0;
        const std::size_t hi = std::min(n - 1, i + radius);
        bool keep = true;
        for (std::size_t j = lo; j <= hi && keep; ++j)
            if (j != i && !(s.amplitudes[i] > s.amplitudes[j])) keep = false;
        if (!keep) out.amplitudes[i] = 0.0;
    }
    return out;
}

std::vector<double> lag_similarity(const data::EmbeddingSequence& embeddings, std::size_t max_lag) {
    const Matrix& e = embeddings.vectors();
    const std::size_t T = e.rows();
    const std::size_t d = e.cols();
    require(max_lag >= 1 && max_lag <= T - 1, ErrorCode::InvalidArgument,
            "max_lag must lie in [1, T-1], got " + std::to_string(max_lag));

    std::vector<double> mean(d, 0.0);
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t j = 0; j < d; ++j) mean[j] += e(t, j);
    for (double& m : mean) m /= static_cast<double>(T);

    Matrix centered(T, d);
    std::vector<double> norms(T, 0.0);
    double scale = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        double raw = 0.0, sq = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            raw += e(t, j) * e(t, j);
            const double c = e(t, j) - mean[j];
            centered(t, j) = c;
            sq += c * c;
        }
        scale = std::max(scale, std::sqrt(raw));
        norms[t] = std::sqrt(sq);
    }
    // Centering identical rows leaves rounding residue, not exact zeros.
    const double zero_tol = 1e-12 * std::max(scale, 1e-300);
    std::size_t live = 0;
    for (double& nrm : norms) {
        if (nrm <= zero_tol) nrm = 0.0;
        else ++live;
    }
    require(live > 0, ErrorCode::DegenerateEmbeddings, "all mean-centered embeddings are zero");

    std::vector<double> sim(max_lag, 0.0);
    for (std::size_t k = 1; k <= max_lag; ++k) {
        double total = 0.0;
        std::size_t count = 0;
        for (std::size_t t = 0; t + k < T; ++t) {
            if (norms[t] == 0.0 || norms[t + k] == 0.0) continue;
            const auto a = centered.row(t);
            const auto b = centered.row(t + k);
            const double dot = std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
            total += dot / (norms[t] * norms[t + k]);
            ++count;
        }
        sim[k - 1] = count == 0 ? 0.0 : total / static_cast<double>(count);
    }
    return sim;
}

Spectrum text_spectrum(const data::EmbeddingSequence& embeddings, std::size_t max_lag) {
    require(max_lag >= 4, ErrorCode::InvalidArgument, "text spectrum needs max_lag >= 4");
    const auto sim = lag_similarity(embeddings, max_lag);
    return magnitude_spectrum(difference(sim));
}

std::vector<FrequencyPeak> top_frequencies(const Spectrum& s, std::size_t l) {
    require(l >= 1 && l <= s.size(), ErrorCode::InvalidArgument,
            "top-l must lie in [1, " + std::to_string(s.size()) + "]");
    std::vector<std::size_t> order(s.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (s.amplitudes[a] != s.amplitudes[b]) return s.amplitudes[a] > s.amplitudes[b];
        return s.frequencies[a] < s.frequencies[b];
    });
    std::vector<FrequencyPeak> out;
    out.reserve(l);
    for (std::size_t i = 0; i < l; ++i) out.push_back({s.frequencies[order[i]], s.amplitudes[order[i]]});
    return out;
}

std::size_t default_max_lag(std::size_t length) { return std::min(length - 1, length / 2); }

std::size_t CtrReport::matched_count() const {
    return static_cast<std::size_t>(
        std::count_if(top_text_frequencies.begin(), top_text_frequencies.end(),
                      [](const TextFrequencyMatch& m) { return m.matched; }));
}

CtrReport analyze_ctr(const data::MultimodalDataset& ds, const CtrConfig& cfg) {
    const Matrix& x = ds.series().values();
    CtrReport report;
    report.max_lag = cfg.max_lag == 0 ? default_max_lag(ds.length()) : cfg.max_lag;

    for (std::size_t n = 0; n < x.cols(); ++n) {
        const auto column = x.column(n);
        report.series_spectra.push_back(nms(magnitude_spectrum(difference(column)), cfg.nms_radius));
    }
    report.text_spectrum = text_spectrum(ds.embeddings(), report.max_lag);

    const std::size_t l = std::min(cfg.top_l, report.text_spectrum.size());
    // Text and series spectra live on different grids; a match tolerates one
    // bin of the coarser grid.
    const double tolerance =
        std::max(report.text_spectrum.bin_width(), report.series_spectra.front().bin_width()) * (1.0 + 1e-9);

    for (const auto& peak : top_frequencies(report.text_spectrum, l)) {
        TextFrequencyMatch match{peak, false, {}};
        for (std::size_t n = 0; n < report.series_spectra.size(); ++n) {
            const Spectrum& s = report.series_spectra[n];
            const double top = *std::max_element(s.amplitudes.begin(), s.amplitudes.end());
            if (top <= 0.0) continue;
            for (std::size_t i = 0; i < s.size(); ++i) {
                if (s.amplitudes[i] <= 0.0 || s.amplitudes[i] < cfg.peak_prominence * top) continue;
                if (std::abs(s.frequencies[i] - peak.frequency) <= tolerance) {
                    match.matched = true;
                    match.matched_variables.push_back(n);
                    break;
                }
            }
        }
        report.top_text_frequencies.push_back(std::move(match));
    }
    return report;
}

}  // namespace tats::spectral
