#pragma once

#include <cstdint>
#include <vector>

#include "tats/core_data.hpp"
#include "tats/matrix.hpp"
#include "tats/spectral.hpp"

namespace tats::transport {

/// Discrete distribution on [0, 1]: frequency / Nyquist carrying amplitude mass.
struct NormalizedSpectrum {
    std::vector<double> support;
    std::vector<double> weights;
};

struct TransportPlan {
    Matrix gamma;  ///< n x m, rows follow p, columns follow q
};

struct LpSolution {
    double value = 0.0;
    TransportPlan plan;
};

/// Drops zero-amplitude bins, rescales frequencies by Nyquist and amplitudes to unit mass.
NormalizedSpectrum normalize_spectrum(const spectral::Spectrum& s);

/// Checks the NormalizedSpectrum invariants; throws InvalidArgument.
void validate(const NormalizedSpectrum& p);

/// Exact W1 between two distributions on the line: integral of |F_p - F_q|.
double wasserstein_1d(const NormalizedSpectrum& p, const NormalizedSpectrum& q);

/// Solves the transport LP directly with a two-phase simplex. Test scale only
/// (n * m <= 64).
LpSolution lp_oracle(const NormalizedSpectrum& p, const NormalizedSpectrum& q);

struct TtConfig {
    std::size_t max_lag = 0;  ///< 0 selects spectral::default_max_lag(T)
};

/// Per-variable differenced magnitude spectra, each scaled to unit mass, then averaged.
spectral::Spectrum series_spectrum(const Matrix& values);

double tt_wasserstein(const data::TimeSeries& series, const data::EmbeddingSequence& embeddings,
                      const TtConfig& cfg = {});
double tt_wasserstein(const data::MultimodalDataset& ds, const TtConfig& cfg = {});

struct ShuffleReport {
    double original = 0.0;
    std::vector<double> ts_shuffled;
    std::vector<double> text_shuffled;
    double ts_shuffled_mean = 0.0;
    double text_shuffled_mean = 0.0;
    double ratio_percent = 0.0;
};

/// 100 * original / mean(ts_shuffled_mean, text_shuffled_mean)
double shuffle_ratio_percent(double original, double ts_shuffled_mean, double text_shuffled_mean);

/// Row permutation of a matrix, seeded.
Matrix permute_rows(const Matrix& m, std::uint64_t seed, std::uint64_t stream);

ShuffleReport shuffle_ratio(const data::TimeSeries& series, const data::EmbeddingSequence& embeddings,
                            const std::vector<std::uint64_t>& seeds, const TtConfig& cfg = {});

}  // namespace tats::transport
