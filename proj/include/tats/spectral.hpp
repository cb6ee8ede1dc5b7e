#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tats/core_data.hpp"

namespace tats::spectral {

/// One-sided magnitude spectrum. Frequencies are in cycles per sample.
struct Spectrum {
    std::vector<double> frequencies;
    std::vector<double> amplitudes;

    std::size_t size() const noexcept { return frequencies.size(); }
    /// Spacing between adjacent bins (1 / transform length).
    double bin_width() const noexcept { return frequencies.empty() ? 0.0 : frequencies.front(); }
};

struct FrequencyPeak {
    double frequency = 0.0;
    double amplitude = 0.0;
    friend bool operator==(const FrequencyPeak&, const FrequencyPeak&) = default;
};

/// out[t] = x[t+1] - x[t]
std::vector<double> difference(std::span<const double> x);

/// |DFT(x)| at k/T for k = 1..floor(T/2). The DC bin is dropped.
Spectrum magnitude_spectrum(std::span<const double> x);

/// Keeps a bin only if it is strictly larger than every bin within +-radius.
Spectrum nms(const Spectrum& s, std::size_t radius);

/// Sim(k) for k = 1..max_lag: mean cosine similarity between mean-centered
/// embeddings k steps apart. Pairs touching a zero centered row are skipped.
std::vector<double> lag_similarity(const data::EmbeddingSequence& embeddings, std::size_t max_lag);

/// magnitude_spectrum(difference(lag_similarity(E, max_lag)))
Spectrum text_spectrum(const data::EmbeddingSequence& embeddings, std::size_t max_lag);

/// The l largest-amplitude bins, descending; equal amplitudes go to the lower frequency.
std::vector<FrequencyPeak> top_frequencies(const Spectrum& s, std::size_t l);

/// min(T - 1, T / 2)
std::size_t default_max_lag(std::size_t length);

struct CtrConfig {
    std::size_t nms_radius = 2;
    std::size_t top_l = 4;
    std::size_t max_lag = 0;  ///< 0 selects default_max_lag(T)
    /// A series NMS peak takes part in matching only if its amplitude is at
    /// least this fraction of the variable's largest peak.
    double peak_prominence = 0.5;
};

struct TextFrequencyMatch {
    FrequencyPeak peak;
    bool matched = false;
    std::vector<std::size_t> matched_variables;
};

struct CtrReport {
    std::vector<Spectrum> series_spectra;  ///< per variable, differenced then NMS
    Spectrum text_spectrum;
    std::vector<TextFrequencyMatch> top_text_frequencies;
    std::size_t max_lag = 0;

    std::size_t matched_count() const;
};

CtrReport analyze_ctr(const data::MultimodalDataset& ds, const CtrConfig& cfg = {});

}  // namespace tats::spectral
