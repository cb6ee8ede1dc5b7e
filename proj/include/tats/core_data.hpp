#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "tats/matrix.hpp"

namespace tats::data {

/// T x N numerical series with optional strictly increasing timestamps.
class TimeSeries {
public:
    explicit TimeSeries(Matrix values, std::optional<std::vector<double>> timestamps = std::nullopt);

    const Matrix& values() const noexcept { return values_; }
    const std::optional<std::vector<double>>& timestamps() const noexcept { return timestamps_; }
    std::size_t length() const noexcept { return values_.rows(); }
    std::size_t variables() const noexcept { return values_.cols(); }

private:
    Matrix values_;
    std::optional<std::vector<double>> timestamps_;
};

/// T x d_text per-timestamp text embeddings.
class EmbeddingSequence {
public:
    explicit EmbeddingSequence(Matrix vectors);

    const Matrix& vectors() const noexcept { return vectors_; }
    std::size_t length() const noexcept { return vectors_.rows(); }
    std::size_t dim() const noexcept { return vectors_.cols(); }

private:
    Matrix vectors_;
};

/// 1 = observed, 0 = missing. Stored as doubles so it multiplies directly.
class BinaryMask {
public:
    explicit BinaryMask(Matrix entries);

    const Matrix& entries() const noexcept { return entries_; }
    double observed_fraction() const;

private:
    Matrix entries_;
};

struct SplitPoints {
    std::size_t train_end = 0;
    std::size_t val_end = 0;
    friend bool operator==(const SplitPoints&, const SplitPoints&) = default;
};

enum class Split { Train, Val, Test };

class MultimodalDataset {
public:
    MultimodalDataset(TimeSeries series, EmbeddingSequence embeddings, SplitPoints split);

    const TimeSeries& series() const noexcept { return series_; }
    const EmbeddingSequence& embeddings() const noexcept { return embeddings_; }
    SplitPoints split() const noexcept { return split_; }
    std::size_t length() const noexcept { return series_.length(); }

    /// Half-open index range [begin, end) of one split segment.
    std::pair<std::size_t, std::size_t> segment(Split which) const;

private:
    TimeSeries series_;
    EmbeddingSequence embeddings_;
    SplitPoints split_;
};

struct WindowSample {
    std::size_t start = 0;  ///< absolute index of the first input row
    Matrix input_series;    ///< L x N
    Matrix input_embeddings;///< L x d_text
    Matrix target;          ///< H x N for forecasting
};

/// Every stride-1 forecasting window fully inside the chosen segment, in
/// chronological order.
std::vector<WindowSample> make_windows(const MultimodalDataset& ds, std::size_t seq_len, std::size_t pred_len,
                                       Split split);

/// Imputation windows: target is unused; values and mask are both L x N.
struct ImputeSample {
    std::size_t start = 0;
    Matrix values;
    Matrix mask;
    Matrix input_embeddings;
};

std::vector<ImputeSample> make_impute_windows(const MultimodalDataset& ds, const BinaryMask& mask,
                                              std::size_t seq_len, Split split);

struct SplitRatios {
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;
};

SplitPoints chronological_split(std::size_t length, SplitRatios ratios = {});

/// I.i.d. Bernoulli(1 - missing_ratio) observation mask.
BinaryMask generate_mask(std::size_t rows, std::size_t cols, double missing_ratio, std::uint64_t seed);

}  // namespace tats::data
