#include "tats/core_data.hpp"

#include <cmath>
#include <string>

#include "tats/random.hpp"

namespace tats::data {

TimeSeries::TimeSeries(Matrix values, std::optional<std::vector<double>> timestamps)
    : values_(std::move(values)), timestamps_(std::move(timestamps)) {
    require(values_.rows() >= 2, ErrorCode::TooShort, "time series needs at least 2 rows");
    require(values_.cols() >= 1, ErrorCode::InvalidArgument, "time series needs at least 1 variable");
    require(values_.all_finite(), ErrorCode::NonFinite, "time series contains non-finite values");
    if (timestamps_) {
        require(timestamps_->size() == values_.rows(), ErrorCode::ShapeMismatch, "timestamp count");
        for (std::size_t t = 1; t < timestamps_->size(); ++t)
            require((*timestamps_)[t] > (*timestamps_)[t - 1], ErrorCode::InvalidArgument,
                    "timestamps not strictly increasing at row " + std::to_string(t));
    }
}

EmbeddingSequence::EmbeddingSequence(Matrix vectors) : vectors_(std::move(vectors)) {
    require(vectors_.cols() >= 1, ErrorCode::InvalidArgument, "embedding dimension must be >= 1");
    require(vectors_.all_finite(), ErrorCode::NonFinite, "embeddings contain non-finite values");
}

BinaryMask::BinaryMask(Matrix entries) : entries_(std::move(entries)) {
    for (double v : entries_.data())
        require(v == 0.0 || v == 1.0, ErrorCode::InvalidArgument, "mask entries must be 0 or 1");
}

double BinaryMask::observed_fraction() const {
    if (entries_.empty()) return 0.0;
    double observed = 0.0;
    for (double v : entries_.data()) observed += v;
    return observed / static_cast<double>(entries_.size());
}

MultimodalDataset::MultimodalDataset(TimeSeries series, EmbeddingSequence embeddings, SplitPoints split)
    : series_(std::move(series)), embeddings_(std::move(embeddings)), split_(split) {
    require(embeddings_.length() == series_.length(), ErrorCode::ShapeMismatch,
            "embedding rows " + std::to_string(embeddings_.length()) + " vs series rows " +
                std::to_string(series_.length()));
    require(0 < split_.train_end && split_.train_end < split_.val_end && split_.val_end < series_.length(),
            ErrorCode::InvalidArgument, "split points must satisfy 0 < train_end < val_end < T");
}

std::pair<std::size_t, std::size_t> MultimodalDataset::segment(Split which) const {
    switch (which) {
        case Split::Train: return {0, split_.train_end};
        case Split::Val: return {split_.train_end, split_.val_end};
        case Split::Test: return {split_.val_end, series_.length()};
    }
    return {0, 0};
}

std::vector<WindowSample> make_windows(const MultimodalDataset& ds, std::size_t seq_len, std::size_t pred_len,
                                       Split split) {
    require(seq_len > 0 && pred_len > 0, ErrorCode::InvalidArgument, "seq_len and pred_len must be positive");
    const auto [begin, end] = ds.segment(split);
    const std::size_t span = end - begin;
    if (seq_len + pred_len > span)
        fail(ErrorCode::SegmentTooShort, "segment of " + std::to_string(span) + " rows cannot hold seq_len " +
                                             std::to_string(seq_len) + " + pred_len " + std::to_string(pred_len));
    const auto& x = ds.series().values();
    const auto& e = ds.embeddings().vectors();
    std::vector<WindowSample> out;
    out.reserve(span - seq_len - pred_len + 1);
    for (std::size_t s = begin; s + seq_len + pred_len <= end; ++s) {
        out.push_back(WindowSample{s, x.slice_rows(s, s + seq_len), e.slice_rows(s, s + seq_len),
                                   x.slice_rows(s + seq_len, s + seq_len + pred_len)});
    }
    return out;
}

std::vector<ImputeSample> make_impute_windows(const MultimodalDataset& ds, const BinaryMask& mask,
                                              std::size_t seq_len, Split split) {
    const auto& x = ds.series().values();
    const auto& m = mask.entries();
    require(m.rows() == x.rows() && m.cols() == x.cols(), ErrorCode::ShapeMismatch, "mask shape vs series");
    require(seq_len > 0, ErrorCode::InvalidArgument, "seq_len must be positive");
    const auto [begin, end] = ds.segment(split);
    if (seq_len > end - begin)
        fail(ErrorCode::SegmentTooShort, "segment of " + std::to_string(end - begin) +
                                             " rows cannot hold seq_len " + std::to_string(seq_len));
    const auto& e = ds.embeddings().vectors();
    std::vector<ImputeSample> out;
    for (std::size_t s = begin; s + seq_len <= end; ++s)
        out.push_back(ImputeSample{s, x.slice_rows(s, s + seq_len), m.slice_rows(s, s + seq_len),
                                   e.slice_rows(s, s + seq_len)});
    return out;
}

SplitPoints chronological_split(std::size_t length, SplitRatios ratios) {
    const double sum = ratios.train + ratios.val + ratios.test;
    if (!(ratios.train > 0 && ratios.val > 0 && ratios.test > 0) || std::abs(sum - 1.0) > 1e-9)
        fail(ErrorCode::BadRatios, "split ratios must be positive and sum to 1");
    // 0.7 + 0.1 is 0.7999...; the slack keeps floor() from losing a row to rounding.
    const double n = static_cast<double>(length);
    const auto cut = [n](double fraction) { return static_cast<std::size_t>(std::floor(n * fraction + 1e-9)); };
    return {cut(ratios.train), cut(ratios.train + ratios.val)};
}

BinaryMask generate_mask(std::size_t rows, std::size_t cols, double missing_ratio, std::uint64_t seed) {
    require(missing_ratio > 0.0 && missing_ratio < 1.0, ErrorCode::InvalidArgument,
            "missing_ratio must lie in (0, 1)");
    Rng rng(seed, stream::kMask);
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.bernoulli(1.0 - missing_ratio) ? 1.0 : 0.0;
    return BinaryMask(std::move(m));
}

}  // namespace tats::data
