#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "tats/error.hpp"

namespace tats {

/// Dense row-major matrix of doubles. Rows index time, columns index channels
/// unless a function documents otherwise.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::vector<double> column(std::size_t c) const;
    void set_column(std::size_t c, std::span<const double> values);

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    /// Rows [begin, end) as a new matrix.
    Matrix slice_rows(std::size_t begin, std::size_t end) const;
    /// Columns [begin, end) as a new matrix.
    Matrix slice_cols(std::size_t begin, std::size_t end) const;

    bool all_finite() const noexcept;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Column-wise concatenation [left | right]; row counts must agree.
Matrix hconcat(const Matrix& left, const Matrix& right);

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        fail(ErrorCode::ShapeMismatch, std::string(what) + ": " + std::to_string(a.rows()) + "x" +
                                           std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                           "x" + std::to_string(b.cols()));
}

}  // namespace tats
