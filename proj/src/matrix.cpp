#include "tats/matrix.hpp"

#include <cmath>
#include <string>

namespace tats {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    require(data_.size() == rows_ * cols_, ErrorCode::ShapeMismatch,
            "matrix payload of " + std::to_string(data_.size()) + " values does not fill " +
                std::to_string(rows_) + "x" + std::to_string(cols_));
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        require(r.size() == cols_, ErrorCode::ShapeMismatch, "ragged matrix literal");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

std::vector<double> Matrix::column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

void Matrix::set_column(std::size_t c, std::span<const double> values) {
    require(values.size() == rows_, ErrorCode::ShapeMismatch, "set_column length");
    for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = values[r];
}

Matrix Matrix::slice_rows(std::size_t begin, std::size_t end) const {
    require(begin <= end && end <= rows_, ErrorCode::InvalidArgument, "row slice out of range");
    return Matrix(end - begin, cols_,
                  std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(begin * cols_),
                                      data_.begin() + static_cast<std::ptrdiff_t>(end * cols_)));
}

Matrix Matrix::slice_cols(std::size_t begin, std::size_t end) const {
    require(begin <= end && end <= cols_, ErrorCode::InvalidArgument, "column slice out of range");
    Matrix out(rows_, end - begin);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = begin; c < end; ++c) out(r, c - begin) = (*this)(r, c);
    return out;
}

bool Matrix::all_finite() const noexcept {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Matrix hconcat(const Matrix& left, const Matrix& right) {
    require(left.rows() == right.rows(), ErrorCode::ShapeMismatch,
            "hconcat rows " + std::to_string(left.rows()) + " vs " + std::to_string(right.rows()));
    Matrix out(left.rows(), left.cols() + right.cols());
    for (std::size_t r = 0; r < left.rows(); ++r) {
        for (std::size_t c = 0; c < left.cols(); ++c) out(r, c) = left(r, c);
        for (std::size_t c = 0; c < right.cols(); ++c) out(r, left.cols() + c) = right(r, c);
    }
    return out;
}

}  // namespace tats
