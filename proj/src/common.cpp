#include "dst/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace dst {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw InvalidInput("matrix data size does not match shape");
    }
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) {
        return {};
    }
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols_) {
            throw InvalidInput("ragged rows");
        }
        std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    return m;
}

Matrix Matrix::slice_rows(std::size_t first, std::size_t count) const {
    if (first + count > rows_) {
        throw InvalidInput("row slice out of range");
    }
    Matrix out(count, cols_);
    std::copy(data_.begin() + static_cast<std::ptrdiff_t>(first * cols_),
              data_.begin() + static_cast<std::ptrdiff_t>((first + count) * cols_),
              out.data_.begin());
    return out;
}

void Matrix::append_rows(const Matrix& other) {
    if (other.rows_ == 0) {
        return;
    }
    if (rows_ == 0 && cols_ == 0) {
        *this = other;
        return;
    }
    if (other.cols_ != cols_) {
        throw InvalidInput("column mismatch in append_rows");
    }
    data_.insert(data_.end(), other.data_.begin(), other.data_.end());
    rows_ += other.rows_;
}

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    return splitmix64(splitmix64(seed) ^ (salt * 0xd1b54a32d192ed03ULL + 0x8cb92ba72f3d8dd7ULL));
}

std::string format_double(double value, int precision, char conversion) {
    const char fmt[] = {'%', '.', '*', conversion, '\0'};
    char buf[64];
    const int n = std::snprintf(buf, sizeof buf, fmt, precision, value);
    std::string out(buf, static_cast<std::size_t>(std::max(n, 0)));
    if (out == "-0" || out.find_first_not_of("-0.") == std::string::npos) {
        // normalize negative zero so goldens do not depend on rounding sign
        if (!out.empty() && out.front() == '-') {
            out.erase(0, 1);
        }
    }
    return out;
}

}  // namespace dst
