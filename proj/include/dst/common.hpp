#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dst {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Failure reported by (or while talking to) a trajectory sampler.
class SamplerError : public Error {
public:
    using Error::Error;
};

class ProtocolError : public SamplerError {
public:
    using SamplerError::SamplerError;
};

class RemoteError : public SamplerError {
public:
    using SamplerError::SamplerError;
};

class TimeoutError : public SamplerError {
public:
    using SamplerError::SamplerError;
};

class SolverFailure : public Error {
public:
    using Error::Error;
};

/// An action would drive the battery outside its energy bounds.
class InfeasibleAction : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent input data (price files, configs).
class DataError : public Error {
public:
    using Error::Error;
};

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    /// Builds a matrix from nested rows; all rows must have equal length.
    static Matrix from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    /// Rows [first, first + count) as a new matrix.
    Matrix slice_rows(std::size_t first, std::size_t count) const;

    /// Appends the rows of `other`; column counts must agree.
    void append_rows(const Matrix& other);

    bool all_finite() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// SplitMix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);

/// Derives an independent stream seed from a parent seed and a salt.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

/// printf-style formatting into a std::string.
std::string format_double(double value, int precision, char conversion = 'f');

}  // namespace dst
