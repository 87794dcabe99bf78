#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

namespace air {

// Dense row-major float32 matrix. Every tensor in the pipeline (hidden
// states, visual tokens, FFN weights, cost matrices) is one of these.
class Matrix {
public:
    Matrix() = default;

    // Zero-filled.
    Matrix(std::size_t rows, std::size_t cols);

    // Takes ownership of `data`; rejects size mismatch and non-finite entries.
    Matrix(std::size_t rows, std::size_t cols, std::vector<float> data);

    static Matrix from_rows(std::initializer_list<std::initializer_list<float>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    float operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
    float& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }

    std::span<const float> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }
    std::span<float> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<const float> data() const noexcept { return data_; }
    std::span<float> data() noexcept { return data_; }

    bool all_finite() const noexcept;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<float> data_;
};

// Rows of `m` picked by `indices`, in the given order.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices);

// Row-wise concatenation; all inputs must share a column count (or be empty).
Matrix vstack(std::span<const Matrix> parts, std::size_t cols);

Matrix transpose(const Matrix& m);

// Elementwise a + b.
Matrix add(const Matrix& a, const Matrix& b);

// Elementwise a - b.
Matrix subtract(const Matrix& a, const Matrix& b);

Matrix scale(const Matrix& m, float factor);

// A[m x k] * B[k x n]. 64-bit accumulation, sequential over k; rows are
// distributed across OpenMP threads so the result does not depend on the
// thread count.
Matrix matmul(const Matrix& a, const Matrix& b);

// A[m x k] * B[n x k]^T.
Matrix matmul_transposed(const Matrix& a, const Matrix& b);

// L2 norm of each row, accumulated in double.
std::vector<double> row_norms(const Matrix& m);

// out(k, n) = 1 - cos(a_k, b_n). A zero-norm row has cosine 0 against
// everything, so its cost row/column is exactly 1.
Matrix cosine_cost(const Matrix& a, const Matrix& b);

// Dot product of two equal-length float spans, accumulated in double.
double dot(std::span<const float> x, std::span<const float> y) noexcept;

double cosine_similarity(std::span<const float> x, std::span<const float> y) noexcept;

// Identity matrix of order n.
Matrix identity(std::size_t n);

// Sequential reference kernels. Same arithmetic as the parallel versions,
// without any OpenMP; kept as the baseline for tests and benchmarks.
namespace serial {
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_transposed(const Matrix& a, const Matrix& b);
Matrix cosine_cost(const Matrix& a, const Matrix& b);
}  // namespace serial

}  // namespace air
