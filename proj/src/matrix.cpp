#include "air/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "air/error.hpp"

namespace air {
namespace {

void require_finite(std::span<const float> values, const char* what) {
    for (float v : values) {
        if (!std::isfinite(v)) fail(ErrorCode::Domain, std::string(what) + ": non-finite entry");
    }
}

std::string shape_of(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        fail(ErrorCode::Shape, std::string(op) + ": " + shape_of(a) + " vs " + shape_of(b));
    }
}

// One output row of A * B. Shared by the parallel and serial kernels so
// both produce identical bits.
inline void matmul_row(const Matrix& a, const Matrix& b, std::size_t i, std::vector<double>& acc,
                       Matrix& out) {
    const std::size_t n = b.cols();
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t p = 0; p < a.cols(); ++p) {
        const double aip = a(i, p);
        if (aip == 0.0) continue;
        const float* brow = b.row(p).data();
        for (std::size_t j = 0; j < n; ++j) acc[j] += aip * static_cast<double>(brow[j]);
    }
    for (std::size_t j = 0; j < n; ++j) out(i, j) = static_cast<float>(acc[j]);
}

inline void matmul_transposed_row(const Matrix& a, const Matrix& b, std::size_t i, Matrix& out) {
    const auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = static_cast<float>(dot(arow, b.row(j)));
}

inline void cosine_cost_row(const Matrix& a, const Matrix& b, const std::vector<double>& na,
                            const std::vector<double>& nb, std::size_t k, Matrix& out) {
    const auto arow = a.row(k);
    for (std::size_t n = 0; n < b.rows(); ++n) {
        double cos = 0.0;
        if (na[k] > 0.0 && nb[n] > 0.0) cos = dot(arow, b.row(n)) / (na[k] * nb[n]);
        // Rounding can push |cos| a hair past 1.
        cos = std::clamp(cos, -1.0, 1.0);
        out(k, n) = static_cast<float>(1.0 - cos);
    }
}

void check_matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) fail(ErrorCode::Shape, "matmul: " + shape_of(a) + " * " + shape_of(b));
}

void check_matmul_transposed(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        fail(ErrorCode::Shape, "matmul_transposed: " + shape_of(a) + " * (" + shape_of(b) + ")^T");
    }
}

void check_cosine(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) fail(ErrorCode::Shape, "cosine_cost: " + shape_of(a) + " vs " + shape_of(b));
    if (a.cols() == 0) fail(ErrorCode::Shape, "cosine_cost: zero-dimensional rows");
    require_finite(a.data(), "cosine_cost");
    require_finite(b.data(), "cosine_cost");
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        fail(ErrorCode::Shape, "matrix data length " + std::to_string(data_.size()) + " != " +
                                   std::to_string(rows) + "x" + std::to_string(cols));
    }
    require_finite(data_, "matrix");
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<float>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<float> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) fail(ErrorCode::Shape, "from_rows: ragged rows");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
}

bool Matrix::all_finite() const noexcept {
    for (float v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices) {
    Matrix out(indices.size(), m.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= m.rows()) fail(ErrorCode::Shape, "gather_rows: index out of range");
        std::copy_n(m.row(indices[i]).data(), m.cols(), out.row(i).data());
    }
    return out;
}

Matrix vstack(std::span<const Matrix> parts, std::size_t cols) {
    std::size_t rows = 0;
    for (const auto& p : parts) {
        if (p.rows() == 0) continue;
        if (p.cols() != cols) fail(ErrorCode::Shape, "vstack: column mismatch");
        rows += p.rows();
    }
    Matrix out(rows, cols);
    std::size_t at = 0;
    for (const auto& p : parts) {
        std::copy(p.data().begin(), p.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(at * cols));
        at += p.rows();
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
    return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix out = a;
    auto o = out.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
    return out;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "subtract");
    Matrix out = a;
    auto o = out.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bd[i];
    return out;
}

Matrix scale(const Matrix& m, float factor) {
    Matrix out = m;
    for (float& v : out.data()) v *= factor;
    return out;
}

Matrix identity(std::size_t n) {
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0f;
    return out;
}

double dot(std::span<const float> x, std::span<const float> y) noexcept {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += static_cast<double>(x[i]) * static_cast<double>(y[i]);
    return acc;
}

double cosine_similarity(std::span<const float> x, std::span<const float> y) noexcept {
    const double nx = std::sqrt(dot(x, x));
    const double ny = std::sqrt(dot(y, y));
    if (nx == 0.0 || ny == 0.0) return 0.0;
    return std::clamp(dot(x, y) / (nx * ny), -1.0, 1.0);
}

std::vector<double> row_norms(const Matrix& m) {
    std::vector<double> out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) out[i] = std::sqrt(dot(m.row(i), m.row(i)));
    return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    check_matmul(a, b);
    Matrix out(a.rows(), b.cols());
    const auto rows = static_cast<std::int64_t>(a.rows());
#pragma omp parallel
    {
        std::vector<double> acc(b.cols());
#pragma omp for schedule(static)
        for (std::int64_t i = 0; i < rows; ++i) matmul_row(a, b, static_cast<std::size_t>(i), acc, out);
    }
    return out;
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
    check_matmul_transposed(a, b);
    Matrix out(a.rows(), b.rows());
    const auto rows = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < rows; ++i) matmul_transposed_row(a, b, static_cast<std::size_t>(i), out);
    return out;
}

Matrix cosine_cost(const Matrix& a, const Matrix& b) {
    check_cosine(a, b);
    const auto na = row_norms(a);
    const auto nb = row_norms(b);
    Matrix out(a.rows(), b.rows());
    const auto rows = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for schedule(static)
    for (std::int64_t k = 0; k < rows; ++k) cosine_cost_row(a, b, na, nb, static_cast<std::size_t>(k), out);
    return out;
}

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
    check_matmul(a, b);
    Matrix out(a.rows(), b.cols());
    std::vector<double> acc(b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) matmul_row(a, b, i, acc, out);
    return out;
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
    check_matmul_transposed(a, b);
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) matmul_transposed_row(a, b, i, out);
    return out;
}

Matrix cosine_cost(const Matrix& a, const Matrix& b) {
    check_cosine(a, b);
    const auto na = row_norms(a);
    const auto nb = row_norms(b);
    Matrix out(a.rows(), b.rows());
    for (std::size_t k = 0; k < a.rows(); ++k) cosine_cost_row(a, b, na, nb, k, out);
    return out;
}

}  // namespace serial
}  // namespace air
