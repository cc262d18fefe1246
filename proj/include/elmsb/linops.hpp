#pragma once

// Dense real linear algebra used by the ELM output-layer solve and the NTK
// analysis. Row-major double storage; heavy kernels are delegated to Eigen.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace elmsb {

/// Dense row-major matrix of finite doubles.
class Matrix {
public:
    Matrix() = default;
    /// Zero-filled rows x cols matrix.
    Matrix(std::size_t rows, std::size_t cols);
    /// Takes ownership of row-major data; throws if the size does not match or
    /// any entry is NaN/Inf.
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> diag);
    /// Single column built from a vector.
    static Matrix column(std::span<const double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    std::vector<double> col(std::size_t c) const;

    Matrix transposed() const;
    double frobenius_norm() const;
    bool all_finite() const noexcept;

    /// "RxC" for diagnostics.
    std::string shape_str() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

struct SvdResult {
    Matrix u;                          // m x r
    std::vector<double> singular_values;  // r = min(m, n), non-increasing
    Matrix v_t;                        // r x n
};

/// Relative singular-value cutoff. A non-positive rcond selects the default
/// max(rows, cols) * machine epsilon at the point of use.
struct PinvOptions {
    double rcond = 0.0;

    double effective(std::size_t rows, std::size_t cols) const;
};

/// a * b. Throws std::invalid_argument naming both shapes on mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ * b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a * bᵀ without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// Thin SVD via divide and conquer. Throws std::runtime_error on
/// non-convergence.
SvdResult svd_thin(const Matrix& a);

/// Number of singular values above rcond * sigma_max.
std::size_t numerical_rank(std::span<const double> singular_values, double rcond);

/// Moore-Penrose pseudoinverse V diag(1/s) Uᵀ with small singular values zeroed.
Matrix pinv(const Matrix& a, const PinvOptions& opts = {});

/// Minimum-norm least-squares solution of h * beta = t. The optional rank out
/// parameter receives the number of retained singular values.
Matrix solve_least_squares(const Matrix& h, const Matrix& t, const PinvOptions& opts = {},
                           std::size_t* rank = nullptr);

struct SymEigen {
    std::vector<double> values;  // non-increasing
    Matrix vectors;              // column i pairs with values[i]
};

/// Eigendecomposition of a symmetric matrix (lower triangle is read).
SymEigen eig_sym(const Matrix& a);

}  // namespace elmsb
