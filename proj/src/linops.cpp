#include "elmsb/linops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace elmsb {

Matrix::Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw std::invalid_argument("Matrix: " + std::to_string(data_.size()) + " entries for shape " +
                                    shape_str());
    }
    if (!all_finite()) {
        throw std::invalid_argument("Matrix: non-finite entry in " + shape_str() + " data");
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
    Matrix m(diag.size(), diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
    return m;
}

Matrix Matrix::column(std::span<const double> values) {
    return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

std::vector<double> Matrix::col(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

double Matrix::frobenius_norm() const {
    double scale = 0.0;
    for (double v : data_) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) return 0.0;
    double acc = 0.0;
    for (double v : data_) acc += (v / scale) * (v / scale);
    return scale * std::sqrt(acc);
}

bool Matrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Matrix::shape_str() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                                    b.shape_str());
    }
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap view(const Matrix& m) { return ConstMap(m.data().data(), m.rows(), m.cols()); }
MutMap view(Matrix& m) { return MutMap(m.data().data(), m.rows(), m.cols()); }

Matrix gemm(const Matrix& a, bool trans_a, const Matrix& b, bool trans_b) {
    const std::size_t m = trans_a ? a.cols() : a.rows();
    const std::size_t ka = trans_a ? a.rows() : a.cols();
    const std::size_t kb = trans_b ? b.cols() : b.rows();
    const std::size_t n = trans_b ? b.rows() : b.cols();
    if (ka != kb) {
        throw std::invalid_argument("matmul: inner dimension mismatch " + a.shape_str() +
                                    (trans_a ? "ᵀ" : "") + " * " + b.shape_str() + (trans_b ? "ᵀ" : ""));
    }
    Matrix c(m, n);
    if (m == 0 || n == 0 || ka == 0) return c;
    auto out = view(c);
    if (trans_a && trans_b) out.noalias() = view(a).transpose() * view(b).transpose();
    else if (trans_a) out.noalias() = view(a).transpose() * view(b);
    else if (trans_b) out.noalias() = view(a) * view(b).transpose();
    else out.noalias() = view(a) * view(b);
    return c;
}

}  // namespace

Matrix operator+(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "operator+");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
    return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "operator-");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] -= b.data()[i];
    return c;
}

Matrix operator*(double s, const Matrix& a) {
    Matrix c = a;
    for (double& v : c.data()) v *= s;
    return c;
}

double PinvOptions::effective(std::size_t rows, std::size_t cols) const {
    if (rcond > 0.0) return rcond;
    return static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon();
}

Matrix matmul(const Matrix& a, const Matrix& b) { return gemm(a, false, b, false); }
Matrix matmul_tn(const Matrix& a, const Matrix& b) { return gemm(a, true, b, false); }
Matrix matmul_nt(const Matrix& a, const Matrix& b) { return gemm(a, false, b, true); }

SvdResult svd_thin(const Matrix& a) {
    if (!a.all_finite()) throw std::invalid_argument("svd_thin: non-finite input " + a.shape_str());
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    const std::size_t r = std::min(m, n);
    SvdResult out{Matrix(m, r), std::vector<double>(r), Matrix(r, n)};
    if (r == 0) return out;

    Eigen::BDCSVD<RowMat> svd(view(a), Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) {
        throw std::runtime_error("svd_thin: divide-and-conquer SVD did not converge on " + a.shape_str());
    }
    view(out.u) = svd.matrixU();
    view(out.v_t) = svd.matrixV().transpose();
    Eigen::Map<Eigen::VectorXd>(out.singular_values.data(), static_cast<Eigen::Index>(r)) = svd.singularValues();
    return out;
}

std::size_t numerical_rank(std::span<const double> singular_values, double rcond) {
    if (singular_values.empty()) return 0;
    const double cutoff = rcond * singular_values.front();
    return static_cast<std::size_t>(
        std::count_if(singular_values.begin(), singular_values.end(), [&](double s) { return s > cutoff; }));
}

Matrix pinv(const Matrix& a, const PinvOptions& opts) {
    const SvdResult svd = svd_thin(a);
    const std::size_t rank = numerical_rank(svd.singular_values, opts.effective(a.rows(), a.cols()));
    // V_r diag(1/s) U_rᵀ, accumulated as (diag(1/s) V_rᵀ)ᵀ U_rᵀ
    Matrix scaled_vt(rank, a.cols());
    Matrix u_r(a.rows(), rank);
    for (std::size_t i = 0; i < rank; ++i) {
        const double inv = 1.0 / svd.singular_values[i];
        for (std::size_t c = 0; c < a.cols(); ++c) scaled_vt(i, c) = svd.v_t(i, c) * inv;
        for (std::size_t r = 0; r < a.rows(); ++r) u_r(r, i) = svd.u(r, i);
    }
    if (rank == 0) return Matrix(a.cols(), a.rows());
    return matmul_tn(scaled_vt, u_r.transposed());
}

Matrix solve_least_squares(const Matrix& h, const Matrix& t, const PinvOptions& opts, std::size_t* rank_out) {
    if (h.rows() != t.rows()) {
        throw std::invalid_argument("solve_least_squares: row mismatch H " + h.shape_str() + " vs T " +
                                    t.shape_str());
    }
    const SvdResult svd = svd_thin(h);
    const std::size_t rank = numerical_rank(svd.singular_values, opts.effective(h.rows(), h.cols()));
    if (rank_out) *rank_out = rank;

    // coeffs = diag(1/s_r) U_rᵀ T
    Matrix ut_t = matmul_tn(svd.u, t);
    Matrix coeffs(rank, t.cols());
    for (std::size_t i = 0; i < rank; ++i) {
        const double inv = 1.0 / svd.singular_values[i];
        for (std::size_t c = 0; c < t.cols(); ++c) coeffs(i, c) = ut_t(i, c) * inv;
    }
    Matrix vt_r(rank, h.cols());
    std::copy_n(svd.v_t.data().begin(), rank * h.cols(), vt_r.data().begin());
    if (rank == 0) return Matrix(h.cols(), t.cols());
    return matmul_tn(vt_r, coeffs);
}

SymEigen eig_sym(const Matrix& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("eig_sym: non-square " + a.shape_str());
    if (!a.all_finite()) throw std::invalid_argument("eig_sym: non-finite input");
    const std::size_t n = a.rows();
    SymEigen out{std::vector<double>(n), Matrix(n, n)};
    if (n == 0) return out;
    Eigen::SelfAdjointEigenSolver<RowMat> solver(view(a));
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("eig_sym: tridiagonal QR iteration did not converge on " + a.shape_str());
    }
    // Solver order is ascending; flip to non-increasing.
    const auto& vals = solver.eigenvalues();
    const auto& vecs = solver.eigenvectors();
    for (std::size_t i = 0; i < n; ++i) {
        const auto src = static_cast<Eigen::Index>(n - 1 - i);
        out.values[i] = vals(src);
        for (std::size_t r = 0; r < n; ++r) out.vectors(r, i) = vecs(static_cast<Eigen::Index>(r), src);
    }
    return out;
}

}  // namespace elmsb
