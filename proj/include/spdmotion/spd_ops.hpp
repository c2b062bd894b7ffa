// Numerical operations on symmetric and symmetric positive-definite matrices:
// Gaussian embedding of sample statistics, eigenvalue rectification, log/exp
// maps, isometric vectorization, and Stiefel-weighted bilinear compression.
//
// All eigendecompositions use Eigen's self-adjoint solver; eigenvalues come out
// sorted ascending, which keeps downstream serialization deterministic.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace spdmotion {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

constexpr double kSymTol = 1e-12;
constexpr double kStiefelTol = 1e-10;

inline bool is_symmetric(const Matrix& m, double tol = kSymTol) {
    if (m.rows() != m.cols()) return false;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

/// Square matrix guaranteed symmetric by construction (symmetrized on entry,
/// rejected if the asymmetry exceeds kSymTol relative to the largest entry).
class SymMatrix {
public:
    static SymMatrix from(const Matrix& m) {
        if (m.rows() != m.cols())
            throw std::invalid_argument("SymMatrix: matrix is not square");
        if (!is_symmetric(m))
            throw std::invalid_argument("SymMatrix: matrix is not symmetric");
        return SymMatrix(0.5 * (m + m.transpose()));
    }

    /// For values that are symmetric by algebraic construction; skips the check.
    static SymMatrix from_symmetric_unchecked(Matrix m) { return SymMatrix(std::move(m)); }

    const Matrix& mat() const { return m_; }
    Eigen::Index dim() const { return m_.rows(); }

private:
    explicit SymMatrix(Matrix m) : m_(std::move(m)) {}
    Matrix m_;
};

/// Symmetric matrix whose spectrum is strictly positive. Produced by the ops
/// below, which guarantee positive-definiteness structurally; `checked` is the
/// validating entry point for untrusted matrices.
class SpdMatrix {
public:
    static SpdMatrix checked(const Matrix& m, double tol = 0.0) {
        SymMatrix s = SymMatrix::from(m);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(s.mat(), Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().minCoeff() <= tol)
            throw std::invalid_argument("SpdMatrix: smallest eigenvalue is not positive");
        return SpdMatrix(s.mat());
    }

    /// For values that are positive definite by construction.
    static SpdMatrix from_spd_unchecked(Matrix m) { return SpdMatrix(std::move(m)); }

    const Matrix& mat() const { return m_; }
    Eigen::Index dim() const { return m_.rows(); }
    SymMatrix as_sym() const { return SymMatrix::from_symmetric_unchecked(m_); }

private:
    explicit SpdMatrix(Matrix m) : m_(std::move(m)) {}
    Matrix m_;
};

/// Mean and covariance of a sample set, with the sample count they came from.
struct GaussianStats {
    Vector mean;
    Matrix covariance;  // population covariance, divisor n
    std::size_t count = 0;
};

/// Matrix with orthonormal rows (W * W^T = I), rows <= cols.
class StiefelWeight {
public:
    static StiefelWeight from(const Matrix& w) {
        if (w.rows() > w.cols())
            throw std::invalid_argument("StiefelWeight: rows must not exceed cols");
        const Matrix gram = w * w.transpose();
        const Matrix eye = Matrix::Identity(w.rows(), w.rows());
        if ((gram - eye).cwiseAbs().maxCoeff() > kStiefelTol)
            throw std::invalid_argument("StiefelWeight: rows are not orthonormal");
        return StiefelWeight(w);
    }

    static StiefelWeight from_orthonormal_unchecked(Matrix w) { return StiefelWeight(std::move(w)); }

    const Matrix& mat() const { return w_; }
    Eigen::Index rows() const { return w_.rows(); }
    Eigen::Index cols() const { return w_.cols(); }

private:
    explicit StiefelWeight(Matrix w) : w_(std::move(w)) {}
    Matrix w_;
};

/// Ascending eigendecomposition of a symmetric matrix.
struct EigenDecomp {
    Vector values;
    Matrix vectors;  // columns are eigenvectors, same order as values
};

inline EigenDecomp sym_eig(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("sym_eig: eigendecomposition failed");
    return {solver.eigenvalues(), solver.eigenvectors()};
}

inline GaussianStats gaussian_stats(const Matrix& samples) {
    // samples: d x n, one sample per column
    if (samples.cols() == 0) throw std::invalid_argument("empty aggregation");
    const double n = static_cast<double>(samples.cols());
    Vector mean = samples.rowwise().mean();
    Matrix centered = samples.colwise() - mean;
    Matrix cov = (centered * centered.transpose()) / n;
    cov = 0.5 * (cov + cov.transpose());
    return {std::move(mean), std::move(cov), static_cast<std::size_t>(samples.cols())};
}

/// Embed sample statistics into the (d+1)x(d+1) block matrix
/// [[Sigma + mu mu^T, mu], [mu^T, 1]]. The top-left block equals the second
/// moment (1/n) sum x x^T, so the whole matrix is (1/n) sum [x;1][x;1]^T:
/// symmetric PSD always, PD iff the covariance is PD.
inline SpdMatrix gaussian_aggregate(const Matrix& samples) {
    if (samples.cols() == 0) throw std::invalid_argument("empty aggregation");
    const Eigen::Index d = samples.rows();
    const double n = static_cast<double>(samples.cols());
    Vector mean = samples.rowwise().mean();
    Matrix second_moment = (samples * samples.transpose()) / n;
    Matrix out(d + 1, d + 1);
    out.topLeftCorner(d, d) = 0.5 * (second_moment + second_moment.transpose());
    out.topRightCorner(d, 1) = mean;
    out.bottomLeftCorner(1, d) = mean.transpose();
    out(d, d) = 1.0;
    return SpdMatrix::from_spd_unchecked(std::move(out));
}

inline SpdMatrix gaussian_aggregate(const std::vector<Vector>& samples) {
    if (samples.empty()) throw std::invalid_argument("empty aggregation");
    const Eigen::Index d = samples.front().size();
    Matrix m(d, static_cast<Eigen::Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].size() != d)
            throw std::invalid_argument("gaussian_aggregate: sample dimension mismatch");
        m.col(static_cast<Eigen::Index>(i)) = samples[i];
    }
    return gaussian_aggregate(m);
}

/// Clamp eigenvalues from below at eps: U diag(max(lambda, eps)) U^T.
inline SpdMatrix re_eig(const SymMatrix& x, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("re_eig: eps must be positive");
    EigenDecomp e = sym_eig(x.mat());
    Vector clamped = e.values.cwiseMax(eps);
    Matrix out = e.vectors * clamped.asDiagonal() * e.vectors.transpose();
    return SpdMatrix::from_spd_unchecked(0.5 * (out + out.transpose()));
}

inline SpdMatrix re_eig(const SpdMatrix& x, double eps) { return re_eig(x.as_sym(), eps); }

/// Matrix logarithm of a strictly positive definite matrix.
inline SymMatrix log_eig(const SpdMatrix& x) {
    EigenDecomp e = sym_eig(x.mat());
    if (e.values.minCoeff() <= 0.0)
        throw std::invalid_argument("log of non-PD matrix");
    Vector logged = e.values.array().log();
    Matrix out = e.vectors * logged.asDiagonal() * e.vectors.transpose();
    return SymMatrix::from_symmetric_unchecked(0.5 * (out + out.transpose()));
}

/// Matrix exponential of a symmetric matrix; always strictly PD.
inline SpdMatrix exp_eig(const SymMatrix& s) {
    EigenDecomp e = sym_eig(s.mat());
    Vector exped = e.values.array().exp();
    Matrix out = e.vectors * exped.asDiagonal() * e.vectors.transpose();
    return SpdMatrix::from_spd_unchecked(0.5 * (out + out.transpose()));
}

/// Isometric vectorization of a symmetric d x d matrix into R^{d(d+1)/2}.
/// Order: row-major over the lower triangle -- (a00, a10, a11, a20, a21, a22, ...)
/// -- diagonal entries unscaled, off-diagonal entries scaled by sqrt(2), so that
/// ||vec(A) - vec(B)||_2 equals ||A - B||_F.
inline Vector vec_map(const SymMatrix& s) {
    const Eigen::Index d = s.dim();
    Vector v(d * (d + 1) / 2);
    const double sqrt2 = std::sqrt(2.0);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j <= i; ++j)
            v[k++] = (i == j) ? s.mat()(i, i) : sqrt2 * s.mat()(i, j);
    return v;
}

inline Eigen::Index vec_map_dim(Eigen::Index matrix_dim) {
    return matrix_dim * (matrix_dim + 1) / 2;
}

/// Inverse of vec_map (vec_map is an isometry, so this is also its adjoint).
inline SymMatrix vec_unmap(const Vector& v, Eigen::Index d) {
    if (v.size() != vec_map_dim(d))
        throw std::invalid_argument("vec_unmap: length does not match dimension");
    Matrix m(d, d);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double x = v[k++];
            if (i == j) {
                m(i, i) = x;
            } else {
                m(i, j) = x * inv_sqrt2;
                m(j, i) = x * inv_sqrt2;
            }
        }
    }
    return SymMatrix::from_symmetric_unchecked(std::move(m));
}

/// Stiefel-weighted bilinear compression Y = sum_i W_i X_i W_i^T.
/// Each congruence of a PD matrix by an orthonormal-row W_i is PD, and a sum
/// of PD matrices is PD, so the output is strictly PD.
inline SpdMatrix spdc_transform(const std::vector<SpdMatrix>& inputs,
                                const std::vector<StiefelWeight>& weights) {
    if (inputs.empty()) throw std::invalid_argument("spdc_transform: empty input list");
    if (inputs.size() != weights.size())
        throw std::invalid_argument("spdc_transform: inputs and weights differ in count");
    const Eigen::Index d_out = weights.front().rows();
    Matrix out = Matrix::Zero(d_out, d_out);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (weights[i].rows() != d_out)
            throw std::invalid_argument("spdc_transform: weights disagree on output dim");
        if (weights[i].cols() != inputs[i].dim())
            throw std::invalid_argument("spdc_transform: weight/input dimension mismatch");
        out += weights[i].mat() * inputs[i].mat() * weights[i].mat().transpose();
    }
    return SpdMatrix::from_spd_unchecked(0.5 * (out + out.transpose()));
}

/// True iff m is symmetric within tol and its smallest eigenvalue exceeds tol.
inline bool is_spd(const Matrix& m, double tol) {
    if (m.rows() != m.cols()) return false;
    if (!is_symmetric(m, std::max(tol, kSymTol))) return false;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()),
                                              Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff() > tol;
}

}  // namespace spdmotion
