#pragma once

#include "speclab/errors.hpp"
#include "speclab/operators.hpp"

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace speclab {

/// Ascending generalized eigenpairs of (K, M). Index 1 is the first positive
/// eigenvalue; the zero mode is kept separately and never indexed.
struct EigenSystem {
    double zero_value = 0.0;
    Eigen::VectorXd zero_mode;
    std::vector<double> eigenvalues;   ///< eigenvalues[k - 1] == lambda_k
    Eigen::MatrixXd eigenfunctions;    ///< column k - 1, mass-orthonormal
    std::optional<double> lookahead;   ///< lambda_{count + 1}, when available
    int iterations = 0;                ///< 0 for the dense path
    double max_residual = 0.0;         ///< max ||K u - lambda M u|| / ||M u||

    [[nodiscard]] int count() const { return static_cast<int>(eigenvalues.size()); }
    [[nodiscard]] double eigenvalue(int k) const { return eigenvalues.at(static_cast<std::size_t>(k - 1)); }
    [[nodiscard]] Eigen::VectorXd eigenfunction(int k) const { return eigenfunctions.col(k - 1); }
};

namespace detail {

/// Vertex count up to which the generalized problem is solved densely.
inline constexpr int kDenseSolveLimit = 900;

inline void fix_sign(Eigen::Ref<Eigen::VectorXd> v)
{
    Eigen::Index idx = 0;
    v.cwiseAbs().maxCoeff(&idx);
    if (v[idx] < 0.0) {
        v = -v;
    }
}

inline EigenSystem pack_system(const OperatorPair& ops, const Eigen::VectorXd& values,
                               const Eigen::MatrixXd& vectors, int count, int iterations)
{
    EigenSystem sys;
    sys.iterations = iterations;
    sys.zero_value = values[0];
    sys.zero_mode = vectors.col(0);
    fix_sign(sys.zero_mode);
    sys.eigenvalues.assign(values.data() + 1, values.data() + 1 + count);
    sys.eigenfunctions = vectors.middleCols(1, count);
    for (int c = 0; c < count; ++c) {
        fix_sign(sys.eigenfunctions.col(c));
    }
    if (values.size() > count + 1) {
        sys.lookahead = values[count + 1];
    }
    for (int c = 0; c < count; ++c) {
        const Eigen::VectorXd u = sys.eigenfunctions.col(c);
        const Eigen::VectorXd mu = ops.mass.cwiseProduct(u);
        const double r = (ops.stiffness * u - sys.eigenvalues[c] * mu).norm() / mu.norm();
        sys.max_residual = std::max(sys.max_residual, r);
    }
    return sys;
}

inline EigenSystem solve_dense(const OperatorPair& ops, int count)
{
    const Eigen::VectorXd d = ops.mass.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd a = d.asDiagonal() * Eigen::MatrixXd(ops.stiffness) * d.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    if (es.info() != Eigen::Success) {
        throw SolverError("dense symmetric eigensolver failed");
    }
    const int keep = std::min<int>(count + 2, static_cast<int>(a.rows()));
    const Eigen::MatrixXd vectors = d.asDiagonal() * es.eigenvectors().leftCols(keep);
    return pack_system(ops, es.eigenvalues().head(keep), vectors, count, 0);
}

/// Shift-invert block subspace iteration on M^{-1/2} K M^{-1/2} with
/// Rayleigh-Ritz extraction. A block (rather than single-vector Krylov)
/// method keeps exactly repeated eigenvalues resolved.
inline EigenSystem solve_shift_invert(const OperatorPair& ops, int count)
{
    const int n = static_cast<int>(ops.mass.size());
    const int wanted = std::min(count + 2, n);
    const int block = std::min(n, wanted + std::max(10, wanted));
    const Eigen::VectorXd sq = ops.mass.cwiseSqrt();
    const Eigen::VectorXd isq = sq.cwiseInverse();

    double diag_mean = 0.0;
    for (int i = 0; i < n; ++i) {
        diag_mean += ops.stiffness.coeff(i, i) / ops.mass[i];
    }
    diag_mean /= n;
    const double sigma = -1e-4 * diag_mean;

    Eigen::SparseMatrix<double> shifted = ops.stiffness;
    for (int i = 0; i < n; ++i) {
        shifted.coeffRef(i, i) -= sigma * ops.mass[i];
    }
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(shifted);
    if (ldlt.info() != Eigen::Success) {
        throw SolverError("factorization of K - sigma M failed");
    }

    std::mt19937_64 rng(0x5eed5eedULL);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd x(n, block);
    for (int j = 0; j < block; ++j) {
        for (int i = 0; i < n; ++i) {
            x(i, j) = normal(rng);
        }
    }

    constexpr int max_iterations = 4000;
    constexpr double tight = 1e-10;
    constexpr double loose = 1e-8;
    Eigen::VectorXd theta;
    double worst = 0.0;
    for (int it = 1; it <= max_iterations; ++it) {
        // y = B^{-1} x with B = M^{-1/2} (K - sigma M) M^{-1/2}
        Eigen::MatrixXd y = ldlt.solve(sq.asDiagonal() * x);
        y = sq.asDiagonal() * y;
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
        y = qr.householderQ() * Eigen::MatrixXd::Identity(n, block);

        const Eigen::MatrixXd ay =
            isq.asDiagonal() * (ops.stiffness * (isq.asDiagonal() * y));
        Eigen::MatrixXd h = y.transpose() * ay;
        h = 0.5 * (h + h.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
        theta = es.eigenvalues();
        x = y * es.eigenvectors();
        const Eigen::MatrixXd ax = ay * es.eigenvectors();

        worst = 0.0;
        for (int j = 0; j < wanted; ++j) {
            // ||K u - theta M u|| / ||M u|| with u = M^{-1/2} x
            const Eigen::VectorXd r = sq.cwiseProduct(ax.col(j) - theta[j] * x.col(j));
            const double mu = sq.cwiseProduct(x.col(j)).norm();
            worst = std::max(worst, r.norm() / mu);
        }
        if (worst <= tight || (it > 200 && worst <= loose)) {
            const Eigen::MatrixXd vectors = isq.asDiagonal() * x.leftCols(wanted);
            return pack_system(ops, theta.head(wanted), vectors, count, it);
        }
    }
    throw SolverError("shift-invert subspace iteration did not converge in " +
                      std::to_string(max_iterations) + " iterations (block " +
                      std::to_string(block) + ", worst residual " + std::to_string(worst) +
                      ", shift " + std::to_string(sigma) + ")");
}

} // namespace detail

/// First `count` positive eigenpairs of (K, M), plus the zero mode and one
/// look-ahead eigenvalue when the matrix is large enough.
inline EigenSystem solve_spectrum(const OperatorPair& ops, int count)
{
    const int n = static_cast<int>(ops.mass.size());
    if (count < 1 || count >= n) {
        throw ContractViolation("solve_spectrum needs 1 <= count < " + std::to_string(n) +
                                ", got " + std::to_string(count));
    }
    if (n <= detail::kDenseSolveLimit) {
        return detail::solve_dense(ops, count);
    }
    return detail::solve_shift_invert(ops, count);
}

inline EigenSystem solve_spectrum(const DiscreteMetric& metric, int count)
{
    return solve_spectrum(assemble_operators(metric), count);
}

/// Numerical eigenspace: a maximal run of eigenvalues with relative gaps at
/// most the clustering tolerance.
struct EigenCluster {
    int k_lo = 1;
    int k_hi = 1;
    double value = 0.0;                ///< mean of the member eigenvalues
    std::vector<double> members;
    Eigen::MatrixXd basis;             ///< values at the nodes, mass-orthonormal
    bool is_bottom = true;             ///< lambda_{k_lo - 1} < value
    bool is_top = true;                ///< value < lambda_{k_hi + 1}

    [[nodiscard]] int dimension() const { return k_hi - k_lo + 1; }
    [[nodiscard]] bool contains(int k) const { return k_lo <= k && k <= k_hi; }
};

inline std::vector<EigenCluster> cluster_eigenvalues(const EigenSystem& sys, double rel_tol = 1e-2)
{
    if (!(rel_tol > 0.0)) {
        throw ContractViolation("cluster tolerance must be positive");
    }
    auto close = [rel_tol](double a, double b) {
        return std::abs(b - a) <= rel_tol * std::max(std::abs(a), std::abs(b));
    };
    std::vector<EigenCluster> out;
    const int n = sys.count();
    int start = 0;
    while (start < n) {
        int end = start;
        while (end + 1 < n && close(sys.eigenvalues[end], sys.eigenvalues[end + 1])) {
            ++end;
        }
        EigenCluster c;
        c.k_lo = start + 1;
        c.k_hi = end + 1;
        c.members.assign(sys.eigenvalues.begin() + start, sys.eigenvalues.begin() + end + 1);
        double sum = 0.0;
        for (double v : c.members) {
            sum += v;
        }
        c.value = sum / static_cast<double>(c.members.size());
        c.basis = sys.eigenfunctions.middleCols(start, end - start + 1);
        c.is_bottom = start == 0 || !close(sys.eigenvalues[start - 1], sys.eigenvalues[start]);
        if (end + 1 < n) {
            c.is_top = true;
        } else {
            c.is_top = sys.lookahead.has_value() && !close(sys.eigenvalues[end], *sys.lookahead);
        }
        out.push_back(std::move(c));
        start = end + 1;
    }
    return out;
}

inline const EigenCluster& cluster_containing(const std::vector<EigenCluster>& clusters, int k)
{
    for (const auto& c : clusters) {
        if (c.contains(k)) {
            return c;
        }
    }
    throw ContractViolation("no cluster contains index " + std::to_string(k));
}

} // namespace speclab
