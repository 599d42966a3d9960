#pragma once

#include "speclab/errors.hpp"

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <vector>

namespace speclab {

/// Length of the symmetric vectorization of an m x m matrix.
inline int svec_size(int m) { return m * (m + 1) / 2; }

/// Symmetric vectorization with sqrt(2)-scaled off-diagonals, so the
/// Euclidean norm of svec(W) equals the Frobenius norm of W.
inline Eigen::VectorXd svec(const Eigen::MatrixXd& w)
{
    const int m = static_cast<int>(w.rows());
    Eigen::VectorXd x(svec_size(m));
    int k = 0;
    for (int i = 0; i < m; ++i) {
        for (int j = i; j < m; ++j, ++k) {
            x[k] = i == j ? w(i, i) : std::numbers::sqrt2 * 0.5 * (w(i, j) + w(j, i));
        }
    }
    return x;
}

inline Eigen::MatrixXd smat(const Eigen::Ref<const Eigen::VectorXd>& x, int m)
{
    if (x.size() != svec_size(m)) {
        throw ContractViolation("svec length does not match the matrix size");
    }
    Eigen::MatrixXd w(m, m);
    int k = 0;
    for (int i = 0; i < m; ++i) {
        for (int j = i; j < m; ++j, ++k) {
            if (i == j) {
                w(i, i) = x[k];
            } else {
                w(i, j) = x[k] / std::numbers::sqrt2;
                w(j, i) = w(i, j);
            }
        }
    }
    return w;
}

/// Nearest PSD matrix in Frobenius norm: negative eigenvalues clipped to zero.
inline Eigen::MatrixXd project_psd(const Eigen::MatrixXd& w)
{
    const Eigen::MatrixXd s = 0.5 * (w + w.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    const Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0);
    Eigen::MatrixXd out = es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (out + out.transpose());
}

/// Euclidean projection of v onto {x >= 0, sum x = total}.
inline Eigen::VectorXd project_simplex(const Eigen::VectorXd& v, double total)
{
    if (!(total > 0.0)) {
        throw ContractViolation("simplex total must be positive");
    }
    std::vector<double> u(v.data(), v.data() + v.size());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        cumulative += u[i];
        const double t = (cumulative - total) / static_cast<double>(i + 1);
        if (u[i] - t > 0.0) {
            theta = t;
        }
    }
    return (v.array() - theta).cwiseMax(0.0).matrix();
}

/// Nearest block-diagonal PSD matrix with the given total trace. Blocks are
/// stored as consecutive svec segments of sizes svec_size(blocks[i]).
inline Eigen::VectorXd project_spectraplex(const Eigen::VectorXd& x, const std::vector<int>& blocks,
                                           double total)
{
    std::vector<Eigen::MatrixXd> vectors;
    Eigen::VectorXd all(std::accumulate(blocks.begin(), blocks.end(), 0));
    int offset = 0;
    int e = 0;
    for (int m : blocks) {
        const Eigen::MatrixXd w = smat(x.segment(offset, svec_size(m)), m);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w);
        vectors.push_back(es.eigenvectors());
        all.segment(e, m) = es.eigenvalues();
        offset += svec_size(m);
        e += m;
    }
    const Eigen::VectorXd p = project_simplex(all, total);
    Eigen::VectorXd out(x.size());
    offset = 0;
    e = 0;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const int m = blocks[b];
        const Eigen::MatrixXd w =
            vectors[b] * p.segment(e, m).asDiagonal() * vectors[b].transpose();
        out.segment(offset, svec_size(m)) = svec(w);
        offset += svec_size(m);
        e += m;
    }
    return out;
}

/// Blockwise PSD projection of stacked svec segments.
inline Eigen::VectorXd project_psd_blocks(const Eigen::VectorXd& x, const std::vector<int>& blocks)
{
    Eigen::VectorXd out(x.size());
    int offset = 0;
    for (int m : blocks) {
        out.segment(offset, svec_size(m)) =
            svec(project_psd(smat(x.segment(offset, svec_size(m)), m)));
        offset += svec_size(m);
    }
    return out;
}

inline double min_eigenvalue(const Eigen::MatrixXd& w)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (w + w.transpose()),
                                                      Eigen::EigenvaluesOnly);
    return es.eigenvalues()[0];
}

} // namespace speclab
