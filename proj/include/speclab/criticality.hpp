#pragma once

#include "speclab/deformation.hpp"
#include "speclab/errors.hpp"
#include "speclab/psd.hpp"
#include "speclab/sampling.hpp"
#include "speclab/spectrum.hpp"

#include <Eigen/Core>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace speclab {

enum class CertificateTarget { full, conformal, cluster_sum_full, cluster_sum_conformal, ratio_full, ratio_conformal };
enum class CertificateStatus { feasible, infeasible };

inline const char* target_name(CertificateTarget t)
{
    switch (t) {
    case CertificateTarget::full: return "full";
    case CertificateTarget::conformal: return "conformal";
    case CertificateTarget::cluster_sum_full: return "cluster-sum-full";
    case CertificateTarget::cluster_sum_conformal: return "cluster-sum-conformal";
    case CertificateTarget::ratio_full: return "ratio-full";
    case CertificateTarget::ratio_conformal: return "ratio-conformal";
    }
    return "?";
}

inline const char* status_name(CertificateStatus s)
{
    return s == CertificateStatus::feasible ? "feasible" : "infeasible-at-tolerance";
}

/// PSD coefficient matrix W with sum_ij W_ij du_i (x) du_j = g (full) or
/// sum_ij W_ij u_i u_j = 1 (conformal), up to the reported residual.
struct GramCertificate {
    CertificateTarget target = CertificateTarget::full;
    int m = 0;
    int n = 2;
    Eigen::MatrixXd W;
    double residual = 0.0;  ///< max pointwise deviation
    double tolerance = 0.0;
    CertificateStatus status = CertificateStatus::infeasible;
    int restarts = 0;
    int iterations = 0;
    /// Full target only: max |sum W_ij u_i u_j - n / lambda| over nodes.
    std::optional<double> sphere_radius_residual;

    [[nodiscard]] bool feasible() const { return status == CertificateStatus::feasible; }
};

/// Pair (W_k, W_{k+1}) for the ratio lambda_{k+1} / lambda_k.
struct RatioCertificate {
    CertificateTarget target = CertificateTarget::ratio_conformal;
    int m_k = 0;
    int m_k1 = 0;
    int n = 2;
    Eigen::MatrixXd W_k;
    Eigen::MatrixXd W_k1;
    /// Per point, (1/n) trace of the left side of the tensor identity (full mode).
    Eigen::VectorXd alpha;
    double residual_tensor = 0.0; ///< traceless tensor identity, full mode only
    double residual_scalar = 0.0; ///< sum v^2 = (lambda_k / lambda_{k+1}) sum u^2
    double tolerance = 0.0;
    CertificateStatus status = CertificateStatus::infeasible;
    bool trivial = false; ///< lambda_k and lambda_{k+1} share a cluster
    int restarts = 0;
    int iterations = 0;

    [[nodiscard]] bool feasible() const { return status == CertificateStatus::feasible; }
    [[nodiscard]] double residual() const { return std::max(residual_tensor, residual_scalar); }
};

struct GramSolverOptions {
    int restarts = 10;
    int max_iterations = 5000;
    std::uint64_t seed = 0;
};

/// Certificate tolerance tied to the accuracy of a FEM eigen-solve.
inline double fem_certificate_tolerance(const EigenSystem& sys)
{
    return 10.0 * std::max(sys.max_residual, 1e-14);
}

inline constexpr double kAnalyticCertificateTolerance = 1e-8;

namespace detail {

/// Least squares in svec coordinates: minimize mean ||A x - b||^2 over
/// stacked PSD blocks (optionally with a fixed total trace). Residuals are
/// grouped: each kind has `count` groups of `size` consecutive rows, and a
/// group's residual is the Euclidean norm of its rows.
struct GramProblem {
    std::vector<int> blocks;
    Eigen::MatrixXd a;
    Eigen::VectorXd b;
    std::vector<std::pair<int, int>> kinds; ///< (count, size)
    std::optional<double> trace_total;
};

struct GramSolution {
    Eigen::VectorXd x;
    std::vector<double> residuals; ///< one per kind
    double residual = std::numeric_limits<double>::infinity();
    int restarts = 0;
    int iterations = 0;
};

inline std::vector<double> group_residuals(const GramProblem& p, const Eigen::VectorXd& x)
{
    const Eigen::VectorXd r = p.a * x - p.b;
    std::vector<double> out;
    int row = 0;
    for (const auto& [count, size] : p.kinds) {
        double worst = 0.0;
        for (int g = 0; g < count; ++g, row += size) {
            worst = std::max(worst, r.segment(row, size).norm());
        }
        out.push_back(worst);
    }
    return out;
}

inline double max_of(const std::vector<double>& v)
{
    double m = 0.0;
    for (double x : v) {
        m = std::max(m, x);
    }
    return m;
}

/// svec coefficients of the bilinear form (x, y) -> sum_ij W_ij x_i y_j symmetrized.
inline Eigen::RowVectorXd bilinear_row(const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& y)
{
    const int m = static_cast<int>(x.size());
    Eigen::RowVectorXd row(svec_size(m));
    int k = 0;
    for (int i = 0; i < m; ++i) {
        for (int j = i; j < m; ++j, ++k) {
            row[k] = i == j ? x[i] * y[i] : (x[i] * y[j] + x[j] * y[i]) / std::numbers::sqrt2;
        }
    }
    return row;
}

/// Rows of sum_ij W_ij G_i G_j^T for one point: (xx, yy, sqrt2 xy).
inline void tensor_rows(Eigen::Ref<Eigen::MatrixXd> out, const Eigen::RowVectorXd& gx,
                        const Eigen::RowVectorXd& gy)
{
    out.row(0) = bilinear_row(gx, gx);
    out.row(1) = bilinear_row(gy, gy);
    out.row(2) = std::numbers::sqrt2 * bilinear_row(gx, gy);
}

inline Eigen::VectorXd identity_svec(const std::vector<int>& blocks)
{
    int d = 0;
    for (int m : blocks) {
        d += svec_size(m);
    }
    Eigen::VectorXd e(d);
    int offset = 0;
    for (int m : blocks) {
        e.segment(offset, svec_size(m)) = svec(Eigen::MatrixXd::Identity(m, m));
        offset += svec_size(m);
    }
    return e;
}

inline Eigen::VectorXd project(const GramProblem& p, const Eigen::VectorXd& x)
{
    if (p.trace_total) {
        return project_spectraplex(x, p.blocks, *p.trace_total);
    }
    return project_psd_blocks(x, p.blocks);
}

/// Start closest to a multiple of the identity within the affine solution set
/// of A x = b (least-squares sense), then projected onto the feasible cone.
inline Eigen::VectorXd structured_start(const GramProblem& p)
{
    const Eigen::VectorXd e = identity_svec(p.blocks);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(p.a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sv = svd.singularValues();
    const double cutoff = 1e-10 * (sv.size() > 0 ? sv[0] : 0.0);
    svd.setThreshold(1e-10);
    const Eigen::MatrixXd& v = svd.matrixV();
    Eigen::MatrixXd null_basis(v.rows(), 0);
    for (int i = 0; i < sv.size(); ++i) {
        if (sv[i] <= cutoff) {
            null_basis.conservativeResize(Eigen::NoChange, null_basis.cols() + 1);
            null_basis.col(null_basis.cols() - 1) = v.col(i);
        }
    }
    auto null_project = [&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
        return null_basis.cols() > 0 ? Eigen::VectorXd(null_basis * (null_basis.transpose() * z))
                                     : Eigen::VectorXd::Zero(z.size());
    };
    Eigen::VectorXd y;
    if (p.trace_total) {
        y = null_project(e);
        const double tr = e.dot(y);
        if (!(tr > 1e-12 * e.norm() * y.norm())) {
            y = e;
        }
        y *= *p.trace_total / e.dot(y);
    } else {
        const Eigen::VectorXd xp = svd.solve(p.b);
        const double s = e.dot(xp) / e.squaredNorm();
        y = xp + null_project(s * e - xp);
    }
    return project(p, y);
}

inline Eigen::VectorXd random_start(const GramProblem& p, std::mt19937_64& rng, double scale)
{
    std::normal_distribution<double> normal;
    Eigen::VectorXd x(identity_svec(p.blocks).size());
    int offset = 0;
    for (int m : p.blocks) {
        Eigen::MatrixXd g(m, m);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) {
                g(i, j) = normal(rng);
            }
        }
        Eigen::MatrixXd w = g * g.transpose();
        w *= scale / std::max(w.trace(), 1e-300);
        x.segment(offset, svec_size(m)) = svec(w);
        offset += svec_size(m);
    }
    return project(p, x);
}

/// Accelerated projected gradient with adaptive momentum restart.
inline GramSolution solve_gram(const GramProblem& p, double tol, const GramSolverOptions& opt)
{
    const double rows = static_cast<double>(std::max<Eigen::Index>(p.a.rows(), 1));
    const Eigen::MatrixXd normal_matrix = p.a.transpose() * p.a / rows;
    const Eigen::VectorXd c = p.a.transpose() * p.b / rows;
    const double bb = p.b.squaredNorm() / rows;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(normal_matrix, Eigen::EigenvaluesOnly);
    double lipschitz = es.eigenvalues().size() > 0 ? es.eigenvalues().maxCoeff() : 1.0;
    if (!(lipschitz > 0.0)) {
        lipschitz = 1.0;
    }
    auto objective = [&](const Eigen::VectorXd& x) {
        return 0.5 * (x.dot(normal_matrix * x) - 2.0 * c.dot(x) + bb);
    };

    std::mt19937_64 rng(opt.seed);
    GramSolution best;
    const Eigen::VectorXd first = structured_start(p);
    const double scale = std::max(identity_svec(p.blocks).dot(first), 1.0);

    for (int restart = 0; restart < std::max(opt.restarts, 1); ++restart) {
        Eigen::VectorXd x = restart == 0 ? first : random_start(p, rng, scale);
        Eigen::VectorXd y = x;
        double t = 1.0;
        double f_mark = objective(x);
        int it = 0;
        std::vector<double> res = group_residuals(p, x);
        for (it = 1; it <= opt.max_iterations && max_of(res) > tol; ++it) {
            const Eigen::VectorXd g = normal_matrix * y - c;
            const Eigen::VectorXd xn = project(p, y - g / lipschitz);
            const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            if ((y - xn).dot(xn - x) > 0.0) {
                t = 1.0;
                y = xn;
            } else {
                y = xn + ((t - 1.0) / tn) * (xn - x);
                t = tn;
            }
            x = xn;
            if (it % 25 == 0) {
                res = group_residuals(p, x);
            }
            if (it % 250 == 0) {
                const double f = objective(x);
                if (f_mark - f <= 1e-10 * std::abs(f_mark)) {
                    break; // stalled
                }
                f_mark = f;
            }
        }
        res = group_residuals(p, x);
        best.iterations += std::min(it, opt.max_iterations);
        if (max_of(res) < best.residual) {
            best.x = x;
            best.residuals = res;
            best.residual = max_of(res);
        }
        best.restarts = restart + 1;
        if (best.residual <= tol) {
            break;
        }
    }
    return best;
}

inline Eigen::MatrixXd point_tensor(const SampledCluster& c, const Eigen::MatrixXd& w, int p)
{
    Eigen::Matrix<double, 2, Eigen::Dynamic> g(2, c.dimension());
    g.row(0) = c.grad_x.row(p);
    g.row(1) = c.grad_y.row(p);
    return g * w * g.transpose();
}

inline void require_tolerance(double tol)
{
    if (!(tol > 0.0)) {
        throw ContractViolation("certificate tolerance must be positive");
    }
}

} // namespace detail

/// Independent evaluation of a certificate's residual from W and the basis.
inline double certificate_residual(const GramCertificate& cert, const SampledCluster& c)
{
    const SampleDomain& d = *c.domain;
    double worst = 0.0;
    if (cert.target == CertificateTarget::full) {
        for (int p = 0; p < d.num_points(); ++p) {
            const Eigen::MatrixXd t = detail::point_tensor(c, cert.W, p);
            worst = std::max(worst, (t - Eigen::Matrix2d::Identity()).norm());
        }
    } else {
        const Eigen::MatrixXd& u = c.values();
        for (int v = 0; v < d.num_nodes(); ++v) {
            const double s = u.row(v) * cert.W * u.row(v).transpose();
            worst = std::max(worst, std::abs(s - 1.0));
        }
    }
    return worst;
}

/// Seeks PSD W with sum_ij W_ij du_i (x) du_j = g at every point.
inline GramCertificate gram_feasibility_full(const SampledCluster& c, double tol,
                                             const GramSolverOptions& opt = {})
{
    detail::require_tolerance(tol);
    const int m = c.dimension();
    const int np = c.domain->num_points();
    detail::GramProblem p;
    p.blocks = {m};
    p.a.resize(3 * np, svec_size(m));
    p.b.resize(3 * np);
    for (int q = 0; q < np; ++q) {
        detail::tensor_rows(p.a.middleRows(3 * q, 3), c.grad_x.row(q), c.grad_y.row(q));
        p.b.segment<3>(3 * q) << 1.0, 1.0, 0.0;
    }
    p.kinds = {{np, 3}};
    const auto sol = detail::solve_gram(p, tol, opt);

    GramCertificate cert;
    cert.target = CertificateTarget::full;
    cert.m = m;
    cert.n = c.domain->dimension;
    cert.W = smat(sol.x, m);
    cert.tolerance = tol;
    cert.restarts = sol.restarts;
    cert.iterations = sol.iterations;
    cert.residual = certificate_residual(cert, c);
    cert.status = cert.residual <= tol ? CertificateStatus::feasible : CertificateStatus::infeasible;
    double radius = 0.0;
    const double expected = cert.n / c.eigenvalue();
    for (int v = 0; v < c.domain->num_nodes(); ++v) {
        const double s = c.values().row(v) * cert.W * c.values().row(v).transpose();
        radius = std::max(radius, std::abs(s - expected));
    }
    cert.sphere_radius_residual = radius;
    return cert;
}

/// Seeks PSD W with sum_ij W_ij u_i u_j = 1 at every node.
inline GramCertificate gram_feasibility_conformal(const SampledCluster& c, double tol,
                                                  const GramSolverOptions& opt = {})
{
    detail::require_tolerance(tol);
    const int m = c.dimension();
    const int nn = c.domain->num_nodes();
    detail::GramProblem p;
    p.blocks = {m};
    p.a.resize(nn, svec_size(m));
    p.b = Eigen::VectorXd::Ones(nn);
    for (int v = 0; v < nn; ++v) {
        const Eigen::RowVectorXd u = c.values().row(v);
        p.a.row(v) = detail::bilinear_row(u, u);
    }
    p.kinds = {{nn, 1}};
    const auto sol = detail::solve_gram(p, tol, opt);

    GramCertificate cert;
    cert.target = CertificateTarget::conformal;
    cert.m = m;
    cert.n = c.domain->dimension;
    cert.W = smat(sol.x, m);
    cert.tolerance = tol;
    cert.restarts = sol.restarts;
    cert.iterations = sol.iterations;
    cert.residual = certificate_residual(cert, c);
    cert.status = cert.residual <= tol ? CertificateStatus::feasible : CertificateStatus::infeasible;
    return cert;
}

/// Whether the sufficient direction of the Gram criteria applies to index k,
/// which needs a spectral gap on at least one side of lambda_k.
inline bool criticality_decidable(const EigenCluster& c, int k)
{
    return (k == c.k_lo && c.is_bottom) || (k == c.k_hi && c.is_top);
}

/// Both orthonormal-basis conditions for a full eigenvalue level, with W = I.
struct ClusterSumCertificate {
    GramCertificate full;      ///< sum du_i (x) du_i = c g, c constant
    GramCertificate conformal; ///< sum u_i^2 constant
    double proportionality = 0.0;
    double constant = 0.0;
};

inline ClusterSumCertificate cluster_sum_criticality(const SampledCluster& c, double tol)
{
    detail::require_tolerance(tol);
    if (!c.cluster.is_bottom || !c.cluster.is_top) {
        throw ContractViolation("cluster [" + std::to_string(c.cluster.k_lo) + ", " +
                                std::to_string(c.cluster.k_hi) +
                                "] is partial: the cluster-sum check needs a full eigenvalue level");
    }
    const SampleDomain& d = *c.domain;
    const int m = c.dimension();
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(m, m);

    double tr = 0.0;
    for (int p = 0; p < d.num_points(); ++p) {
        tr += d.point_weights[p] * detail::point_tensor(c, id, p).trace();
    }
    const double scale = tr / (d.dimension * d.volume());
    double full_res = 0.0;
    for (int p = 0; p < d.num_points(); ++p) {
        const Eigen::MatrixXd t = detail::point_tensor(c, id, p);
        full_res = std::max(full_res, (t - scale * Eigen::Matrix2d::Identity()).norm());
    }

    const Eigen::VectorXd sums = c.values().rowwise().squaredNorm();
    const double mean = d.node_weights.dot(sums) / d.node_weights.sum();
    const double conf_res = (sums.array() - mean).abs().maxCoeff();

    ClusterSumCertificate out;
    out.proportionality = scale;
    out.constant = mean;
    for (auto* cert : {&out.full, &out.conformal}) {
        cert->m = m;
        cert->n = d.dimension;
        cert->W = id;
        cert->tolerance = tol;
    }
    out.full.target = CertificateTarget::cluster_sum_full;
    out.full.residual = full_res;
    out.full.status = full_res <= tol ? CertificateStatus::feasible : CertificateStatus::infeasible;
    out.conformal.target = CertificateTarget::cluster_sum_conformal;
    out.conformal.residual = conf_res;
    out.conformal.status =
        conf_res <= tol ? CertificateStatus::feasible : CertificateStatus::infeasible;
    return out;
}

/// Criticality certificate for lambda_{k+1} / lambda_k from the clusters of
/// lambda_k and lambda_{k+1}. Both W blocks are normalized by
/// trace(W_k) + trace(W_{k+1}) = vol, which excludes the zero solution of
/// the homogeneous conditions.
inline RatioCertificate ratio_criticality(const SampledCluster& ck, const SampledCluster& ck1,
                                          double tol, bool conformal,
                                          const GramSolverOptions& opt = {})
{
    detail::require_tolerance(tol);
    RatioCertificate cert;
    cert.target = conformal ? CertificateTarget::ratio_conformal : CertificateTarget::ratio_full;
    cert.tolerance = tol;
    cert.m_k = ck.dimension();
    cert.m_k1 = ck1.dimension();
    cert.n = ck.domain->dimension;
    if (ck.cluster.k_lo == ck1.cluster.k_lo && ck.cluster.k_hi == ck1.cluster.k_hi) {
        cert.trivial = true;
        cert.status = CertificateStatus::feasible;
        return cert;
    }
    if (ck.domain != ck1.domain) {
        throw ContractViolation("ratio clusters must be sampled on the same domain");
    }
    if (ck1.cluster.k_lo != ck.cluster.k_hi + 1) {
        throw ContractViolation("ratio clusters must hold consecutive eigenvalues");
    }
    const SampleDomain& d = *ck.domain;
    const int mk = cert.m_k;
    const int mk1 = cert.m_k1;
    const int dk = svec_size(mk);
    const int dk1 = svec_size(mk1);
    const double ratio = ck.eigenvalue() / ck1.eigenvalue();
    const int nn = d.num_nodes();
    const int np = d.num_points();

    detail::GramProblem p;
    p.blocks = {mk, mk1};
    p.trace_total = d.volume();
    const int tensor_rows = conformal ? 0 : 2 * np;
    p.a.resize(tensor_rows + nn, dk + dk1);
    p.b = Eigen::VectorXd::Zero(tensor_rows + nn);
    if (!conformal) {
        Eigen::MatrixXd ru(3, dk), rv(3, dk1);
        for (int q = 0; q < np; ++q) {
            detail::tensor_rows(ru, ck.grad_x.row(q), ck.grad_y.row(q));
            detail::tensor_rows(rv, ck1.grad_x.row(q), ck1.grad_y.row(q));
            // traceless part of T = T_u - T_v: ((xx - yy) / sqrt2, sqrt2 xy)
            p.a.block(2 * q, 0, 1, dk) = (ru.row(0) - ru.row(1)) / std::numbers::sqrt2;
            p.a.block(2 * q, dk, 1, dk1) = -(rv.row(0) - rv.row(1)) / std::numbers::sqrt2;
            p.a.block(2 * q + 1, 0, 1, dk) = ru.row(2);
            p.a.block(2 * q + 1, dk, 1, dk1) = -rv.row(2);
        }
        p.kinds.emplace_back(np, 2);
    }
    for (int v = 0; v < nn; ++v) {
        const Eigen::RowVectorXd u = ck.values().row(v);
        const Eigen::RowVectorXd w = ck1.values().row(v);
        p.a.block(tensor_rows + v, 0, 1, dk) = -ratio * detail::bilinear_row(u, u);
        p.a.block(tensor_rows + v, dk, 1, dk1) = detail::bilinear_row(w, w);
    }
    p.kinds.emplace_back(nn, 1);

    const auto sol = detail::solve_gram(p, tol, opt);
    cert.W_k = smat(sol.x.head(dk), mk);
    cert.W_k1 = smat(sol.x.tail(dk1), mk1);
    cert.restarts = sol.restarts;
    cert.iterations = sol.iterations;
    if (conformal) {
        cert.residual_scalar = sol.residuals[0];
    } else {
        cert.residual_tensor = sol.residuals[0];
        cert.residual_scalar = sol.residuals[1];
        cert.alpha.resize(np);
        for (int q = 0; q < np; ++q) {
            const Eigen::MatrixXd t =
                detail::point_tensor(ck, cert.W_k, q) - detail::point_tensor(ck1, cert.W_k1, q);
            cert.alpha[q] = t.trace() / cert.n;
        }
    }
    cert.status = cert.residual() <= tol ? CertificateStatus::feasible : CertificateStatus::infeasible;
    return cert;
}

/// Extreme eigenvalues of projected operators over sampled deformations.
struct ProbeReport {
    bool conformal = false;
    std::vector<double> min_eigenvalue;
    std::vector<double> max_eigenvalue;
    std::vector<int> definite_samples; ///< witnesses of non-criticality
    double smallest_margin = std::numeric_limits<double>::infinity();

    [[nodiscard]] int samples() const { return static_cast<int>(min_eigenvalue.size()); }
    [[nodiscard]] bool indefinite_everywhere() const { return definite_samples.empty(); }
};

/// Samples volume-neutral tensors (or mean-zero conformal factors) and records
/// whether Q_h is definite on the cluster. A sample counts as definite when
/// its extreme eigenvalues share a sign beyond 1e-9 of their magnitude.
inline ProbeReport indefiniteness_probe(const SampledCluster& c, int sample_count,
                                        std::uint64_t seed, bool conformal)
{
    if (sample_count < 1) {
        throw ContractViolation("indefiniteness probe needs at least one sample");
    }
    constexpr double rel = 1e-9;
    std::mt19937_64 rng(seed);
    ProbeReport report;
    report.conformal = conformal;
    for (int s = 0; s < sample_count; ++s) {
        DeformationTensor h;
        do {
            h = conformal ? conformal_tensor(*c.domain, random_conformal_field(*c.domain, rng))
                          : random_tensor_field(*c.domain, rng);
        } while (h.components.norm() == 0.0);
        const Eigen::VectorXd ev = projected_operator(c, h).eigenvalues();
        const double lo = ev[0];
        const double hi = ev[ev.size() - 1];
        report.min_eigenvalue.push_back(lo);
        report.max_eigenvalue.push_back(hi);
        const double mag = std::max(std::abs(lo), std::abs(hi));
        if (lo > rel * mag || hi < -rel * mag) {
            report.definite_samples.push_back(s);
        }
        if (mag > 0.0) {
            report.smallest_margin = std::min(report.smallest_margin, std::min(-lo, hi) / mag);
        }
    }
    return report;
}

/// Necessary dimension conditions per cluster.
struct DimensionRow {
    int k_lo = 0;
    int k_hi = 0;
    int m = 0;
    bool full = false;      ///< m >= n + 1
    bool sphere_equality = false; ///< m == n + 1
    bool conformal = false; ///< m >= 2
    /// With the next cluster: min(m, m_next) >= 2; unset for the last cluster.
    std::optional<bool> ratio;
};

inline std::vector<DimensionRow> dimension_checks(const std::vector<EigenCluster>& clusters,
                                                  int n = 2)
{
    std::vector<DimensionRow> rows;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        DimensionRow r;
        r.k_lo = clusters[i].k_lo;
        r.k_hi = clusters[i].k_hi;
        r.m = clusters[i].dimension();
        r.full = r.m >= n + 1;
        r.sphere_equality = r.m == n + 1;
        r.conformal = r.m >= 2;
        if (i + 1 < clusters.size()) {
            r.ratio = std::min(r.m, clusters[i + 1].dimension()) >= 2;
        }
        rows.push_back(r);
    }
    return rows;
}

} // namespace speclab
