#pragma once

#include "speclab/errors.hpp"
#include "speclab/metric.hpp"
#include "speclab/operators.hpp"
#include "speclab/sampling.hpp"

#include <Eigen/Core>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace speclab {

/// Symmetric 2-tensor field h = d/dt g_t, stored per point as (xx, xy, yy)
/// in the point's orthonormal frame.
struct DeformationTensor {
    Eigen::MatrixX3d components;
    /// Set when h = phi * g.
    std::optional<ConformalField> conformal;
    /// Rates d/dt (l_e^2) on mesh domains when the field is edge-consistent.
    std::optional<Eigen::VectorXd> edge_rates;
    bool volume_neutral = false;

    [[nodiscard]] int num_points() const { return static_cast<int>(components.rows()); }

    [[nodiscard]] Eigen::Matrix2d at(int p) const
    {
        Eigen::Matrix2d m;
        m << components(p, 0), components(p, 1), components(p, 1), components(p, 2);
        return m;
    }

    [[nodiscard]] double trace(int p) const { return components(p, 0) + components(p, 2); }

    [[nodiscard]] DeformationTensor scaled(double s) const
    {
        DeformationTensor out = *this;
        out.components *= s;
        if (out.conformal) {
            out.conformal->values *= s;
        }
        if (out.edge_rates) {
            *out.edge_rates *= s;
        }
        return out;
    }
};

inline DeformationTensor zero_tensor(const SampleDomain& domain)
{
    DeformationTensor h;
    h.components = Eigen::MatrixX3d::Zero(domain.num_points(), 3);
    h.volume_neutral = true;
    if (domain.kind == SampleDomain::Kind::mesh) {
        h.edge_rates = Eigen::VectorXd();
    }
    return h;
}

/// Same (xx, xy, yy) components at every point; on exact flat tori this is
/// the velocity of the linear lattice path g + t H.
inline DeformationTensor constant_tensor(const SampleDomain& domain, double xx, double xy, double yy)
{
    DeformationTensor h;
    h.components.resize(domain.num_points(), 3);
    h.components.col(0).setConstant(xx);
    h.components.col(1).setConstant(xy);
    h.components.col(2).setConstant(yy);
    return h;
}

/// h = phi * g, with phi averaged from nodes to points.
inline DeformationTensor conformal_tensor(const SampleDomain& domain, const ConformalField& phi)
{
    if (phi.values.size() != domain.num_nodes()) {
        throw ContractViolation("conformal field size does not match the domain");
    }
    const Eigen::VectorXd at_points = domain.point_average * phi.values;
    DeformationTensor h;
    h.components.resize(domain.num_points(), 3);
    h.components.col(0) = at_points;
    h.components.col(1).setZero();
    h.components.col(2) = at_points;
    h.conformal = phi;
    return h;
}

/// Discrete integral of (g, h) v_g = sum of weight * trace(h).
inline double trace_integral(const DeformationTensor& h, const SampleDomain& domain)
{
    return domain.point_weights.dot(h.components.col(0) + h.components.col(2));
}

/// Removes the pure-trace component so that the integral of (g, h0) vanishes.
inline DeformationTensor project_to_S20(const DeformationTensor& h, const SampleDomain& domain)
{
    if (h.num_points() != domain.num_points()) {
        throw ContractViolation("tensor size does not match the domain");
    }
    const double c = trace_integral(h, domain) / (2.0 * domain.volume());
    DeformationTensor out = h;
    out.components.col(0).array() -= c;
    out.components.col(2).array() -= c;
    if (out.conformal) {
        out.conformal->values.array() -= c;
        out.conformal->mean_zero = true;
    }
    out.volume_neutral = true;
    return out;
}

// --- mesh tensors -----------------------------------------------------------

/// Per-face tensor reproducing the given rates of squared edge lengths on
/// the three edges of each face (a piecewise-constant metric variation).
inline DeformationTensor tensor_from_edge_rates(const DiscreteMetric& metric,
                                                const Eigen::VectorXd& rates)
{
    const TriMesh& mesh = metric.mesh();
    if (rates.size() != mesh.num_edges()) {
        throw ContractViolation("edge rate vector does not match the mesh");
    }
    DeformationTensor h;
    h.components.resize(mesh.num_faces(), 3);
    for (int f = 0; f < mesh.num_faces(); ++f) {
        const FaceGeometry g = metric.face(f);
        Eigen::Matrix3d a;
        Eigen::Vector3d b;
        for (int i = 0; i < 3; ++i) {
            const Eigen::Vector2d e = g.edge_vector(i);
            a.row(i) << e.x() * e.x(), 2.0 * e.x() * e.y(), e.y() * e.y();
            b[i] = rates[mesh.face_edges()[f][i]];
        }
        h.components.row(f) = a.partialPivLu().solve(b).transpose();
    }
    h.edge_rates = rates;
    return h;
}

/// Rates of squared edge lengths induced by a per-face tensor; exact for
/// edge-consistent tensors, otherwise the average of the two incident faces.
inline Eigen::VectorXd edge_rates_of(const DeformationTensor& h, const DiscreteMetric& metric)
{
    const TriMesh& mesh = metric.mesh();
    if (h.edge_rates && h.edge_rates->size() == mesh.num_edges()) {
        return *h.edge_rates;
    }
    if (h.edge_rates && h.edge_rates->size() == 0 && h.components.isZero(0.0)) {
        return Eigen::VectorXd::Zero(mesh.num_edges());
    }
    if (h.num_points() != mesh.num_faces()) {
        throw ContractViolation("tensor is not defined on the faces of this mesh");
    }
    Eigen::VectorXd rates = Eigen::VectorXd::Zero(mesh.num_edges());
    Eigen::VectorXd hits = Eigen::VectorXd::Zero(mesh.num_edges());
    for (int f = 0; f < mesh.num_faces(); ++f) {
        const FaceGeometry g = metric.face(f);
        const Eigen::Matrix2d hf = h.at(f);
        for (int i = 0; i < 3; ++i) {
            const Eigen::Vector2d e = g.edge_vector(i);
            const int ei = mesh.face_edges()[f][i];
            rates[ei] += e.dot(hf * e);
            hits[ei] += 1.0;
        }
    }
    return rates.cwiseQuotient(hits);
}

/// Volume-neutral edge-consistent tensor: projection of the tensor whose
/// rates are given, expressed again through edge rates.
inline DeformationTensor project_edge_tensor_to_S20(const DiscreteMetric& metric,
                                                     const Eigen::VectorXd& rates)
{
    const DeformationTensor h = tensor_from_edge_rates(metric, rates);
    const Eigen::VectorXd area = metric.face_areas();
    double tr = 0.0;
    for (int f = 0; f < h.num_points(); ++f) {
        tr += area[f] * h.trace(f);
    }
    const double c = tr / (2.0 * area.sum());
    const Eigen::VectorXd l2 = metric.edge_lengths().array().square();
    DeformationTensor out = tensor_from_edge_rates(metric, rates - c * l2);
    out.volume_neutral = true;
    return out;
}

/// Metric along the linear path g + t h, realised through squared edge lengths.
inline DiscreteMetric apply_linear_deformation(const DiscreteMetric& metric,
                                               const DeformationTensor& h, double t)
{
    const Eigen::VectorXd rates = edge_rates_of(h, metric);
    Eigen::VectorXd l2 = metric.edge_lengths().array().square().matrix() + t * rates;
    if ((l2.array() <= 0.0).any()) {
        throw MetricError("linear deformation produced a non-positive squared length");
    }
    return DiscreteMetric(metric.mesh_ptr(), l2.cwiseSqrt());
}

/// Edge rates of the symmetric tensor dw (x) dz + dz (x) dw for node functions w, z.
inline Eigen::VectorXd gradient_product_rates(const TriMesh& mesh, const Eigen::VectorXd& w,
                                              const Eigen::VectorXd& z)
{
    Eigen::VectorXd rates(mesh.num_edges());
    for (int e = 0; e < mesh.num_edges(); ++e) {
        const auto& ed = mesh.edges()[e];
        rates[e] = 2.0 * (w[ed[1]] - w[ed[0]]) * (z[ed[1]] - z[ed[0]]);
    }
    return rates;
}

// --- quadratic forms --------------------------------------------------------

namespace detail {

inline double qh_core(const SampleDomain& d, const Eigen::VectorXd& values,
                      const Eigen::VectorXd& gx, const Eigen::VectorXd& gy, double lambda,
                      const DeformationTensor& h)
{
    const Eigen::VectorXd u2 = d.point_average * values.cwiseAbs2();
    double total = 0.0;
    for (int p = 0; p < d.num_points(); ++p) {
        const double a = gx[p];
        const double b = gy[p];
        const double hxx = h.components(p, 0);
        const double hxy = h.components(p, 1);
        const double hyy = h.components(p, 2);
        const double dudu_h = a * a * hxx + 2.0 * a * b * hxy + b * b * hyy;
        // Laplacian of u^2 from the eigenfunction identity
        const double lap_u2 = 2.0 * (lambda * u2[p] - (a * a + b * b));
        total += d.point_weights[p] * (dudu_h + 0.25 * lap_u2 * (hxx + hyy));
    }
    return -total;
}

inline double qphi_core(const SampleDomain& d, const Eigen::VectorXd& values,
                        const Eigen::VectorXd& gx, const Eigen::VectorXd& gy,
                        const Eigen::VectorXd& phi_points, double lambda, int n)
{
    const Eigen::VectorXd u2 = d.point_average * values.cwiseAbs2();
    const double c = (n - 2.0) / n;
    double total = 0.0;
    for (int p = 0; p < d.num_points(); ++p) {
        const double grad2 = gx[p] * gx[p] + gy[p] * gy[p];
        total += d.point_weights[p] * phi_points[p] * (lambda * u2[p] - c * grad2);
    }
    return total;
}

inline void check_tensor(const SampledCluster& c, const DeformationTensor& h)
{
    if (h.num_points() != c.domain->num_points()) {
        throw ContractViolation("deformation tensor has " + std::to_string(h.num_points()) +
                                " points, domain has " + std::to_string(c.domain->num_points()));
    }
}

} // namespace detail

/// Q_h(u) for u = basis * coeffs in a sampled eigenspace.
inline double quadratic_form_Qh(const SampledCluster& c, const Eigen::VectorXd& coeffs,
                                const DeformationTensor& h)
{
    detail::check_tensor(c, h);
    return detail::qh_core(*c.domain, c.values() * coeffs, c.grad_x * coeffs,
                           c.grad_y * coeffs, c.eigenvalue(), h);
}

/// q_phi(u) = integral of (lambda u^2 - (n-2)/n |du|^2) phi for u = basis * coeffs.
inline double conformal_form_qphi(const SampledCluster& c, const Eigen::VectorXd& coeffs,
                                  const ConformalField& phi, int n = 2)
{
    if (phi.values.size() != c.domain->num_nodes()) {
        throw ContractViolation("conformal field size does not match the domain");
    }
    return detail::qphi_core(*c.domain, c.values() * coeffs, c.grad_x * coeffs,
                             c.grad_y * coeffs, c.domain->point_average * phi.values,
                             c.eigenvalue(), n);
}

/// FEM entry point: u is a per-vertex eigenfunction of `metric` for `lambda`.
/// Throws ContractViolation when K u = lambda M u fails beyond `residual_tol`
/// (relative to lambda ||M u||).
inline double quadratic_form_Qh(const DiscreteMetric& metric, const Eigen::VectorXd& u,
                                double lambda, const DeformationTensor& h,
                                double residual_tol = 1e-6)
{
    const OperatorPair ops = assemble_operators(metric);
    const Eigen::VectorXd mu = ops.mass.cwiseProduct(u);
    const double r = (ops.stiffness * u - lambda * mu).norm();
    if (!(r <= residual_tol * std::max(1.0, std::abs(lambda)) * mu.norm())) {
        throw ContractViolation("Q_h needs an eigenfunction: residual " + std::to_string(r) +
                                " exceeds tolerance");
    }
    const auto d = mesh_domain(metric);
    if (h.num_points() != d->num_points()) {
        throw ContractViolation("deformation tensor is not defined on the faces of this mesh");
    }
    return detail::qh_core(*d, u, d->grad_x_op * u, d->grad_y_op * u, lambda, h);
}

/// Matrix of P_{k,h} = Pi_k o Delta' on the sampled eigenspace, assembled by
/// polarization of Q_h over the basis.
struct ProjectedOperator {
    Eigen::MatrixXd matrix;

    [[nodiscard]] Eigen::VectorXd eigenvalues() const
    {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(matrix, Eigen::EigenvaluesOnly);
        return es.eigenvalues();
    }
};

inline ProjectedOperator projected_operator(const SampledCluster& c, const DeformationTensor& h)
{
    detail::check_tensor(c, h);
    const int m = c.dimension();
    Eigen::VectorXd diag(m);
    for (int i = 0; i < m; ++i) {
        diag[i] = quadratic_form_Qh(c, Eigen::VectorXd::Unit(m, i), h);
    }
    ProjectedOperator op;
    op.matrix.resize(m, m);
    for (int i = 0; i < m; ++i) {
        op.matrix(i, i) = diag[i];
        for (int j = i + 1; j < m; ++j) {
            const Eigen::VectorXd e = Eigen::VectorXd::Unit(m, i) + Eigen::VectorXd::Unit(m, j);
            const double v = 0.5 * (quadratic_form_Qh(c, e, h) - diag[i] - diag[j]);
            op.matrix(i, j) = v;
            op.matrix(j, i) = v;
        }
    }
    return op;
}

/// One-sided derivatives of lambda_k along a deformation.
struct DerivativePair {
    enum class Mode {
        bottom,   ///< lambda_k > lambda_{k-1}: left = max, right = min
        top,      ///< lambda_k < lambda_{k+1}: left = min, right = max
        interior, ///< strictly inside a cluster: resolved by branch sorting
    };

    double left = 0.0;
    double right = 0.0;
    Mode mode = Mode::bottom;
    /// Ascending eigenvalues of the projected operator (branch slopes).
    std::vector<double> branch_slopes;
};

inline const char* mode_name(DerivativePair::Mode m)
{
    switch (m) {
    case DerivativePair::Mode::bottom: return "iii";
    case DerivativePair::Mode::top: return "iv";
    case DerivativePair::Mode::interior: return "interior";
    }
    return "?";
}

/// Assigns the one-sided derivatives of lambda_k from the branch slopes of
/// its cluster. For t > 0 small, lambda_k is the (k - k_lo + 1)-th smallest
/// analytic branch; for t < 0 the ordering of slopes reverses.
inline DerivativePair derivatives_from_slopes(const EigenCluster& cluster,
                                              const Eigen::VectorXd& slopes, int k)
{
    if (!cluster.contains(k)) {
        throw ContractViolation("index " + std::to_string(k) + " is outside the cluster [" +
                                std::to_string(cluster.k_lo) + ", " +
                                std::to_string(cluster.k_hi) + "]");
    }
    const int m = static_cast<int>(slopes.size());
    const int j = k - cluster.k_lo;
    DerivativePair d;
    d.branch_slopes.assign(slopes.data(), slopes.data() + m);
    d.right = slopes[j];
    d.left = slopes[m - 1 - j];
    if (j == 0 && cluster.is_bottom) {
        d.mode = DerivativePair::Mode::bottom;
    } else if (j == m - 1 && cluster.is_top) {
        d.mode = DerivativePair::Mode::top;
    } else {
        d.mode = DerivativePair::Mode::interior;
    }
    return d;
}

inline DerivativePair directional_derivatives(const SampledCluster& c, const DeformationTensor& h,
                                              int k)
{
    return derivatives_from_slopes(c.cluster, projected_operator(c, h).eigenvalues(), k);
}

// --- random smooth fields ---------------------------------------------------

/// Random smooth node function: a Gaussian combination of the domain's smooth
/// modes, or diffused noise when the domain has none.
inline Eigen::VectorXd random_smooth_function(const SampleDomain& d, std::mt19937_64& rng)
{
    std::normal_distribution<double> normal;
    if (d.smooth_modes.cols() > 0) {
        Eigen::VectorXd a(d.smooth_modes.cols());
        for (int i = 0; i < a.size(); ++i) {
            a[i] = normal(rng);
        }
        return d.smooth_modes * a;
    }
    Eigen::VectorXd f(d.num_nodes());
    for (int i = 0; i < f.size(); ++i) {
        f[i] = normal(rng);
    }
    // node -> point -> node averaging, weighted by the quadrature
    const Eigen::SparseMatrix<double> back =
        Eigen::SparseMatrix<double>(d.point_average.transpose()) * d.point_weights.asDiagonal();
    const Eigen::VectorXd norm = back * Eigen::VectorXd::Ones(d.num_points());
    for (int it = 0; it < 20; ++it) {
        f = (back * (d.point_average * f)).cwiseQuotient(norm);
    }
    return f / std::max(f.cwiseAbs().maxCoeff(), 1e-300);
}

inline ConformalField random_conformal_field(const SampleDomain& d, std::mt19937_64& rng)
{
    return make_mean_zero(random_smooth_function(d, rng), d.node_weights);
}

/// Random volume-neutral tensor field with smooth frame components.
inline DeformationTensor random_tensor_field(const SampleDomain& d, std::mt19937_64& rng)
{
    DeformationTensor h;
    h.components.resize(d.num_points(), 3);
    for (int c = 0; c < 3; ++c) {
        h.components.col(c) = d.point_average * random_smooth_function(d, rng);
    }
    return project_to_S20(h, d);
}

/// Random volume-neutral, edge-consistent tensor on a mesh: a combination of
/// the conformal part f g and the anisotropic part dw (x) dw for smooth f, w.
inline DeformationTensor random_edge_tensor(const DiscreteMetric& metric, const SampleDomain& d,
                                            std::mt19937_64& rng)
{
    const Eigen::VectorXd f = random_smooth_function(d, rng);
    const Eigen::VectorXd w = random_smooth_function(d, rng);
    const TriMesh& mesh = metric.mesh();
    Eigen::VectorXd rates = gradient_product_rates(mesh, w, w);
    const double scale = rates.cwiseAbs().maxCoeff() /
                         std::max(metric.edge_lengths().array().square().maxCoeff(), 1e-300);
    for (int e = 0; e < mesh.num_edges(); ++e) {
        const auto& ed = mesh.edges()[e];
        const double l2 = metric.edge_lengths()[e] * metric.edge_lengths()[e];
        rates[e] = rates[e] / std::max(scale, 1e-300) + l2 * 0.5 * (f[ed[0]] + f[ed[1]]);
    }
    return project_edge_tensor_to_S20(metric, rates);
}

} // namespace speclab
