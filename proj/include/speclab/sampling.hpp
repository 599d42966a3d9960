#pragma once

#include "speclab/errors.hpp"
#include "speclab/flat_torus.hpp"
#include "speclab/metric.hpp"
#include "speclab/spectrum.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cmath>
#include <memory>
#include <numbers>
#include <utility>
#include <vector>

namespace speclab {

/// Quadrature on which eigenfunctions, deformation tensors and certificates
/// are evaluated.
///
/// Values live at *nodes* (mesh vertices, or quadrature nodes of an exact
/// model); gradients and tensors live at *points* (mesh faces, or the same
/// quadrature nodes). Every point carries an orthonormal frame of the metric,
/// so g is the 2x2 identity there. `point_average` maps node fields to point
/// fields (vertex averaging on meshes, identity for exact models).
struct SampleDomain {
    enum class Kind { mesh, flat_torus, round_sphere };

    Kind kind = Kind::mesh;
    int dimension = 2;
    Eigen::VectorXd point_weights;
    Eigen::VectorXd node_weights;
    Eigen::SparseMatrix<double> point_average;
    /// P1 gradient operators (points x nodes) on meshes; empty for exact models.
    Eigen::SparseMatrix<double> grad_x_op;
    Eigen::SparseMatrix<double> grad_y_op;
    /// Optional smooth node functions used to draw random smooth fields.
    Eigen::MatrixXd smooth_modes;

    [[nodiscard]] double volume() const { return point_weights.sum(); }
    [[nodiscard]] int num_points() const { return static_cast<int>(point_weights.size()); }
    [[nodiscard]] int num_nodes() const { return static_cast<int>(node_weights.size()); }
    [[nodiscard]] bool has_gradient_operator() const { return grad_x_op.rows() > 0; }
};

/// An eigenspace basis sampled on a domain: values at nodes (the cluster
/// basis) and frame components of the gradients at points.
struct SampledCluster {
    EigenCluster cluster;
    std::shared_ptr<const SampleDomain> domain;
    Eigen::MatrixXd grad_x;
    Eigen::MatrixXd grad_y;

    [[nodiscard]] double eigenvalue() const { return cluster.value; }
    [[nodiscard]] int dimension() const { return cluster.dimension(); }
    [[nodiscard]] const Eigen::MatrixXd& values() const { return cluster.basis; }

    /// The same eigenspace expressed in the basis `basis * rotation`.
    [[nodiscard]] SampledCluster rotated(const Eigen::MatrixXd& rotation) const
    {
        SampledCluster out = *this;
        out.cluster.basis = cluster.basis * rotation;
        out.grad_x = grad_x * rotation;
        out.grad_y = grad_y * rotation;
        return out;
    }
};

/// Quadrature of a triangulated metric: faces are points, vertices are nodes.
inline std::shared_ptr<const SampleDomain> mesh_domain(const DiscreteMetric& metric,
                                                       Eigen::MatrixXd smooth_modes = {})
{
    const TriMesh& mesh = metric.mesh();
    auto d = std::make_shared<SampleDomain>();
    d->kind = SampleDomain::Kind::mesh;
    const int nf = mesh.num_faces();
    const int nv = mesh.num_vertices();
    d->point_weights.resize(nf);
    std::vector<Eigen::Triplet<double>> avg, gx, gy;
    avg.reserve(3 * static_cast<std::size_t>(nf));
    gx.reserve(3 * static_cast<std::size_t>(nf));
    gy.reserve(3 * static_cast<std::size_t>(nf));
    for (int f = 0; f < nf; ++f) {
        const FaceGeometry g = metric.face(f);
        d->point_weights[f] = g.area;
        const auto grads = g.hat_gradients();
        for (int i = 0; i < 3; ++i) {
            const int v = mesh.faces()[f][i];
            avg.emplace_back(f, v, 1.0 / 3.0);
            gx.emplace_back(f, v, grads[i].x());
            gy.emplace_back(f, v, grads[i].y());
        }
    }
    d->point_average.resize(nf, nv);
    d->point_average.setFromTriplets(avg.begin(), avg.end());
    d->grad_x_op.resize(nf, nv);
    d->grad_x_op.setFromTriplets(gx.begin(), gx.end());
    d->grad_y_op.resize(nf, nv);
    d->grad_y_op.setFromTriplets(gy.begin(), gy.end());
    d->node_weights = metric.vertex_masses();
    d->smooth_modes = std::move(smooth_modes);
    return d;
}

/// Samples a FEM cluster with P1 gradients on the mesh domain.
inline SampledCluster sample_cluster(const EigenCluster& cluster,
                                     std::shared_ptr<const SampleDomain> domain)
{
    if (!domain->has_gradient_operator()) {
        throw ContractViolation("sample_cluster needs a mesh domain with P1 gradients");
    }
    if (cluster.basis.rows() != domain->num_nodes()) {
        throw ContractViolation("cluster basis does not match the domain's node count");
    }
    SampledCluster s;
    s.cluster = cluster;
    s.grad_x = domain->grad_x_op * cluster.basis;
    s.grad_y = domain->grad_y_op * cluster.basis;
    s.domain = std::move(domain);
    return s;
}

inline SampledCluster sample_cluster(const EigenCluster& cluster, const DiscreteMetric& metric)
{
    return sample_cluster(cluster, mesh_domain(metric));
}

namespace detail {

inline Eigen::SparseMatrix<double> identity_sparse(int n)
{
    Eigen::SparseMatrix<double> id(n, n);
    id.setIdentity();
    return id;
}

} // namespace detail

/// Exact model of a flat torus: an n x n grid of nodes on the fundamental
/// domain with equal weights. The rule integrates trigonometric polynomials
/// with lattice frequencies below n exactly. Frames are the Euclidean axes.
struct TorusQuadrature {
    std::shared_ptr<const SampleDomain> domain;
    std::vector<Eigen::Vector2d> nodes;
};

inline TorusQuadrature torus_quadrature(const FlatTorusLattice& lattice, int n = 48,
                                        int smooth_mode_count = 24)
{
    auto d = std::make_shared<SampleDomain>();
    d->kind = SampleDomain::Kind::flat_torus;
    TorusQuadrature q;
    q.nodes.reserve(static_cast<std::size_t>(n) * n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            q.nodes.push_back(lattice.basis() * Eigen::Vector2d(i, j) / n);
        }
    }
    const int np = n * n;
    d->point_weights = Eigen::VectorXd::Constant(np, lattice.area() / np);
    d->node_weights = d->point_weights;
    d->point_average = detail::identity_sparse(np);
    if (smooth_mode_count > 0) {
        const auto modes = flat_torus_spectrum(lattice, smooth_mode_count);
        d->smooth_modes.resize(np, smooth_mode_count);
        for (int c = 0; c < smooth_mode_count; ++c) {
            for (int p = 0; p < np; ++p) {
                d->smooth_modes(p, c) = modes[c + 1].value(q.nodes[p]);
            }
        }
    }
    q.domain = std::move(d);
    return q;
}

/// Samples exact torus modes (a full eigenvalue level) on a torus quadrature.
inline SampledCluster sample_torus_level(const TorusLevel& level, const TorusQuadrature& q)
{
    const int m = static_cast<int>(level.modes.size());
    const int np = static_cast<int>(q.nodes.size());
    SampledCluster s;
    s.domain = q.domain;
    s.cluster.k_lo = level.k_lo;
    s.cluster.k_hi = level.k_hi;
    s.cluster.value = level.modes.front().eigenvalue;
    s.cluster.is_bottom = level.previous < s.cluster.value;
    s.cluster.is_top = s.cluster.value < level.next;
    s.cluster.basis.resize(np, m);
    s.grad_x.resize(np, m);
    s.grad_y.resize(np, m);
    for (int c = 0; c < m; ++c) {
        s.cluster.members.push_back(level.modes[c].eigenvalue);
        for (int p = 0; p < np; ++p) {
            s.cluster.basis(p, c) = level.modes[c].value(q.nodes[p]);
            const Eigen::Vector2d g = level.modes[c].gradient(q.nodes[p]);
            s.grad_x(p, c) = g.x();
            s.grad_y(p, c) = g.y();
        }
    }
    return s;
}

/// Exact eigenspace of lambda_k on a flat torus.
inline SampledCluster torus_cluster(const FlatTorusLattice& lattice, int k, int n = 48)
{
    return sample_torus_level(flat_torus_level(lattice, k), torus_quadrature(lattice, n));
}

/// Gauss-Legendre nodes and weights on [-1, 1].
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_legendre(int n)
{
    Eigen::VectorXd x(n), w(n);
    for (int i = 0; i < n; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (int l = 2; l <= n; ++l) {
                const double p2 = ((2.0 * l - 1.0) * z * p1 - (l - 1.0) * p0) / l;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    return {x, w};
}

/// Value and frame gradient (d/dtheta, (1/sin theta) d/dphi) of a real,
/// L2-orthonormal spherical harmonic on the unit sphere. Order m < 0 selects
/// the sine branch.
struct HarmonicSample {
    double value = 0.0;
    Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
};

inline HarmonicSample real_spherical_harmonic(int l, int m, double theta, double phi)
{
    const int am = std::abs(m);
    const double x = std::cos(theta);
    const double s = std::sin(theta);
    // associated Legendre P_l^am and P_{l-1}^am, without the Condon-Shortley phase
    double pmm = 1.0;
    for (int i = 1; i <= am; ++i) {
        pmm *= (2.0 * i - 1.0) * s;
    }
    double p_l = pmm;
    double p_lm1 = 0.0;
    if (l > am) {
        double a = pmm;
        double b = x * (2.0 * am + 1.0) * pmm;
        for (int ll = am + 2; ll <= l; ++ll) {
            const double c = ((2.0 * ll - 1.0) * x * b - (ll + am - 1.0) * a) / (ll - am);
            a = b;
            b = c;
        }
        p_l = b;
        p_lm1 = a;
    }
    const double dp_dtheta = (l * x * p_l - (l + am) * p_lm1) / s;

    double ratio = 1.0; // (l - am)! / (l + am)!
    for (int i = l - am + 1; i <= l + am; ++i) {
        ratio /= i;
    }
    double norm = std::sqrt((2.0 * l + 1.0) / (4.0 * std::numbers::pi) * ratio);
    if (m != 0) {
        norm *= std::sqrt(2.0);
    }
    double trig = 1.0;
    double dtrig = 0.0;
    if (m > 0) {
        trig = std::cos(m * phi);
        dtrig = -m * std::sin(m * phi);
    } else if (m < 0) {
        trig = std::sin(am * phi);
        dtrig = am * std::cos(am * phi);
    }
    HarmonicSample out;
    out.value = norm * p_l * trig;
    out.gradient = Eigen::Vector2d(norm * dp_dtheta * trig, norm * p_l * dtrig / s);
    return out;
}

/// Product Gauss-Legendre x uniform-longitude rule on the unit round sphere.
/// Frames are (e_theta, e_phi).
struct SphereQuadrature {
    std::shared_ptr<const SampleDomain> domain;
    std::vector<double> theta;
    std::vector<double> phi;

    [[nodiscard]] Eigen::Vector3d position(int p) const
    {
        return {std::sin(theta[p]) * std::cos(phi[p]), std::sin(theta[p]) * std::sin(phi[p]),
                std::cos(theta[p])};
    }
};

inline SphereQuadrature sphere_quadrature(int n_theta = 24, int smooth_degree = 3)
{
    const auto [x, w] = gauss_legendre(n_theta);
    const int n_phi = 2 * n_theta;
    SphereQuadrature q;
    auto d = std::make_shared<SampleDomain>();
    d->kind = SampleDomain::Kind::round_sphere;
    const int np = n_theta * n_phi;
    d->point_weights.resize(np);
    int p = 0;
    for (int i = 0; i < n_theta; ++i) {
        for (int j = 0; j < n_phi; ++j, ++p) {
            q.theta.push_back(std::acos(x[i]));
            q.phi.push_back(2.0 * std::numbers::pi * j / n_phi);
            d->point_weights[p] = w[i] * 2.0 * std::numbers::pi / n_phi;
        }
    }
    d->node_weights = d->point_weights;
    d->point_average = detail::identity_sparse(np);
    const int modes = (smooth_degree + 1) * (smooth_degree + 1) - 1;
    if (modes > 0) {
        d->smooth_modes.resize(np, modes);
        int c = 0;
        for (int l = 1; l <= smooth_degree; ++l) {
            for (int m = -l; m <= l; ++m, ++c) {
                for (int k = 0; k < np; ++k) {
                    d->smooth_modes(k, c) = real_spherical_harmonic(l, m, q.theta[k], q.phi[k]).value;
                }
            }
        }
    }
    q.domain = std::move(d);
    return q;
}

/// Exact eigenspace of degree-l harmonics on the unit round sphere
/// (eigenvalue l(l+1), indices l^2 .. l^2 + 2l).
inline SampledCluster sphere_cluster(int l, const SphereQuadrature& q)
{
    if (l < 1) {
        throw ContractViolation("sphere_cluster needs degree l >= 1");
    }
    const int m = 2 * l + 1;
    const int np = static_cast<int>(q.theta.size());
    SampledCluster s;
    s.domain = q.domain;
    s.cluster.k_lo = l * l;
    s.cluster.k_hi = l * l + 2 * l;
    s.cluster.value = l * (l + 1.0);
    s.cluster.members.assign(static_cast<std::size_t>(m), s.cluster.value);
    s.cluster.is_bottom = true;
    s.cluster.is_top = true;
    s.cluster.basis.resize(np, m);
    s.grad_x.resize(np, m);
    s.grad_y.resize(np, m);
    for (int c = 0; c < m; ++c) {
        for (int p = 0; p < np; ++p) {
            const auto h = real_spherical_harmonic(l, c - l, q.theta[p], q.phi[p]);
            s.cluster.basis(p, c) = h.value;
            s.grad_x(p, c) = h.gradient.x();
            s.grad_y(p, c) = h.gradient.y();
        }
    }
    return s;
}

inline SampledCluster sphere_cluster(int l, int n_theta = 24)
{
    return sphere_cluster(l, sphere_quadrature(n_theta));
}

} // namespace speclab
