#pragma once

#include "speclab/errors.hpp"
#include "speclab/mesh.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <utility>

namespace speclab {

/// Area of a triangle from its side lengths (Kahan's stable Heron formula).
/// Returns 0 for degenerate or impossible side lengths.
inline double heron_area(double a, double b, double c)
{
    std::array<double, 3> s{a, b, c};
    std::sort(s.begin(), s.end(), std::greater<>());
    const double x = s[0], y = s[1], z = s[2];
    const double p = (x + (y + z)) * (z - (x - y)) * (z + (x - y)) * (x + (y - z));
    return p > 0.0 ? 0.25 * std::sqrt(p) : 0.0;
}

/// Intrinsic geometry of one face: side lengths (opposite each local vertex),
/// area, cotangents of the corner angles and the 2D positions of its vertices
/// in the face frame (vertex 0 at the origin, vertex 1 on the positive x axis).
struct FaceGeometry {
    std::array<double, 3> length{};
    double area = 0.0;
    std::array<double, 3> cot{};
    std::array<Eigen::Vector2d, 3> corner{};

    /// Gradients of the three P1 hat functions, in the face frame.
    [[nodiscard]] std::array<Eigen::Vector2d, 3> hat_gradients() const
    {
        std::array<Eigen::Vector2d, 3> g;
        for (int i = 0; i < 3; ++i) {
            const Eigen::Vector2d e = corner[(i + 2) % 3] - corner[(i + 1) % 3];
            // rotate the opposite edge by +90 degrees; vertices are counterclockwise
            g[i] = Eigen::Vector2d(-e.y(), e.x()) / (2.0 * area);
        }
        return g;
    }

    /// Edge vector from local vertex `i+1` to local vertex `i+2` in the face frame.
    [[nodiscard]] Eigen::Vector2d edge_vector(int i) const
    {
        return corner[(i + 2) % 3] - corner[(i + 1) % 3];
    }
};

inline FaceGeometry face_geometry(double l0, double l1, double l2)
{
    FaceGeometry g;
    g.length = {l0, l1, l2};
    g.area = heron_area(l0, l1, l2);
    for (int i = 0; i < 3; ++i) {
        const double a = g.length[i];
        const double b = g.length[(i + 1) % 3];
        const double c = g.length[(i + 2) % 3];
        g.cot[i] = (b * b + c * c - a * a) / (4.0 * g.area);
    }
    g.corner[0] = Eigen::Vector2d::Zero();
    g.corner[1] = Eigen::Vector2d(l2, 0.0);
    const double x = (l1 * l1 + l2 * l2 - l0 * l0) / (2.0 * l2);
    g.corner[2] = Eigen::Vector2d(x, 2.0 * g.area / l2);
    return g;
}

/// Piecewise-flat metric: one positive length per mesh edge.
class DiscreteMetric {
public:
    DiscreteMetric(std::shared_ptr<const TriMesh> mesh, Eigen::VectorXd edge_lengths)
        : mesh_(std::move(mesh)), lengths_(std::move(edge_lengths))
    {
        if (!mesh_) {
            throw MetricError("metric needs a mesh");
        }
        if (lengths_.size() != mesh_->num_edges()) {
            throw MetricError("metric has " + std::to_string(lengths_.size()) +
                              " lengths for " + std::to_string(mesh_->num_edges()) + " edges");
        }
        for (int e = 0; e < lengths_.size(); ++e) {
            if (!(lengths_[e] > 0.0) || !std::isfinite(lengths_[e])) {
                const auto& ed = mesh_->edges()[e];
                throw MetricError("edge " + std::to_string(e) + " (" + std::to_string(ed[0]) +
                                  ", " + std::to_string(ed[1]) + ") has non-positive length");
            }
        }
        for (int f = 0; f < mesh_->num_faces(); ++f) {
            const auto l = face_lengths(f);
            for (int i = 0; i < 3; ++i) {
                if (!(l[i] < l[(i + 1) % 3] + l[(i + 2) % 3])) {
                    throw MetricError("face " + std::to_string(f) +
                                      " violates the strict triangle inequality");
                }
            }
        }
    }

    [[nodiscard]] const TriMesh& mesh() const { return *mesh_; }
    [[nodiscard]] const std::shared_ptr<const TriMesh>& mesh_ptr() const { return mesh_; }
    [[nodiscard]] const Eigen::VectorXd& edge_lengths() const { return lengths_; }

    [[nodiscard]] std::array<double, 3> face_lengths(int f) const
    {
        const auto& fe = mesh_->face_edges()[f];
        return {lengths_[fe[0]], lengths_[fe[1]], lengths_[fe[2]]};
    }

    [[nodiscard]] FaceGeometry face(int f) const
    {
        const auto l = face_lengths(f);
        return face_geometry(l[0], l[1], l[2]);
    }

    [[nodiscard]] Eigen::VectorXd face_areas() const
    {
        Eigen::VectorXd a(mesh_->num_faces());
        for (int f = 0; f < mesh_->num_faces(); ++f) {
            const auto l = face_lengths(f);
            a[f] = heron_area(l[0], l[1], l[2]);
        }
        return a;
    }

    /// Barycentric lumped vertex masses: one third of the adjacent face areas.
    [[nodiscard]] Eigen::VectorXd vertex_masses() const
    {
        Eigen::VectorXd m = Eigen::VectorXd::Zero(mesh_->num_vertices());
        const Eigen::VectorXd a = face_areas();
        for (int f = 0; f < mesh_->num_faces(); ++f) {
            for (int v : mesh_->faces()[f]) {
                m[v] += a[f] / 3.0;
            }
        }
        return m;
    }

    /// Circumcentric (cotangent) vertex areas, (1/8) sum of l^2 cot over the
    /// edges incident to each vertex. These are the weights for which the
    /// first variation of total_volume under apply_conformal_factor is exact.
    [[nodiscard]] Eigen::VectorXd circumcentric_areas() const
    {
        Eigen::VectorXd m = Eigen::VectorXd::Zero(mesh_->num_vertices());
        for (int f = 0; f < mesh_->num_faces(); ++f) {
            const FaceGeometry g = face(f);
            const Face& t = mesh_->faces()[f];
            for (int i = 0; i < 3; ++i) {
                const double w = g.length[i] * g.length[i] * g.cot[i] / 8.0;
                m[t[(i + 1) % 3]] += w;
                m[t[(i + 2) % 3]] += w;
            }
        }
        return m;
    }

private:
    std::shared_ptr<const TriMesh> mesh_;
    Eigen::VectorXd lengths_;
};

/// Sum of Heron areas.
inline double total_volume(const DiscreteMetric& metric)
{
    return metric.face_areas().sum();
}

/// Induced metric of the mesh embedding.
inline DiscreteMetric metric_from_embedding(std::shared_ptr<const TriMesh> mesh)
{
    Eigen::VectorXd l(mesh->num_edges());
    for (int e = 0; e < mesh->num_edges(); ++e) {
        const auto& ed = mesh->edges()[e];
        l[e] = (mesh->vertices()[ed[0]] - mesh->vertices()[ed[1]]).norm();
        if (!(l[e] > 0.0)) {
            throw MetricError("zero-length edge " + std::to_string(e) + " between vertices " +
                              std::to_string(ed[0]) + " and " + std::to_string(ed[1]));
        }
    }
    return DiscreteMetric(std::move(mesh), std::move(l));
}

inline DiscreteMetric metric_from_embedding(const TriMesh& mesh)
{
    return metric_from_embedding(std::make_shared<const TriMesh>(mesh));
}

/// The metric c * g: lengths scale by sqrt(c), areas by c, eigenvalues by 1/c.
inline DiscreteMetric scale_metric(const DiscreteMetric& metric, double c)
{
    if (!(c > 0.0)) {
        throw ContractViolation("metric scale factor must be positive");
    }
    return DiscreteMetric(metric.mesh_ptr(), metric.edge_lengths() * std::sqrt(c));
}

/// Uniform rescale to the requested total area.
inline DiscreteMetric normalize_volume(const DiscreteMetric& metric, double target)
{
    if (!(target > 0.0)) {
        throw ContractViolation("target volume must be positive");
    }
    const double vol = total_volume(metric);
    DiscreteMetric out(metric.mesh_ptr(), metric.edge_lengths() * std::sqrt(target / vol));
    // one correction pass absorbs the rounding of the square root
    const double v2 = total_volume(out);
    if (std::abs(v2 - target) > 1e-14 * target) {
        return DiscreteMetric(metric.mesh_ptr(), out.edge_lengths() * std::sqrt(target / v2));
    }
    return out;
}

/// Per-vertex scalar field phi; h = phi * g for conformal deformations.
struct ConformalField {
    Eigen::VectorXd values;
    bool mean_zero = false;
};

/// Mass-weighted projection onto zero-mean fields.
inline ConformalField make_mean_zero(Eigen::VectorXd values, const Eigen::VectorXd& node_weights)
{
    const double mean = node_weights.dot(values) / node_weights.sum();
    values.array() -= mean;
    return ConformalField{std::move(values), true};
}

inline ConformalField make_mean_zero(Eigen::VectorXd values, const DiscreteMetric& metric)
{
    return make_mean_zero(std::move(values), metric.vertex_masses());
}

/// Discrete e^{t phi} g: each edge length is multiplied by exp(t (phi_i + phi_j) / 4).
inline DiscreteMetric apply_conformal_factor(const DiscreteMetric& metric,
                                             const ConformalField& phi, double t)
{
    const TriMesh& mesh = metric.mesh();
    if (phi.values.size() != mesh.num_vertices()) {
        throw ContractViolation("conformal field has " + std::to_string(phi.values.size()) +
                                " values for " + std::to_string(mesh.num_vertices()) +
                                " vertices");
    }
    Eigen::VectorXd l = metric.edge_lengths();
    for (int e = 0; e < mesh.num_edges(); ++e) {
        const auto& ed = mesh.edges()[e];
        l[e] *= std::exp(t * (phi.values[ed[0]] + phi.values[ed[1]]) / 4.0);
    }
    return DiscreteMetric(metric.mesh_ptr(), std::move(l));
}

} // namespace speclab
