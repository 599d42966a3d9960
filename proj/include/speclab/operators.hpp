#pragma once

#include "speclab/metric.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <vector>

namespace speclab {

/// Weak-form Laplacian of a discrete metric: cotangent stiffness K and
/// lumped (diagonal) mass M, so that K u = lambda M u.
struct OperatorPair {
    Eigen::SparseMatrix<double> stiffness;
    Eigen::VectorXd mass;
    /// Edges whose cotangent weight is negative (non-Delaunay); informational.
    std::vector<int> negative_weight_edges;
};

/// Cotangent weight of every edge, 0.5 * (cot alpha + cot beta).
inline Eigen::VectorXd cotan_weights(const DiscreteMetric& metric)
{
    const TriMesh& mesh = metric.mesh();
    Eigen::VectorXd w = Eigen::VectorXd::Zero(mesh.num_edges());
    for (int f = 0; f < mesh.num_faces(); ++f) {
        const FaceGeometry g = metric.face(f);
        for (int i = 0; i < 3; ++i) {
            w[mesh.face_edges()[f][i]] += 0.5 * g.cot[i];
        }
    }
    return w;
}

inline OperatorPair assemble_operators(const DiscreteMetric& metric)
{
    const TriMesh& mesh = metric.mesh();
    const int n = mesh.num_vertices();
    const Eigen::VectorXd w = cotan_weights(metric);

    OperatorPair ops;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(4 * static_cast<std::size_t>(mesh.num_edges()));
    for (int e = 0; e < mesh.num_edges(); ++e) {
        const auto& ed = mesh.edges()[e];
        trip.emplace_back(ed[0], ed[1], -w[e]);
        trip.emplace_back(ed[1], ed[0], -w[e]);
        trip.emplace_back(ed[0], ed[0], w[e]);
        trip.emplace_back(ed[1], ed[1], w[e]);
        if (w[e] < -1e-12) {
            ops.negative_weight_edges.push_back(e);
        }
    }
    ops.stiffness.resize(n, n);
    ops.stiffness.setFromTriplets(trip.begin(), trip.end());
    ops.mass = metric.vertex_masses();
    return ops;
}

} // namespace speclab
