#pragma once

#include "speclab/deformation.hpp"
#include "speclab/errors.hpp"
#include "speclab/metric.hpp"
#include "speclab/sampling.hpp"
#include "speclab/spectrum.hpp"

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace speclab {

enum class FlowMode { ascend, descend };
enum class FlowRestriction { all_metrics, conformal };

/// Deformation generator independent of the current metric: a vertex
/// function phi (conformal direction phi g) or rates of squared edge lengths.
struct FlowGenerator {
    std::string label;
    std::optional<Eigen::VectorXd> phi;
    std::optional<Eigen::VectorXd> edge_rates;
};

struct FlowConfig {
    int k = 1;
    FlowMode mode = FlowMode::ascend;
    FlowRestriction restriction = FlowRestriction::conformal;
    double step = 0.05;
    int max_iters = 100;
    std::vector<FlowGenerator> basis;
    /// Directions with score <= stop_tol * lambda_k count as non-improving.
    double stop_tol = 1e-3;
    double cluster_tol = 1e-2; ///< clustering for the record flags and merge detection
    /// Clustering of the branches that direction scoring treats as one
    /// eigenvalue; eigenvalues further apart than this are moved independently.
    double active_tol = 1e-3;
    bool stop_on_merge = false;
    int max_halvings = 20;
};

struct FlowRecord {
    int iteration = 0;
    std::vector<double> eigenvalues; ///< lambda_1 .. lambda_{k+1}
    double volume = 0.0;
    int direction = -1;              ///< candidate id, -1 for the initial snapshot, kSpanDirection for a combination
    double predicted_slope = 0.0;
    double realized_change = 0.0;
    double step = 0.0;
    int halvings = 0;
    int cluster_lo = 0;
    int cluster_hi = 0;
    bool is_bottom = true;
    bool is_top = true;
    bool merged = false;             ///< the cluster of lambda_k grew at this iteration
};

/// Direction id of a step along a combination of basis generators.
inline constexpr int kSpanDirection = -2;

struct FlowTrajectory {
    enum class Termination { critical_wrt_basis, no_monotone_step, max_iters, cluster_merge };

    std::vector<FlowRecord> records;
    std::optional<DiscreteMetric> final_metric;
    Termination termination = Termination::max_iters;
    /// Estimate of C in |realized - step * predicted| <= C step^2.
    double slope_constant = 0.0;
};

inline const char* termination_name(FlowTrajectory::Termination t)
{
    switch (t) {
    case FlowTrajectory::Termination::critical_wrt_basis: return "numerically critical w.r.t. basis";
    case FlowTrajectory::Termination::no_monotone_step: return "no monotone step after halving";
    case FlowTrajectory::Termination::max_iters: return "max iterations";
    case FlowTrajectory::Termination::cluster_merge: return "cluster merge";
    }
    return "?";
}

struct DirectionChoice {
    int index = -1;
    double score = -std::numeric_limits<double>::infinity();
    DerivativePair derivatives;
};

/// Picks the candidate with the best first-order change of lambda_k. The
/// score is the right derivative from branch sorting (the least eigenvalue of
/// the projected operator when k is the bottom of its cluster); descend
/// scores its negative. Ties go to the lowest id.
inline DirectionChoice best_direction(const SampledCluster& c, int k,
                                      const std::vector<DeformationTensor>& candidates,
                                      FlowMode mode)
{
    if (candidates.empty()) {
        throw ContractViolation("direction basis is empty");
    }
    DirectionChoice best;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const DerivativePair d = directional_derivatives(c, candidates[i], k);
        const double score = mode == FlowMode::ascend ? d.right : -d.right;
        if (score > best.score) {
            best.index = static_cast<int>(i);
            best.score = score;
            best.derivatives = d;
        }
    }
    return best;
}

// --- default bases ----------------------------------------------------------

/// The first `count` non-constant FEM eigenfunctions as conformal generators.
inline std::vector<FlowGenerator> default_conformal_basis(const DiscreteMetric& metric,
                                                          int count = 20)
{
    const int n = metric.mesh().num_vertices();
    const int c = std::min(count, n - 1);
    const EigenSystem sys = solve_spectrum(metric, c);
    std::vector<FlowGenerator> out;
    for (int i = 1; i <= c; ++i) {
        out.push_back({"eigenfunction " + std::to_string(i),
                       make_mean_zero(sys.eigenfunction(i), metric).values, std::nullopt});
    }
    return out;
}

/// Trace-free shears dw (x) dz + dz (x) dw built from the first `count`
/// non-constant eigenfunctions, as edge-rate generators, followed by the
/// conformal generators of the same eigenfunctions.
inline std::vector<FlowGenerator> default_full_basis(const DiscreteMetric& metric, int count = 5)
{
    const int n = metric.mesh().num_vertices();
    const int c = std::min(count, n - 1);
    const EigenSystem sys = solve_spectrum(metric, c);
    std::vector<FlowGenerator> out;
    for (int a = 1; a <= c; ++a) {
        for (int b = a; b <= c; ++b) {
            out.push_back({"shear " + std::to_string(a) + "x" + std::to_string(b), std::nullopt,
                           gradient_product_rates(metric.mesh(), sys.eigenfunction(a),
                                                  sys.eigenfunction(b))});
        }
    }
    for (int a = 1; a <= c; ++a) {
        out.push_back({"conformal " + std::to_string(a), sys.eigenfunction(a), std::nullopt});
    }
    return out;
}

namespace detail {

/// A generator realised at the current metric: a volume-neutral tensor with
/// unit root-mean-square Frobenius norm, plus the matching path data.
struct RealisedDirection {
    DeformationTensor tensor;
    std::optional<ConformalField> phi;
};

inline double rms_norm(const DeformationTensor& h, const SampleDomain& d)
{
    double s = 0.0;
    for (int p = 0; p < d.num_points(); ++p) {
        const Eigen::Matrix2d m = h.at(p);
        s += d.point_weights[p] * m.squaredNorm();
    }
    return std::sqrt(s / d.volume());
}

inline std::optional<RealisedDirection> realise(const FlowGenerator& gen, const DiscreteMetric& metric,
                                                const SampleDomain& d, FlowRestriction restriction)
{
    RealisedDirection out;
    if (restriction == FlowRestriction::conformal) {
        if (!gen.phi) {
            throw ContractViolation("conformal flow needs conformal generators ('" + gen.label + "')");
        }
        ConformalField phi = make_mean_zero(*gen.phi, d.node_weights);
        DeformationTensor h = conformal_tensor(d, phi);
        const double r = rms_norm(h, d);
        if (!(r > 1e-12)) {
            return std::nullopt;
        }
        phi.values /= r;
        out.tensor = conformal_tensor(d, phi);
        out.tensor.volume_neutral = true;
        out.phi = std::move(phi);
        return out;
    }
    Eigen::VectorXd rates;
    if (gen.edge_rates) {
        rates = *gen.edge_rates;
    } else if (gen.phi) {
        const TriMesh& mesh = metric.mesh();
        rates.resize(mesh.num_edges());
        for (int e = 0; e < mesh.num_edges(); ++e) {
            const auto& ed = mesh.edges()[e];
            const double l = metric.edge_lengths()[e];
            rates[e] = l * l * 0.5 * ((*gen.phi)[ed[0]] + (*gen.phi)[ed[1]]);
        }
    } else {
        throw ContractViolation("flow generator '" + gen.label + "' is empty");
    }
    DeformationTensor h = project_edge_tensor_to_S20(metric, rates);
    const double r = rms_norm(h, d);
    if (!(r > 1e-12)) {
        return std::nullopt;
    }
    out.tensor = h.scaled(1.0 / r);
    return out;
}

/// Weighted Frobenius inner product of two tensor fields, divided by the volume.
inline double rms_inner(const DeformationTensor& a, const DeformationTensor& b, const SampleDomain& d)
{
    double s = 0.0;
    for (int p = 0; p < d.num_points(); ++p) {
        s += d.point_weights[p] * (a.components(p, 0) * b.components(p, 0) +
                                   2.0 * a.components(p, 1) * b.components(p, 1) +
                                   a.components(p, 2) * b.components(p, 2));
    }
    return s / d.volume();
}

/// Coefficients y with |y| <= 1 maximising the least eigenvalue of
/// sum_r y_r B_r. Projected gradient ascent on a soft-min, with the
/// smoothing tightened in stages; returns the best iterate seen.
inline std::pair<Eigen::VectorXd, double> maximise_least_eigenvalue(const std::vector<Eigen::MatrixXd>& b,
                                                                    Eigen::VectorXd y)
{
    const int r = static_cast<int>(b.size());
    const Eigen::Index m = b.front().rows();
    double scale = 0.0;
    for (const auto& bi : b) {
        scale = std::max(scale, bi.norm());
    }
    if (!(scale > 0.0)) {
        return {y, 0.0};
    }
    auto assemble = [&](const Eigen::VectorXd& c) {
        Eigen::MatrixXd s = Eigen::MatrixXd::Zero(m, m);
        for (int i = 0; i < r; ++i) {
            s += c[i] * b[static_cast<std::size_t>(i)];
        }
        return s;
    };
    auto project = [](Eigen::VectorXd c) {
        const double n = c.norm();
        return n > 1.0 ? Eigen::VectorXd(c / n) : c;
    };
    struct Smoothed {
        double value;
        double least;
        Eigen::VectorXd grad;
    };
    auto evaluate = [&](const Eigen::VectorXd& c, double beta) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(assemble(c));
        const Eigen::VectorXd mu = es.eigenvalues();
        const double lo = mu[0];
        Eigen::VectorXd p = (-beta * (mu.array() - lo)).exp().matrix();
        const double z = p.sum();
        p /= z;
        Smoothed out{lo - std::log(z) / beta, lo, Eigen::VectorXd(r)};
        for (int i = 0; i < r; ++i) {
            const Eigen::MatrixXd bv = b[static_cast<std::size_t>(i)] * es.eigenvectors();
            out.grad[i] = (es.eigenvectors().cwiseProduct(bv).colwise().sum().transpose().array() *
                           p.array())
                              .sum();
        }
        return out;
    };

    y = project(y);
    Eigen::VectorXd best = y;
    double best_value = evaluate(y, 1.0 / scale).least;
    for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
        const double beta = 1.0 / (eps * scale);
        double t = 1.0 / scale;
        Smoothed cur = evaluate(y, beta);
        for (int it = 0; it < 150; ++it) {
            bool moved = false;
            for (int bt = 0; bt < 30; ++bt, t *= 0.5) {
                const Eigen::VectorXd trial = project(y + t * cur.grad);
                const Smoothed next = evaluate(trial, beta);
                // sufficient increase along the projected step
                if (next.value >= cur.value + 1e-4 * cur.grad.dot(trial - y)) {
                    moved = (trial - y).norm() > 1e-14;
                    y = trial;
                    cur = next;
                    t *= 2.0;
                    break;
                }
            }
            if (cur.least > best_value) {
                best_value = cur.least;
                best = y;
            }
            if (!moved) {
                break;
            }
        }
    }
    return {best, best_value};
}

/// Linear combination of realised directions; edge rates and conformal
/// factors combine linearly with the tensors.
inline RealisedDirection combine(const std::vector<RealisedDirection>& dirs, const Eigen::VectorXd& c)
{
    RealisedDirection out = dirs.front();
    out.tensor = dirs.front().tensor.scaled(c[0]);
    if (out.phi) {
        out.phi->values *= c[0];
    }
    for (std::size_t i = 1; i < dirs.size(); ++i) {
        const double ci = c[static_cast<Eigen::Index>(i)];
        out.tensor.components += ci * dirs[i].tensor.components;
        if (out.tensor.edge_rates && dirs[i].tensor.edge_rates) {
            *out.tensor.edge_rates += ci * *dirs[i].tensor.edge_rates;
        }
        if (out.tensor.conformal && dirs[i].tensor.conformal) {
            out.tensor.conformal->values += ci * dirs[i].tensor.conformal->values;
        }
        if (out.phi && dirs[i].phi) {
            out.phi->values += ci * dirs[i].phi->values;
        }
    }
    return out;
}

/// Best unit-norm combination of the generators when the score is the least
/// eigenvalue of a linear matrix function (k at the bottom of its cluster in
/// ascend mode, at the top in descend mode). Empty when that is not the case
/// or the combination does not beat `incumbent`.
inline std::optional<RealisedDirection> span_direction(const SampledCluster& sc, int k,
                                                       const std::vector<RealisedDirection>& dirs,
                                                       int incumbent_generator, double incumbent_sign,
                                                       double incumbent, FlowMode mode)
{
    const int m = sc.dimension();
    const int j = k - sc.cluster.k_lo;
    const bool concave = mode == FlowMode::ascend ? j == 0 : j == m - 1;
    const int r = static_cast<int>(dirs.size());
    if (!concave || r < 2) {
        return std::nullopt;
    }
    const double sign = mode == FlowMode::ascend ? 1.0 : -1.0;
    Eigen::MatrixXd gram(r, r);
    std::vector<Eigen::MatrixXd> a;
    for (int i = 0; i < r; ++i) {
        a.push_back(sign * projected_operator(sc, dirs[static_cast<std::size_t>(i)].tensor).matrix);
        for (int l = 0; l <= i; ++l) {
            gram(i, l) = gram(l, i) = rms_inner(dirs[static_cast<std::size_t>(i)].tensor,
                                                dirs[static_cast<std::size_t>(l)].tensor, *sc.domain);
        }
    }
    // orthonormal coordinates y of the span: c = E y with E^T G E = I
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    const double top = es.eigenvalues().maxCoeff();
    std::vector<int> keep;
    for (int i = 0; i < r; ++i) {
        if (es.eigenvalues()[i] > 1e-10 * top) {
            keep.push_back(i);
        }
    }
    Eigen::MatrixXd e(r, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t q = 0; q < keep.size(); ++q) {
        e.col(static_cast<Eigen::Index>(q)) =
            es.eigenvectors().col(keep[q]) / std::sqrt(es.eigenvalues()[keep[q]]);
    }
    std::vector<Eigen::MatrixXd> b;
    for (Eigen::Index q = 0; q < e.cols(); ++q) {
        Eigen::MatrixXd s = Eigen::MatrixXd::Zero(m, m);
        for (int i = 0; i < r; ++i) {
            s += e(i, q) * a[static_cast<std::size_t>(i)];
        }
        b.push_back(s);
    }
    Eigen::VectorXd c0 = Eigen::VectorXd::Zero(r);
    c0[incumbent_generator] = incumbent_sign;
    // y = E^+ c for c in the span
    const Eigen::VectorXd y0 = e.completeOrthogonalDecomposition().solve(c0);
    auto [y, value] = maximise_least_eigenvalue(b, y0);
    if (!(value > 0.0) || !(value > incumbent * (1.0 + 1e-9))) {
        return std::nullopt;
    }
    y /= y.norm();
    return combine(dirs, e * y);
}

inline int flow_count(const DiscreteMetric& metric, int k)
{
    return std::min(metric.mesh().num_vertices() - 1, k + 7);
}

inline FlowRecord snapshot(const EigenSystem& sys, const DiscreteMetric& metric, int k,
                           const EigenCluster& c)
{
    FlowRecord r;
    r.eigenvalues.assign(sys.eigenvalues.begin(),
                         sys.eigenvalues.begin() + std::min(k + 1, sys.count()));
    r.volume = total_volume(metric);
    r.cluster_lo = c.k_lo;
    r.cluster_hi = c.k_hi;
    r.is_bottom = c.is_bottom;
    r.is_top = c.is_top;
    return r;
}

} // namespace detail

struct FlowStepResult {
    DiscreteMetric metric;
    FlowRecord record;
    bool accepted = false;
    bool critical = false;
};

/// One flow iteration: scores the basis at `metric`, moves along the best
/// direction, renormalises the volume and halves the step until lambda_k
/// moves the requested way. Throws FlowAbort when every halving leaves the
/// space of metrics.
inline FlowStepResult flow_step(const DiscreteMetric& metric, const FlowConfig& config)
{
    if (!(config.step > 0.0)) {
        throw ContractViolation("flow step must be positive");
    }
    if (config.basis.empty()) {
        throw ContractViolation("flow basis is empty");
    }
    const int k = config.k;
    const double volume = total_volume(metric);
    const EigenSystem sys = solve_spectrum(metric, detail::flow_count(metric, k));
    if (k < 1 || k >= sys.count()) {
        throw ContractViolation("flow index out of range");
    }
    const auto clusters = cluster_eigenvalues(sys, config.cluster_tol);
    const EigenCluster& cl = cluster_containing(clusters, k);
    const auto active = cluster_eigenvalues(sys, std::min(config.active_tol, config.cluster_tol));
    const auto domain = mesh_domain(metric);
    const SampledCluster sc = sample_cluster(cluster_containing(active, k), domain);

    std::vector<detail::RealisedDirection> generators;
    std::vector<detail::RealisedDirection> dirs;
    std::vector<DeformationTensor> candidates;
    std::vector<std::string> labels;
    for (const auto& gen : config.basis) {
        auto r = detail::realise(gen, metric, *domain, config.restriction);
        if (!r) {
            continue;
        }
        generators.push_back(*r);
        for (double sign : {1.0, -1.0}) {
            detail::RealisedDirection d = *r;
            d.tensor = d.tensor.scaled(sign);
            if (d.phi) {
                d.phi->values *= sign;
            }
            candidates.push_back(d.tensor);
            labels.push_back((sign > 0.0 ? "+" : "-") + gen.label);
            dirs.push_back(std::move(d));
        }
    }
    FlowStepResult out{metric, detail::snapshot(sys, metric, k, cl)};
    if (candidates.empty()) {
        out.critical = true;
        return out;
    }
    const DirectionChoice single = best_direction(sc, k, candidates, config.mode);
    int chosen = single.index;
    DerivativePair predicted = single.derivatives;
    double score = single.score;
    detail::RealisedDirection dir = dirs[static_cast<std::size_t>(single.index)];
    std::string label = labels[static_cast<std::size_t>(single.index)];
    if (auto span = detail::span_direction(sc, k, generators, single.index / 2,
                                           single.index % 2 == 0 ? 1.0 : -1.0, single.score,
                                           config.mode)) {
        const DerivativePair d = directional_derivatives(sc, span->tensor, k);
        const double s = config.mode == FlowMode::ascend ? d.right : -d.right;
        if (s > score) {
            chosen = kSpanDirection;
            predicted = d;
            score = s;
            dir = std::move(*span);
            label = "combination of the basis";
        }
    }
    out.record.direction = chosen;
    out.record.predicted_slope = predicted.right;
    if (!(score > config.stop_tol * sys.eigenvalue(k))) {
        out.critical = true;
        return out;
    }

    const double lambda = sys.eigenvalue(k);
    double step = config.step;
    bool left_space = false;
    for (int h = 0; h <= config.max_halvings; ++h, step *= 0.5) {
        std::optional<DiscreteMetric> next;
        try {
            DiscreteMetric moved = dir.phi ? apply_conformal_factor(metric, *dir.phi, step)
                                           : apply_linear_deformation(metric, dir.tensor, step);
            next = normalize_volume(moved, volume);
        } catch (const MetricError&) {
            left_space = true;
            continue;
        }
        const EigenSystem s2 = solve_spectrum(*next, detail::flow_count(*next, k));
        const double change = s2.eigenvalue(k) - lambda;
        const bool good = config.mode == FlowMode::ascend ? change > 0.0 : change < 0.0;
        if (good) {
            const auto c2 = cluster_eigenvalues(s2, config.cluster_tol);
            const EigenCluster& cl2 = cluster_containing(c2, k);
            FlowRecord rec = detail::snapshot(s2, *next, k, cl2);
            rec.direction = chosen;
            rec.predicted_slope = predicted.right;
            rec.realized_change = change;
            rec.step = step;
            rec.halvings = h;
            rec.merged = cl2.dimension() > cl.dimension();
            return FlowStepResult{std::move(*next), std::move(rec), true, false};
        }
        left_space = false;
    }
    if (left_space) {
        throw FlowAbort("flow step left the space of metrics after " +
                        std::to_string(config.max_halvings) +
                        " halvings (triangle inequality violated); direction " + label);
    }
    return out;
}

inline FlowTrajectory run_flow(const DiscreteMetric& metric, const FlowConfig& config)
{
    if (config.max_iters < 0) {
        throw ContractViolation("max_iters must be non-negative");
    }
    FlowTrajectory traj;
    DiscreteMetric current = metric;
    {
        const EigenSystem sys = solve_spectrum(current, detail::flow_count(current, config.k));
        const auto clusters = cluster_eigenvalues(sys, config.cluster_tol);
        traj.records.push_back(
            detail::snapshot(sys, current, config.k, cluster_containing(clusters, config.k)));
    }
    traj.termination = FlowTrajectory::Termination::max_iters;
    for (int it = 1; it <= config.max_iters; ++it) {
        FlowStepResult r = flow_step(current, config);
        if (r.critical) {
            traj.termination = FlowTrajectory::Termination::critical_wrt_basis;
            break;
        }
        if (!r.accepted) {
            traj.termination = FlowTrajectory::Termination::no_monotone_step;
            break;
        }
        r.record.iteration = it;
        const double dev = std::abs(r.record.realized_change - r.record.step * r.record.predicted_slope);
        traj.slope_constant = std::max(traj.slope_constant, dev / (r.record.step * r.record.step));
        const bool merged = r.record.merged;
        traj.records.push_back(std::move(r.record));
        current = std::move(r.metric);
        if (merged && config.stop_on_merge) {
            traj.termination = FlowTrajectory::Termination::cluster_merge;
            break;
        }
    }
    traj.final_metric = std::move(current);
    return traj;
}

} // namespace speclab
