#pragma once

#include "speclab/deformation.hpp"
#include "speclab/errors.hpp"
#include "speclab/flat_torus.hpp"
#include "speclab/metric.hpp"
#include "speclab/spectrum.hpp"

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

namespace speclab {

/// lambda_k(g_t) as a function of t along an analytic path with g_0 = g.
using EigenvaluePath = std::function<double(double)>;

struct FdRow {
    double t = 0.0;
    double quotient_minus = 0.0; ///< (lambda(-t) - lambda(0)) / (-t)
    double quotient_plus = 0.0;  ///< (lambda(t) - lambda(0)) / t
};

struct FdReport {
    int k = 0;
    DerivativePair predicted;
    std::vector<FdRow> table;
    /// First-order Richardson extrapolation from the two smallest steps.
    std::optional<double> richardson_minus;
    std::optional<double> richardson_plus;
    /// Observed convergence order from the three smallest steps.
    std::optional<double> order_minus;
    std::optional<double> order_plus;
};

inline std::vector<double> default_fd_steps() { return {1e-2, 1e-3, 1e-4, 1e-5}; }

inline constexpr double kMinFdStep = 1e-10;

namespace detail {

inline std::optional<double> richardson(double t1, double q1, double t2, double q2)
{
    if (t1 == t2) {
        return std::nullopt;
    }
    return (q2 * t1 - q1 * t2) / (t1 - t2);
}

inline std::optional<double> observed_order(double t1, double q1, double t2, double q2, double t3,
                                            double q3)
{
    const double d12 = std::abs(q1 - q2);
    const double d23 = std::abs(q2 - q3);
    if (!(d12 > 0.0) || !(d23 > 0.0)) {
        return std::nullopt;
    }
    // for geometric steps with ratio r: d12 / d23 = r^p
    return std::log(d12 / d23) / std::log((t1 - t2) / (t2 - t3));
}

} // namespace detail

/// One-sided difference quotients of `path` at the given steps, compared
/// with a predicted pair of one-sided derivatives.
inline FdReport finite_difference_check(const EigenvaluePath& path, const DerivativePair& predicted,
                                        int k, std::vector<double> steps = default_fd_steps())
{
    if (steps.empty()) {
        throw ContractViolation("finite-difference ladder is empty");
    }
    for (double t : steps) {
        if (!(t >= kMinFdStep)) {
            throw ContractViolation("finite-difference step " + std::to_string(t) +
                                    " is below the underflow limit 1e-10");
        }
    }
    std::sort(steps.begin(), steps.end(), std::greater<>());
    FdReport report;
    report.k = k;
    report.predicted = predicted;
    const double base = path(0.0);
    for (double t : steps) {
        FdRow row;
        row.t = t;
        row.quotient_minus = (path(-t) - base) / (-t);
        row.quotient_plus = (path(t) - base) / t;
        report.table.push_back(row);
    }
    const auto n = report.table.size();
    if (n >= 2) {
        const auto& a = report.table[n - 2];
        const auto& b = report.table[n - 1];
        report.richardson_minus = detail::richardson(a.t, a.quotient_minus, b.t, b.quotient_minus);
        report.richardson_plus = detail::richardson(a.t, a.quotient_plus, b.t, b.quotient_plus);
    }
    if (n >= 3) {
        const auto& a = report.table[n - 3];
        const auto& b = report.table[n - 2];
        const auto& c = report.table[n - 1];
        report.order_minus = detail::observed_order(a.t, a.quotient_minus, b.t, b.quotient_minus,
                                                    c.t, c.quotient_minus);
        report.order_plus = detail::observed_order(a.t, a.quotient_plus, b.t, b.quotient_plus, c.t,
                                                   c.quotient_plus);
    }
    return report;
}

/// FEM lambda_k along g + t h (squared edge lengths move linearly).
inline EigenvaluePath linear_path(const DiscreteMetric& metric, const DeformationTensor& h, int k)
{
    return [metric, h, k](double t) {
        const DiscreteMetric m = t == 0.0 ? metric : apply_linear_deformation(metric, h, t);
        return solve_spectrum(m, std::min(k + 1, m.mesh().num_vertices() - 1)).eigenvalue(k);
    };
}

/// FEM lambda_k along e^{t phi} g.
inline EigenvaluePath conformal_path(const DiscreteMetric& metric, const ConformalField& phi, int k)
{
    return [metric, phi, k](double t) {
        const DiscreteMetric m = apply_conformal_factor(metric, phi, t);
        return solve_spectrum(m, std::min(k + 1, m.mesh().num_vertices() - 1)).eigenvalue(k);
    };
}

/// Exact lambda_k of the flat metric I + t H on R^2 / lattice. The torus is
/// isometric to the Euclidean torus of the lattice (I + t H)^{1/2} B.
inline double lattice_eigenvalue(const FlatTorusLattice& lattice, const Eigen::Matrix2d& h, double t,
                                 int k)
{
    const Eigen::Matrix2d g = Eigen::Matrix2d::Identity() + t * h;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(g);
    if (!(es.eigenvalues().minCoeff() > 0.0)) {
        throw MetricError("lattice path left the positive-definite metrics");
    }
    const FlatTorusLattice deformed(es.operatorSqrt() * lattice.basis());
    return flat_torus_spectrum(deformed, k)[static_cast<std::size_t>(k)].eigenvalue;
}

inline EigenvaluePath lattice_path(const FlatTorusLattice& lattice, const Eigen::Matrix2d& h, int k)
{
    return [lattice, h, k](double t) { return lattice_eigenvalue(lattice, h, t, k); };
}

} // namespace speclab
