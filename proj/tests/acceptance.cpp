// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "speclab/speclab.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

using namespace speclab;

namespace {

constexpr double pi = std::numbers::pi;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void check(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail << "[failed: " << what << "] ";
        }
    }
};

double rel_err(double a, double b) { return std::abs(a - b) / std::abs(b); }

// --- criterion 1 ------------------------------------------------------------

void criterion_1(Outcome& o)
{
    constexpr double tol = 1e-12;
    const auto sq = flat_torus_spectrum(FlatTorusLattice::square(), 8);
    const double l_sq = 4.0 * pi * pi;
    for (int k = 1; k <= 4; ++k) {
        o.check(rel_err(sq[k].eigenvalue, l_sq) <= tol, "sq lambda_" + std::to_string(k));
    }
    o.check(sq[5].eigenvalue > l_sq * (1.0 + 1e-6), "sq multiplicity exactly 4");

    const auto eq = flat_torus_spectrum(FlatTorusLattice::equilateral(), 8);
    const double l_eq = 16.0 * pi * pi / 3.0;
    for (int k = 1; k <= 6; ++k) {
        o.check(rel_err(eq[k].eigenvalue, l_eq) <= tol, "eq lambda_" + std::to_string(k));
    }
    o.check(eq[7].eigenvalue > l_eq * (1.0 + 1e-6), "eq multiplicity exactly 6");
    o.detail << "sq lambda_1 = " << format_double(sq[1].eigenvalue) << " x4, eq lambda_1 = "
             << format_double(eq[1].eigenvalue) << " x6";
}

// --- criterion 2 ------------------------------------------------------------

void criterion_2(Outcome& o)
{
    const FlatTorusMesh t = flat_torus(FlatTorusLattice::square(), 64);
    const EigenSystem st = solve_spectrum(t.metric, 4);
    const double e_torus = rel_err(st.eigenvalue(1), 4.0 * pi * pi);
    o.check(e_torus <= 1e-2, "square torus grid 64 within 1%");

    const DiscreteMetric sphere =
        metric_from_embedding(std::make_shared<const TriMesh>(icosphere(4)));
    const EigenSystem ss = solve_spectrum(sphere, 9);
    const double e_sphere = rel_err(ss.eigenvalue(1), 2.0);
    o.check(e_sphere <= 1e-2, "icosphere 4 within 1%");
    const auto clusters = cluster_eigenvalues(ss, 1e-2);
    o.check(clusters.front().dimension() == 3, "icosphere first cluster has size 3");
    o.detail << "torus rel err " << format_double(e_torus) << ", sphere rel err "
             << format_double(e_sphere) << ", first sphere cluster size "
             << clusters.front().dimension();
}

// --- criterion 3 ------------------------------------------------------------

void criterion_3(Outcome& o)
{
    // analytic: equilateral torus, lattice stretch H = diag(1, -1)
    const FlatTorusLattice eq = FlatTorusLattice::equilateral();
    const SampledCluster c = torus_cluster(eq, 1);
    const DeformationTensor h = constant_tensor(*c.domain, 1.0, 0.0, -1.0);
    const DerivativePair d = directional_derivatives(c, h, 1);
    Eigen::Matrix2d hm;
    hm << 1.0, 0.0, 0.0, -1.0;
    // branches 4 pi^2 gamma^T (I + tH)^{-1} gamma have slopes -4 pi^2 gamma^T H gamma
    std::vector<double> slopes;
    for (const auto& mode : flat_torus_level(eq, 1).modes) {
        slopes.push_back(-4.0 * pi * pi * mode.dual.dot(hm * mode.dual));
    }
    const double exact_left = *std::max_element(slopes.begin(), slopes.end());
    const double exact_right = *std::min_element(slopes.begin(), slopes.end());
    const double e_left = std::abs(d.left - exact_left);
    const double e_right = std::abs(d.right - exact_right);
    o.check(e_left <= 1e-10 * std::abs(exact_left), "analytic left slope");
    o.check(e_right <= 1e-10 * std::abs(exact_right), "analytic right slope");
    o.check(d.mode == DerivativePair::Mode::bottom, "mode iii at k = 1");

    // FEM: square torus, conformal direction cos(2 pi x) cos(2 pi y)
    const FlatTorusMesh t = flat_torus(FlatTorusLattice::square(), 64);
    Eigen::VectorXd phi(t.mesh->num_vertices());
    for (int v = 0; v < phi.size(); ++v) {
        const auto& p = t.positions[static_cast<std::size_t>(v)];
        phi[v] = std::cos(2.0 * pi * p.x()) * std::cos(2.0 * pi * p.y());
    }
    const ConformalField field = make_mean_zero(phi, t.metric);
    const EigenSystem sys = solve_spectrum(t.metric, 6);
    const auto clusters = cluster_eigenvalues(sys, 1e-2);
    const SampledCluster fc = sample_cluster(cluster_containing(clusters, 1), t.metric);
    const DerivativePair pred = directional_derivatives(fc, conformal_tensor(*fc.domain, field), 1);
    const FdReport fd = finite_difference_check(conformal_path(t.metric, field, 1), pred, 1, {1e-4});
    const double e_plus = std::abs(fd.table[0].quotient_plus - pred.right) / std::abs(pred.right);
    const double e_minus = std::abs(fd.table[0].quotient_minus - pred.left) / std::abs(pred.left);
    o.check(e_plus <= 1e-2, "FEM right derivative within 1%");
    o.check(e_minus <= 1e-2, "FEM left derivative within 1%");
    o.detail << "analytic |dleft| " << format_double(e_left) << ", |dright| " << format_double(e_right)
             << "; FEM rel err right " << format_double(e_plus) << ", left " << format_double(e_minus);
}

// --- criteria 4 and 5 -------------------------------------------------------

/// FEM torus of lattice diag(1, 1.1) with a conformal bump that splits the
/// lowest cos/sin pair, so lambda_1 is simple.
DiscreteMetric perturbed_simple_torus()
{
    Eigen::Matrix2d b;
    b << 1.0, 0.0, 0.0, 1.1;
    const FlatTorusMesh t = flat_torus(FlatTorusLattice(b), 24);
    Eigen::VectorXd phi(t.mesh->num_vertices());
    for (int v = 0; v < phi.size(); ++v) {
        phi[v] = std::cos(4.0 * pi * t.positions[static_cast<std::size_t>(v)].y() / 1.1);
    }
    return apply_conformal_factor(t.metric, make_mean_zero(phi, t.metric), 0.3);
}

struct Feasible {
    std::string name;
    SampledCluster cluster;
    bool conformal;
};

std::vector<Feasible> g_feasible;

void criterion_4(Outcome& o)
{
    constexpr double tol = kAnalyticCertificateTolerance;
    const SampledCluster s1 = sphere_cluster(1);
    const SampledCluster eq1 = torus_cluster(FlatTorusLattice::equilateral(), 1);
    const SampledCluster sq1 = torus_cluster(FlatTorusLattice::square(), 1);

    const auto full_sphere = gram_feasibility_full(s1, tol);
    const auto full_eq = gram_feasibility_full(eq1, tol);
    const auto conf_sq = gram_feasibility_conformal(sq1, tol);
    const auto conf_sphere = gram_feasibility_conformal(s1, tol);
    o.check(full_sphere.feasible(), "full, sphere l = 1");
    o.check(full_eq.feasible(), "full, equilateral torus lambda_1");
    o.check(conf_sq.feasible(), "conformal, square torus lambda_1");
    o.check(conf_sphere.feasible(), "conformal, sphere l = 1");
    if (full_sphere.feasible()) g_feasible.push_back({"full sphere", s1, false});
    if (full_eq.feasible()) g_feasible.push_back({"full eq torus", eq1, false});
    if (conf_sq.feasible()) g_feasible.push_back({"conformal sq torus", sq1, true});
    if (conf_sphere.feasible()) g_feasible.push_back({"conformal sphere", s1, true});

    const DiscreteMetric bumpy = perturbed_simple_torus();
    const EigenSystem sys = solve_spectrum(bumpy, 8);
    const auto clusters = cluster_eigenvalues(sys, 1e-2);
    const EigenCluster& c1 = cluster_containing(clusters, 1);
    o.check(c1.dimension() == 1, "perturbed torus has simple lambda_1");
    const SampledCluster sc = sample_cluster(c1, bumpy);
    const double fem_tol = fem_certificate_tolerance(sys);
    const auto full_bumpy = gram_feasibility_full(sc, fem_tol);
    const auto conf_bumpy = gram_feasibility_conformal(sc, fem_tol);
    o.check(!full_bumpy.feasible(), "full infeasible on simple lambda_1");
    o.check(!conf_bumpy.feasible(), "conformal infeasible on simple lambda_1");
    const auto dims = dimension_checks(clusters);
    o.check(!dims.front().full && !dims.front().conformal, "dimension conditions fail for m = 1");

    o.detail << "residuals: full sphere " << format_double(full_sphere.residual) << ", full eq "
             << format_double(full_eq.residual) << ", conformal sq "
             << format_double(conf_sq.residual) << ", conformal sphere "
             << format_double(conf_sphere.residual) << "; simple lambda_1: full "
             << format_double(full_bumpy.residual) << ", conformal "
             << format_double(conf_bumpy.residual);
}

void criterion_5(Outcome& o)
{
    constexpr int samples = 50;
    o.check(g_feasible.size() == 4, "all four certificates from criterion 4 available");
    int violations = 0;
    std::uint64_t seed = 100;
    for (const auto& f : g_feasible) {
        const ProbeReport r = indefiniteness_probe(f.cluster, samples, seed++, f.conformal);
        violations += static_cast<int>(r.definite_samples.size());
        o.check(r.samples() == samples, f.name + " sample count");
    }
    o.check(violations == 0, "no definite projected operator");
    o.detail << g_feasible.size() << " certificates x " << samples << " samples, " << violations
             << " violations";
}

// --- criterion 6 ------------------------------------------------------------

void criterion_6(Outcome& o)
{
    constexpr double tol = 1e-10;
    double worst_analytic = 0.0;
    double worst_fem = 0.0;
    const FlatTorusLattice eq = FlatTorusLattice::equilateral();
    const auto base = flat_torus_spectrum(eq, 12);
    const DiscreteMetric bumpy = perturbed_simple_torus();
    const EigenSystem fem_base = solve_spectrum(bumpy, 8);
    for (double c : {0.5, 2.0, 10.0}) {
        // c g on R^2 / L is isometric to the Euclidean torus R^2 / sqrt(c) L
        const auto scaled = flat_torus_spectrum(FlatTorusLattice(std::sqrt(c) * eq.basis()), 12);
        for (int k = 1; k <= 12; ++k) {
            worst_analytic = std::max(worst_analytic, rel_err(scaled[k].eigenvalue, base[k].eigenvalue / c));
        }
        const EigenSystem s = solve_spectrum(scale_metric(bumpy, c), 8);
        for (int k = 1; k <= 8; ++k) {
            worst_fem = std::max(worst_fem, rel_err(s.eigenvalue(k), fem_base.eigenvalue(k) / c));
        }
    }
    o.check(worst_analytic <= tol, "analytic scaling");
    o.check(worst_fem <= tol, "FEM scaling");
    o.detail << "max rel err analytic " << format_double(worst_analytic) << ", FEM "
             << format_double(worst_fem);
}

// --- criteria 7 and 9 -------------------------------------------------------

struct FlowRun {
    FlowTrajectory trajectory;
    std::string csv;
};

FlowRun criterion_7_flow()
{
    const FlatTorusMesh t = flat_torus(FlatTorusLattice::equilateral(), 32);
    Eigen::MatrixXd modes(t.mesh->num_vertices(), 12);
    const auto exact = flat_torus_spectrum(t.lattice, 12);
    for (int c = 0; c < 12; ++c) {
        for (int v = 0; v < modes.rows(); ++v) {
            modes(v, c) = exact[static_cast<std::size_t>(c) + 1].value(t.positions[static_cast<std::size_t>(v)]);
        }
    }
    const auto domain = mesh_domain(t.metric, modes);
    std::mt19937_64 rng(0);
    ConformalField phi = random_conformal_field(*domain, rng);
    phi.values /= phi.values.cwiseAbs().maxCoeff();
    const DiscreteMetric start = apply_conformal_factor(t.metric, phi, 0.2);

    FlowConfig cfg;
    cfg.k = 1;
    cfg.mode = FlowMode::ascend;
    cfg.restriction = FlowRestriction::conformal;
    cfg.step = 0.05;
    cfg.max_iters = 200;
    cfg.basis = default_conformal_basis(start);
    FlowRun run;
    run.trajectory = run_flow(start, cfg);
    run.csv = trajectory_csv(run.trajectory, cfg.k);
    return run;
}

FlowRun g_flow;

void criterion_7(Outcome& o)
{
    g_flow = criterion_7_flow();
    const auto& recs = g_flow.trajectory.records;
    const double target = 8.0 * pi * pi / std::sqrt(3.0);
    bool monotone = true;
    for (std::size_t i = 1; i < recs.size(); ++i) {
        const double prev = recs[i - 1].eigenvalues[0] * recs[i - 1].volume;
        const double cur = recs[i].eigenvalues[0] * recs[i].volume;
        monotone = monotone && cur >= prev;
    }
    const double first = recs.front().eigenvalues[0] * recs.front().volume;
    const double last = recs.back().eigenvalues[0] * recs.back().volume;
    o.check(monotone, "lambda_1 * area non-decreasing");
    o.check(last >= 0.99 * target, "reaches 99% of 8 pi^2 / sqrt 3");
    o.check(recs.back().cluster_hi > recs.back().cluster_lo, "final lambda_1 cluster multiplicity >= 2");
    o.detail << "lambda_1 * area " << format_double(first) << " -> " << format_double(last) << " ("
             << format_double(last / target) << " of target) in " << recs.size() - 1
             << " steps, final cluster [" << recs.back().cluster_lo << ", " << recs.back().cluster_hi
             << "], termination: " << termination_name(g_flow.trajectory.termination);
}

void criterion_9(Outcome& o)
{
    const FlowRun again = criterion_7_flow();
    o.check(!g_flow.csv.empty(), "first run produced a trajectory");
    o.check(again.csv == g_flow.csv, "byte-identical trajectory CSV");
    o.detail << g_flow.csv.size() << " bytes compared";
}

// --- criterion 8 ------------------------------------------------------------

void criterion_8(Outcome& o)
{
    const SphereQuadrature q = sphere_quadrature();
    const SampledCluster l1 = sphere_cluster(1, q);
    const SampledCluster l2 = sphere_cluster(2, q);
    const RatioCertificate cert = ratio_criticality(l1, l2, kAnalyticCertificateTolerance, true);
    o.check(cert.feasible(), "sphere l = 1 / l = 2 conformal ratio feasible");
    o.check(cert.residual() <= 1e-8, "residual <= 1e-8");

    const TorusQuadrature tq = torus_quadrature(FlatTorusLattice::square());
    const SampledCluster a = sample_torus_level(flat_torus_level(FlatTorusLattice::square(), 1), tq);
    const SampledCluster b = sample_torus_level(flat_torus_level(FlatTorusLattice::square(), 2), tq);
    const RatioCertificate trivial = ratio_criticality(a, b, kAnalyticCertificateTolerance, true);
    o.check(trivial.trivial && trivial.feasible() && trivial.residual() == 0.0,
            "trivial path for lambda_1 = lambda_2 on the square torus");
    o.detail << "sphere ratio residual " << format_double(cert.residual()) << ", trivial path "
             << (trivial.trivial ? "taken" : "not taken");
}

} // namespace

int main()
{
    struct Criterion {
        int id;
        const char* name;
        std::function<void(Outcome&)> run;
        double budget_seconds;
    };
    const std::vector<Criterion> criteria{
        {1, "analytic spectra exactness", criterion_1, 1.0},
        {2, "FEM convergence", criterion_2, 30.0},
        {3, "derivative theorem", criterion_3, 60.0},
        {4, "criticality certificates", criterion_4, 120.0},
        {5, "Gram/indefiniteness equivalence", criterion_5, 120.0},
        {6, "scaling law", criterion_6, 60.0},
        {7, "conformal flow to the equilateral torus", criterion_7, 300.0},
        {8, "ratio criticality", criterion_8, 60.0},
        {9, "determinism", criterion_9, 300.0},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.run(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "[exception: " << e.what() << "]";
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        o.check(secs <= c.budget_seconds, "runtime budget " + std::to_string(c.budget_seconds) + " s");
        if (!o.pass) {
            ++failures;
        }
        std::printf("criterion %d: %s  %s (%.2f s)  %s\n", c.id, o.pass ? "PASS" : "FAIL", c.name,
                    secs, o.detail.str().c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
