#pragma once

#include "speclab/criticality.hpp"
#include "speclab/deformation.hpp"
#include "speclab/errors.hpp"
#include "speclab/fd_check.hpp"
#include "speclab/flat_torus.hpp"
#include "speclab/flow.hpp"
#include "speclab/io.hpp"
#include "speclab/mesh.hpp"
#include "speclab/sampling.hpp"
#include "speclab/spectrum.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace speclab {

/// One fully resolved invocation.
struct RunConfig {
    std::string command;
    std::optional<std::string> torus;
    std::optional<std::filesystem::path> mesh;
    bool sphere = false;
    bool analytic = false;
    int grid = 32;
    int subdivisions = 3;
    int count = 10;
    int k = 1;
    std::string target;
    std::string mode = "ascend";
    double step = 0.05;
    int max_iters = 100;
    std::optional<double> tol;
    std::uint64_t seed = 0;
    std::filesystem::path out = ".";
    int threads = 1;
    bool eigenfunctions = false;
    double perturb = 0.0;
};

namespace detail {

/// Usage error: reported with exit code 2.
class UsageError : public Error {
public:
    using Error::Error;
};

inline const std::vector<std::string>& commands()
{
    static const std::vector<std::string> c{"spectrum", "derivative", "criticality", "ratio", "flow"};
    return c;
}

/// Fills `cfg` from a JSON object whose keys mirror the long flag names.
inline void apply_json(RunConfig& cfg, const nlohmann::json& j)
{
    if (!j.is_object()) {
        throw UsageError("config file must hold a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "command") cfg.command = value.get<std::string>();
            else if (key == "torus") cfg.torus = value.get<std::string>();
            else if (key == "mesh") cfg.mesh = value.get<std::string>();
            else if (key == "sphere") cfg.sphere = value.get<bool>();
            else if (key == "analytic") cfg.analytic = value.get<bool>();
            else if (key == "grid") cfg.grid = value.get<int>();
            else if (key == "subdivisions") cfg.subdivisions = value.get<int>();
            else if (key == "count") cfg.count = value.get<int>();
            else if (key == "k") cfg.k = value.get<int>();
            else if (key == "target") cfg.target = value.get<std::string>();
            else if (key == "mode") cfg.mode = value.get<std::string>();
            else if (key == "step") cfg.step = value.get<double>();
            else if (key == "max-iters") cfg.max_iters = value.get<int>();
            else if (key == "tol") cfg.tol = value.get<double>();
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else if (key == "out") cfg.out = value.get<std::string>();
            else if (key == "threads") cfg.threads = value.get<int>();
            else if (key == "eigenfunctions") cfg.eigenfunctions = value.get<bool>();
            else if (key == "perturb") cfg.perturb = value.get<double>();
            else throw UsageError("unknown config key '" + key + "'");
        } catch (const nlohmann::json::exception& e) {
            throw UsageError("config key '" + key + "': " + e.what());
        }
    }
}

inline void validate(RunConfig& cfg)
{
    if (std::find(commands().begin(), commands().end(), cfg.command) == commands().end()) {
        throw UsageError("unknown command '" + cfg.command + "'");
    }
    const int inputs = int(cfg.torus.has_value()) + int(cfg.mesh.has_value()) + int(cfg.sphere);
    if (inputs != 1) {
        throw UsageError("exactly one of --torus, --mesh, --sphere is required");
    }
    if (cfg.analytic && cfg.mesh) {
        throw UsageError("--analytic applies to --torus or --sphere only");
    }
    if (cfg.grid < 3) throw UsageError("--grid must be >= 3");
    if (cfg.subdivisions < 0) throw UsageError("--subdivisions must be >= 0");
    if (cfg.count < 1) throw UsageError("--count must be >= 1");
    if (cfg.k < 1) throw UsageError("--k must be >= 1");
    if (cfg.threads < 1) throw UsageError("--threads must be >= 1");
    if (!(cfg.step > 0.0)) throw UsageError("--step must be positive");
    if (cfg.max_iters < 0) throw UsageError("--max-iters must be >= 0");
    if (cfg.tol && !(*cfg.tol > 0.0)) throw UsageError("--tol must be positive");
    if (cfg.mode != "ascend" && cfg.mode != "descend") {
        throw UsageError("--mode must be ascend or descend");
    }
    static const std::vector<std::string> targets{"full", "conformal", "cluster-sum", "ratio-full",
                                                  "ratio-conformal"};
    if (!cfg.target.empty() &&
        std::find(targets.begin(), targets.end(), cfg.target) == targets.end()) {
        throw UsageError("unknown --target '" + cfg.target + "'");
    }
    if (cfg.command == "flow" && cfg.analytic) {
        throw UsageError("flow runs on meshes; drop --analytic");
    }
    if (cfg.torus) {
        try {
            (void)torus_spec_parse(*cfg.torus);
        } catch (const ParseError& e) {
            throw UsageError(e.what());
        }
    }
    if (cfg.mesh) {
        cfg.mesh = std::filesystem::absolute(*cfg.mesh);
    }
    cfg.out = std::filesystem::absolute(cfg.out);
}

/// Discrete surface selected by the input flags.
struct MeshInput {
    DiscreteMetric metric;
    std::optional<FlatTorusMesh> torus;
};

inline MeshInput mesh_input(const RunConfig& cfg)
{
    if (cfg.torus) {
        FlatTorusMesh t = flat_torus(torus_spec_parse(*cfg.torus), cfg.grid);
        DiscreteMetric m = t.metric;
        return MeshInput{std::move(m), std::move(t)};
    }
    if (cfg.sphere) {
        return MeshInput{metric_from_embedding(std::make_shared<const TriMesh>(icosphere(cfg.subdivisions))),
                         std::nullopt};
    }
    return MeshInput{metric_from_embedding(std::make_shared<const TriMesh>(load_mesh(*cfg.mesh))),
                     std::nullopt};
}

/// Vertex samples of the first `count` exact modes of a torus mesh.
inline Eigen::MatrixXd torus_vertex_modes(const FlatTorusMesh& t, int count)
{
    const auto modes = flat_torus_spectrum(t.lattice, count);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(t.positions.size()), count);
    for (int c = 0; c < count; ++c) {
        for (std::size_t v = 0; v < t.positions.size(); ++v) {
            out(static_cast<Eigen::Index>(v), c) = modes[static_cast<std::size_t>(c) + 1].value(t.positions[v]);
        }
    }
    return out;
}

/// Mesh sample domain whose smooth modes are low exact modes (tori) or low
/// FEM eigenfunctions (other surfaces).
inline std::shared_ptr<const SampleDomain> smooth_mesh_domain(const MeshInput& in)
{
    if (in.torus) {
        return mesh_domain(in.metric, torus_vertex_modes(*in.torus, 12));
    }
    const int c = std::min(12, in.metric.mesh().num_vertices() - 1);
    return mesh_domain(in.metric, solve_spectrum(in.metric, c).eigenfunctions);
}

/// Random mean-zero conformal factor with unit maximum modulus.
inline ConformalField unit_random_phi(const SampleDomain& d, std::mt19937_64& rng)
{
    ConformalField phi = random_conformal_field(d, rng);
    const double s = phi.values.cwiseAbs().maxCoeff();
    if (s > 0.0) {
        phi.values /= s;
    }
    return phi;
}

inline SampledCluster analytic_cluster(const RunConfig& cfg, int k)
{
    if (cfg.torus) {
        return torus_cluster(torus_spec_parse(*cfg.torus), k);
    }
    const int l = static_cast<int>(std::floor(std::sqrt(static_cast<double>(k))));
    return sphere_cluster(l);
}

struct FemCluster {
    EigenSystem sys;
    std::vector<EigenCluster> clusters;
    SampledCluster cluster;
};

inline FemCluster fem_cluster(const DiscreteMetric& metric, int k, double rel_tol = 1e-2)
{
    const int n = metric.mesh().num_vertices();
    int count = std::min(n - 1, k + 8);
    for (;;) {
        EigenSystem sys = solve_spectrum(metric, count);
        auto clusters = cluster_eigenvalues(sys, rel_tol);
        const EigenCluster& c = cluster_containing(clusters, k);
        if (c.k_hi < sys.count() || count == n - 1) {
            SampledCluster s = sample_cluster(c, metric);
            return FemCluster{std::move(sys), std::move(clusters), std::move(s)};
        }
        count = std::min(n - 1, 2 * count);
    }
}

inline void write_output(const RunConfig& cfg, const std::string& name, const std::string& content,
                         std::ostream& log)
{
    std::filesystem::create_directories(cfg.out);
    const auto path = cfg.out / name;
    atomic_write(path, content);
    log << "wrote " << path.string() << '\n';
}

inline int cmd_spectrum(const RunConfig& cfg, std::ostream& log)
{
    if (cfg.analytic) {
        if (!cfg.torus) {
            throw UsageError("analytic spectrum is available for --torus only");
        }
        const auto modes = flat_torus_spectrum(torus_spec_parse(*cfg.torus), cfg.count);
        write_output(cfg, "spectrum.csv", exact_spectrum_csv(modes), log);
        return 0;
    }
    const MeshInput in = mesh_input(cfg);
    const EigenSystem sys = solve_spectrum(in.metric, cfg.count);
    const auto clusters = cluster_eigenvalues(sys);
    write_output(cfg, "spectrum.csv", spectrum_csv(sys, clusters), log);
    if (cfg.eigenfunctions) {
        write_output(cfg, "eigenfunctions.csv", eigenfunctions_csv(sys), log);
    }
    return 0;
}

inline int cmd_derivative(const RunConfig& cfg, std::ostream& log)
{
    std::mt19937_64 rng(cfg.seed);
    const bool conformal = cfg.target == "conformal";
    FdReport report;
    if (cfg.analytic) {
        const SampledCluster c = analytic_cluster(cfg, cfg.k);
        if (!conformal && cfg.torus) {
            // area-preserving lattice stretch
            const DeformationTensor h = constant_tensor(*c.domain, 1.0, 0.0, -1.0);
            Eigen::Matrix2d hm;
            hm << 1.0, 0.0, 0.0, -1.0;
            report = finite_difference_check(lattice_path(torus_spec_parse(*cfg.torus), hm, cfg.k),
                                             directional_derivatives(c, h, cfg.k), cfg.k);
        } else {
            const DeformationTensor h =
                conformal ? conformal_tensor(*c.domain, unit_random_phi(*c.domain, rng))
                          : random_tensor_field(*c.domain, rng);
            report.k = cfg.k;
            report.predicted = directional_derivatives(c, h, cfg.k);
        }
    } else {
        const MeshInput in = mesh_input(cfg);
        const FemCluster fc = fem_cluster(in.metric, cfg.k);
        const auto domain = smooth_mesh_domain(in);
        const SampledCluster c = sample_cluster(fc.cluster.cluster, domain);
        if (conformal) {
            const ConformalField phi = unit_random_phi(*domain, rng);
            report = finite_difference_check(conformal_path(in.metric, phi, cfg.k),
                                             directional_derivatives(c, conformal_tensor(*domain, phi), cfg.k),
                                             cfg.k);
        } else {
            const DeformationTensor h = random_edge_tensor(in.metric, *domain, rng);
            report = finite_difference_check(linear_path(in.metric, h, cfg.k),
                                             directional_derivatives(c, h, cfg.k), cfg.k);
        }
    }
    write_output(cfg, "derivative.json", derivative_json(report).dump(2) + "\n", log);
    return 0;
}

inline int cmd_criticality(const RunConfig& cfg, std::ostream& log)
{
    const std::string target = cfg.target.empty() ? "full" : cfg.target;
    if (target != "full" && target != "conformal" && target != "cluster-sum") {
        throw UsageError("criticality --target must be full, conformal or cluster-sum");
    }
    GramSolverOptions opt;
    opt.seed = cfg.seed;
    SampledCluster c;
    double tol = 0.0;
    nlohmann::json out;
    if (cfg.analytic) {
        c = analytic_cluster(cfg, cfg.k);
        tol = cfg.tol.value_or(kAnalyticCertificateTolerance);
    } else {
        const MeshInput in = mesh_input(cfg);
        FemCluster fc = fem_cluster(in.metric, cfg.k);
        tol = cfg.tol.value_or(fem_certificate_tolerance(fc.sys));
        out["dimension_checks"] = dimension_json(dimension_checks(fc.clusters));
        c = std::move(fc.cluster);
    }
    out["k"] = cfg.k;
    out["cluster"] = {c.cluster.k_lo, c.cluster.k_hi};
    out["eigenvalue"] = c.eigenvalue();
    const bool decidable = criticality_decidable(c.cluster, cfg.k);
    out["sufficiency"] = decidable ? "decided" : "undecidable: lambda_k is interior to its cluster";
    if (target == "cluster-sum") {
        const auto cs = cluster_sum_criticality(c, tol);
        out["full"] = certificate_json(cs.full);
        out["conformal"] = certificate_json(cs.conformal);
    } else {
        const auto cert = target == "full" ? gram_feasibility_full(c, tol, opt)
                                           : gram_feasibility_conformal(c, tol, opt);
        out["certificate"] = certificate_json(cert);
        log << target << " certificate: " << status_name(cert.status)
            << " (residual " << format_double(cert.residual) << ")\n";
    }
    write_output(cfg, "certificate.json", out.dump(2) + "\n", log);
    return 0;
}

inline int cmd_ratio(const RunConfig& cfg, std::ostream& log)
{
    const std::string target = cfg.target.empty() ? "ratio-conformal" : cfg.target;
    if (target != "ratio-full" && target != "ratio-conformal") {
        throw UsageError("ratio --target must be ratio-full or ratio-conformal");
    }
    GramSolverOptions opt;
    opt.seed = cfg.seed;
    SampledCluster ck, ck1;
    double tol = 0.0;
    if (cfg.analytic) {
        ck = analytic_cluster(cfg, cfg.k);
        ck1 = analytic_cluster(cfg, cfg.k + 1);
        if (cfg.torus) {
            // one quadrature for both levels
            const TorusQuadrature q = torus_quadrature(torus_spec_parse(*cfg.torus));
            ck = sample_torus_level(flat_torus_level(torus_spec_parse(*cfg.torus), cfg.k), q);
            ck1 = sample_torus_level(flat_torus_level(torus_spec_parse(*cfg.torus), cfg.k + 1), q);
        } else {
            const SphereQuadrature q = sphere_quadrature();
            ck = sphere_cluster(static_cast<int>(std::floor(std::sqrt(double(cfg.k)))), q);
            ck1 = sphere_cluster(static_cast<int>(std::floor(std::sqrt(double(cfg.k + 1)))), q);
        }
        tol = cfg.tol.value_or(kAnalyticCertificateTolerance);
    } else {
        const MeshInput in = mesh_input(cfg);
        const FemCluster fc = fem_cluster(in.metric, cfg.k + 1);
        const auto domain = mesh_domain(in.metric);
        ck = sample_cluster(cluster_containing(fc.clusters, cfg.k), domain);
        ck1 = sample_cluster(cluster_containing(fc.clusters, cfg.k + 1), domain);
        tol = cfg.tol.value_or(fem_certificate_tolerance(fc.sys));
    }
    const RatioCertificate cert = ratio_criticality(ck, ck1, tol, target == "ratio-conformal", opt);
    nlohmann::json out = certificate_json(cert);
    out["k"] = cfg.k;
    write_output(cfg, "ratio.json", out.dump(2) + "\n", log);
    log << target << ": " << status_name(cert.status) << " (residual "
        << format_double(cert.residual()) << ")\n";
    return 0;
}

inline int cmd_flow(const RunConfig& cfg, std::ostream& log)
{
    const MeshInput in = mesh_input(cfg);
    DiscreteMetric start = in.metric;
    if (cfg.perturb != 0.0) {
        std::mt19937_64 rng(cfg.seed);
        const auto domain = smooth_mesh_domain(in);
        start = apply_conformal_factor(in.metric, unit_random_phi(*domain, rng), cfg.perturb);
    }
    FlowConfig fc;
    fc.k = cfg.k;
    fc.mode = cfg.mode == "ascend" ? FlowMode::ascend : FlowMode::descend;
    const std::string target = cfg.target.empty() ? "conformal" : cfg.target;
    if (target != "conformal" && target != "full") {
        throw UsageError("flow --target must be conformal or full");
    }
    fc.restriction = target == "conformal" ? FlowRestriction::conformal : FlowRestriction::all_metrics;
    fc.step = cfg.step;
    fc.max_iters = cfg.max_iters;
    if (cfg.tol) {
        fc.stop_tol = *cfg.tol;
    }
    fc.basis = fc.restriction == FlowRestriction::conformal ? default_conformal_basis(start)
                                                            : default_full_basis(start);
    const FlowTrajectory traj = run_flow(start, fc);
    write_output(cfg, "trajectory.csv", trajectory_csv(traj, cfg.k), log);
    write_output(cfg, "final_metric.txt", metric_edge_list(*traj.final_metric), log);
    log << "flow terminated: " << termination_name(traj.termination) << " after "
        << traj.records.size() - 1 << " steps\n";
    return 0;
}

} // namespace detail

/// Parses argv into a RunConfig. Throws CLI11 errors or UsageError.
inline RunConfig parse_run_config(int argc, const char* const* argv)
{
    CLI::App app{"speclab: Laplace-Beltrami spectra, eigenvalue derivatives, critical metrics"};
    app.require_subcommand(0, 1);

    std::optional<std::string> config_path;
    app.add_option("--config", config_path, "JSON file mirroring the flags");

    RunConfig flags;
    std::optional<std::string> torus, mesh, target, mode, out, tol;
    std::optional<int> grid, subdiv, count, k, max_iters, threads;
    std::optional<double> step, perturb;
    std::optional<std::uint64_t> seed;
    bool sphere = false, analytic = false, eigenfunctions = false;

    std::vector<CLI::App*> subs;
    for (const auto& name : detail::commands()) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--torus", torus, "sq, eq or a11,a12;a21,a22");
        sub->add_option("--mesh", mesh, "OFF file");
        sub->add_flag("--sphere", sphere, "unit round sphere (icosphere, or exact with --analytic)");
        sub->add_flag("--analytic", analytic, "use the exact model instead of a mesh");
        sub->add_option("--grid", grid, "torus grid size");
        sub->add_option("--subdivisions", subdiv, "icosphere subdivision level");
        sub->add_option("--count", count, "number of positive eigenvalues");
        sub->add_option("--k", k, "eigenvalue index (1 = first positive)");
        sub->add_option("--target", target, "full|conformal|cluster-sum|ratio-full|ratio-conformal");
        sub->add_option("--mode", mode, "ascend|descend");
        sub->add_option("--step", step, "flow step");
        sub->add_option("--max-iters", max_iters, "flow iteration budget");
        sub->add_option("--tol", tol, "certificate or stopping tolerance");
        sub->add_option("--seed", seed, "64-bit seed");
        sub->add_option("--out", out, "output directory");
        sub->add_option("--threads", threads, "worker threads");
        sub->add_flag("--eigenfunctions", eigenfunctions, "also dump eigenfunctions");
        sub->add_option("--perturb", perturb, "initial random conformal perturbation amplitude");
        subs.push_back(sub);
    }
    app.parse(argc, argv);

    RunConfig cfg;
    if (config_path) {
        std::ifstream in(*config_path);
        if (!in) {
            throw detail::UsageError("cannot read config file " + *config_path);
        }
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw detail::UsageError("config file " + *config_path + ": " + e.what());
        }
        detail::apply_json(cfg, j);
    }
    for (CLI::App* sub : subs) {
        if (sub->parsed()) {
            cfg.command = sub->get_name();
        }
    }
    if (torus) cfg.torus = *torus;
    if (mesh) cfg.mesh = *mesh;
    if (sphere) cfg.sphere = true;
    if (analytic) cfg.analytic = true;
    if (eigenfunctions) cfg.eigenfunctions = true;
    if (grid) cfg.grid = *grid;
    if (subdiv) cfg.subdivisions = *subdiv;
    if (count) cfg.count = *count;
    if (k) cfg.k = *k;
    if (target) cfg.target = *target;
    if (mode) cfg.mode = *mode;
    if (step) cfg.step = *step;
    if (max_iters) cfg.max_iters = *max_iters;
    if (tol) {
        try {
            cfg.tol = std::stod(*tol);
        } catch (const std::exception&) {
            throw detail::UsageError("--tol '" + *tol + "' is not a number");
        }
    }
    if (seed) cfg.seed = *seed;
    if (out) cfg.out = *out;
    if (threads) cfg.threads = *threads;
    if (perturb) cfg.perturb = *perturb;
    if (cfg.command.empty()) {
        throw detail::UsageError("a command is required: spectrum, derivative, criticality, ratio or flow");
    }
    detail::validate(cfg);
    return cfg;
}

/// Runs one command. Exit codes: 0 success (including infeasible
/// certificates), 1 domain error, 2 usage error.
inline int run_cli(int argc, const char* const* argv, std::ostream& log = std::cout,
                   std::ostream& err = std::cerr)
{
    RunConfig cfg;
    try {
        cfg = parse_run_config(argc, argv);
    } catch (const CLI::CallForHelp&) {
        err << "usage: speclab <spectrum|derivative|criticality|ratio|flow> [--torus SPEC | --mesh PATH | --sphere] [options]\n";
        return 2;
    } catch (const CLI::Error& e) {
        err << "usage error: " << e.what() << '\n'
            << "usage: speclab <spectrum|derivative|criticality|ratio|flow> [--torus SPEC | --mesh PATH | --sphere] [options]\n";
        return 2;
    } catch (const detail::UsageError& e) {
        err << "usage error: " << e.what() << '\n'
            << "usage: speclab <spectrum|derivative|criticality|ratio|flow> [--torus SPEC | --mesh PATH | --sphere] [options]\n";
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    try {
        if (cfg.command == "spectrum") return detail::cmd_spectrum(cfg, log);
        if (cfg.command == "derivative") return detail::cmd_derivative(cfg, log);
        if (cfg.command == "criticality") return detail::cmd_criticality(cfg, log);
        if (cfg.command == "ratio") return detail::cmd_ratio(cfg, log);
        return detail::cmd_flow(cfg, log);
    } catch (const detail::UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace speclab
