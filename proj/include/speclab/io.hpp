#pragma once

#include "speclab/criticality.hpp"
#include "speclab/errors.hpp"
#include "speclab/fd_check.hpp"
#include "speclab/flat_torus.hpp"
#include "speclab/flow.hpp"
#include "speclab/metric.hpp"
#include "speclab/spectrum.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Core>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace speclab {

/// 17 significant digits, enough to round-trip any double.
inline std::string format_double(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Parses "sq", "eq" or "a11,a12;a21,a22" (rows of the basis matrix, whose
/// columns are the lattice generators).
inline FlatTorusLattice torus_spec_parse(std::string_view text)
{
    if (text == "sq") {
        return FlatTorusLattice::square();
    }
    if (text == "eq") {
        return FlatTorusLattice::equilateral();
    }
    const std::string s(text);
    const auto semi = s.find(';');
    if (semi == std::string::npos) {
        throw ParseError("torus spec '" + s + "' is not 'sq', 'eq' or 'a11,a12;a21,a22'");
    }
    auto parse_row = [&s](const std::string& part) {
        const auto comma = part.find(',');
        if (comma == std::string::npos) {
            throw ParseError("torus spec row '" + part + "' needs two comma-separated entries");
        }
        double v[2];
        const std::string items[2] = {part.substr(0, comma), part.substr(comma + 1)};
        for (int i = 0; i < 2; ++i) {
            std::size_t used = 0;
            try {
                v[i] = std::stod(items[i], &used);
            } catch (const std::exception&) {
                throw ParseError("torus spec '" + s + "': '" + items[i] + "' is not a number");
            }
            if (items[i].find_first_not_of(" \t", used) != std::string::npos) {
                throw ParseError("torus spec '" + s + "': trailing characters in '" + items[i] + "'");
            }
        }
        return Eigen::RowVector2d(v[0], v[1]);
    };
    Eigen::Matrix2d b;
    b.row(0) = parse_row(s.substr(0, semi));
    b.row(1) = parse_row(s.substr(semi + 1));
    return FlatTorusLattice(b);
}

// --- atomic output ----------------------------------------------------------

/// Called after the temporary file is complete and before it is renamed;
/// throwing from the hook simulates a crash at that point.
using FaultHook = std::function<void(const std::filesystem::path& temp)>;

/// Writes `content` to a sibling temporary file and renames it over `path`.
/// On failure the temporary file is removed and `path` is left untouched.
inline void atomic_write(const std::filesystem::path& path, const std::string& content,
                         const FaultHook& hook = {})
{
    std::filesystem::path temp = path;
    temp += ".tmp";
    try {
        {
            std::ofstream out(temp, std::ios::binary | std::ios::trunc);
            if (!out) {
                throw Error("cannot open " + temp.string() + " for writing");
            }
            out << content;
            out.flush();
            if (!out) {
                throw Error("write to " + temp.string() + " failed");
            }
        }
        if (hook) {
            hook(temp);
        }
        std::filesystem::rename(temp, path);
    } catch (...) {
        std::error_code ec;
        std::filesystem::remove(temp, ec);
        throw;
    }
}

// --- CSV --------------------------------------------------------------------

inline std::string spectrum_csv(const EigenSystem& sys, const std::vector<EigenCluster>& clusters)
{
    std::ostringstream out;
    out << "index,eigenvalue,cluster_id\n";
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        for (int k = clusters[c].k_lo; k <= clusters[c].k_hi; ++k) {
            out << k << ',' << format_double(sys.eigenvalue(k)) << ',' << c << '\n';
        }
    }
    return out.str();
}

/// Exact spectrum rows for an analytic torus (cluster ids from exact equality).
inline std::string exact_spectrum_csv(const std::vector<TorusMode>& modes, double rel_tol = 1e-10)
{
    std::ostringstream out;
    out << "index,eigenvalue,cluster_id\n";
    int cluster = -1;
    for (std::size_t k = 1; k < modes.size(); ++k) {
        if (k == 1 || std::abs(modes[k].eigenvalue - modes[k - 1].eigenvalue) >
                          rel_tol * modes[k].eigenvalue) {
            ++cluster;
        }
        out << k << ',' << format_double(modes[k].eigenvalue) << ',' << cluster << '\n';
    }
    return out.str();
}

inline std::string eigenfunctions_csv(const EigenSystem& sys)
{
    std::ostringstream out;
    out << "vertex";
    for (int k = 1; k <= sys.count(); ++k) {
        out << ",u" << k;
    }
    out << '\n';
    for (Eigen::Index v = 0; v < sys.eigenfunctions.rows(); ++v) {
        out << v;
        for (int k = 1; k <= sys.count(); ++k) {
            out << ',' << format_double(sys.eigenfunctions(v, k - 1));
        }
        out << '\n';
    }
    return out.str();
}

inline std::string trajectory_csv(const FlowTrajectory& traj, int k)
{
    std::ostringstream out;
    out << "iteration,direction,step,halvings,predicted_slope,realized_change,volume,"
           "lambda_k_times_volume,cluster_lo,cluster_hi,is_bottom,is_top,merged";
    for (int i = 1; i <= k + 1; ++i) {
        out << ",lambda_" << i;
    }
    out << '\n';
    for (const auto& r : traj.records) {
        const double lk = static_cast<int>(r.eigenvalues.size()) >= k ? r.eigenvalues[k - 1] : 0.0;
        out << r.iteration << ',' << r.direction << ',' << format_double(r.step) << ','
            << r.halvings << ',' << format_double(r.predicted_slope) << ','
            << format_double(r.realized_change) << ',' << format_double(r.volume) << ','
            << format_double(lk * r.volume) << ',' << r.cluster_lo << ',' << r.cluster_hi << ','
            << int(r.is_bottom) << ',' << int(r.is_top) << ',' << int(r.merged);
        for (int i = 0; i <= k; ++i) {
            out << ',';
            if (i < static_cast<int>(r.eigenvalues.size())) {
                out << format_double(r.eigenvalues[i]);
            }
        }
        out << '\n';
    }
    return out.str();
}

/// Edge list "i j length", one edge per line.
inline std::string metric_edge_list(const DiscreteMetric& metric)
{
    std::ostringstream out;
    out << "# i j length\n";
    const TriMesh& mesh = metric.mesh();
    for (int e = 0; e < mesh.num_edges(); ++e) {
        out << mesh.edges()[e][0] << ' ' << mesh.edges()[e][1] << ' '
            << format_double(metric.edge_lengths()[e]) << '\n';
    }
    return out.str();
}

// --- JSON -------------------------------------------------------------------

inline nlohmann::json matrix_json(const Eigen::MatrixXd& w)
{
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            rows.push_back(w(i, j));
        }
    }
    return rows;
}

inline nlohmann::json certificate_json(const GramCertificate& c)
{
    nlohmann::json j;
    j["target"] = target_name(c.target);
    j["m"] = c.m;
    j["n"] = c.n;
    j["status"] = status_name(c.status);
    j["residual"] = c.residual;
    j["tolerance"] = c.tolerance;
    j["W"] = matrix_json(c.W);
    if (c.sphere_radius_residual) {
        j["sphere_radius_residual"] = *c.sphere_radius_residual;
    }
    return j;
}

inline nlohmann::json certificate_json(const RatioCertificate& c)
{
    nlohmann::json j;
    j["target"] = target_name(c.target);
    j["m"] = {c.m_k, c.m_k1};
    j["n"] = c.n;
    j["status"] = status_name(c.status);
    j["trivial"] = c.trivial;
    j["residual"] = c.residual();
    j["residual_tensor"] = c.residual_tensor;
    j["residual_scalar"] = c.residual_scalar;
    j["tolerance"] = c.tolerance;
    j["W_k"] = matrix_json(c.W_k);
    j["W_k1"] = matrix_json(c.W_k1);
    if (c.target == CertificateTarget::ratio_full) {
        j["alpha"] = std::vector<double>(c.alpha.data(), c.alpha.data() + c.alpha.size());
    }
    return j;
}

inline nlohmann::json derivative_json(const FdReport& r)
{
    nlohmann::json j;
    j["k"] = r.k;
    j["mode"] = mode_name(r.predicted.mode);
    j["left"] = r.predicted.left;
    j["right"] = r.predicted.right;
    j["branch_slopes"] = r.predicted.branch_slopes;
    nlohmann::json table = nlohmann::json::array();
    for (const auto& row : r.table) {
        table.push_back({{"t", row.t},
                         {"quotient_minus", row.quotient_minus},
                         {"quotient_plus", row.quotient_plus}});
    }
    j["fd_table"] = table;
    if (r.richardson_minus) {
        j["richardson_minus"] = *r.richardson_minus;
        j["richardson_plus"] = *r.richardson_plus;
    }
    if (r.order_minus) {
        j["order_minus"] = *r.order_minus;
    }
    if (r.order_plus) {
        j["order_plus"] = *r.order_plus;
    }
    return j;
}

inline nlohmann::json dimension_json(const std::vector<DimensionRow>& rows)
{
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json j{{"k_lo", r.k_lo},           {"k_hi", r.k_hi},
                         {"m", r.m},                 {"full", r.full},
                         {"sphere_equality", r.sphere_equality},
                         {"conformal", r.conformal}};
        if (r.ratio) {
            j["ratio"] = *r.ratio;
        }
        out.push_back(j);
    }
    return out;
}

} // namespace speclab
