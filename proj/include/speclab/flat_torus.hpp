#pragma once

#include "speclab/errors.hpp"
#include "speclab/mesh.hpp"
#include "speclab/metric.hpp"

#include <Eigen/Core>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

namespace speclab {

/// Flat torus R^2 / (Z b1 + Z b2). Columns of `basis` are the generators.
class FlatTorusLattice {
public:
    explicit FlatTorusLattice(const Eigen::Matrix2d& basis) : basis_(basis)
    {
        if (!(basis_.determinant() > 0.0)) {
            throw ContractViolation("lattice basis must have positive determinant, got " +
                                    std::to_string(basis_.determinant()));
        }
    }

    static FlatTorusLattice square() { return FlatTorusLattice(Eigen::Matrix2d::Identity()); }

    static FlatTorusLattice equilateral()
    {
        Eigen::Matrix2d b;
        b << 1.0, 0.5, 0.0, std::sqrt(3.0) / 2.0;
        return FlatTorusLattice(b);
    }

    [[nodiscard]] const Eigen::Matrix2d& basis() const { return basis_; }
    [[nodiscard]] double area() const { return basis_.determinant(); }
    /// Columns generate the dual lattice {gamma : <gamma, b_i> in Z}.
    [[nodiscard]] Eigen::Matrix2d dual_basis() const { return basis_.inverse().transpose(); }

private:
    Eigen::Matrix2d basis_;
};

/// One exact eigenfunction of a flat torus: constant, or sqrt(2/A) cos/sin(2 pi <gamma, x>).
struct TorusMode {
    enum class Kind { constant, cosine, sine };

    double eigenvalue = 0.0;
    Eigen::Vector2d dual = Eigen::Vector2d::Zero();
    Eigen::Vector2i coefficients = Eigen::Vector2i::Zero();
    Kind kind = Kind::constant;
    double amplitude = 1.0;

    [[nodiscard]] double value(const Eigen::Vector2d& x) const
    {
        const double arg = 2.0 * std::numbers::pi * dual.dot(x);
        switch (kind) {
        case Kind::constant: return amplitude;
        case Kind::cosine: return amplitude * std::cos(arg);
        case Kind::sine: return amplitude * std::sin(arg);
        }
        return 0.0;
    }

    [[nodiscard]] Eigen::Vector2d gradient(const Eigen::Vector2d& x) const
    {
        const double arg = 2.0 * std::numbers::pi * dual.dot(x);
        const double s = 2.0 * std::numbers::pi * amplitude;
        switch (kind) {
        case Kind::constant: return Eigen::Vector2d::Zero();
        case Kind::cosine: return -s * std::sin(arg) * dual;
        case Kind::sine: return s * std::cos(arg) * dual;
        }
        return Eigen::Vector2d::Zero();
    }
};

/// Exact spectrum 4 pi^2 |gamma|^2 over the dual lattice: the constant mode
/// followed by the first `count` positive eigenvalues with multiplicity
/// (one cosine and one sine per dual pair +-gamma).
inline std::vector<TorusMode> flat_torus_spectrum(const FlatTorusLattice& lattice, int count)
{
    if (count < 1) {
        throw ContractViolation("flat_torus_spectrum needs count >= 1");
    }
    const Eigen::Matrix2d dual = lattice.dual_basis();
    const double amp0 = 1.0 / std::sqrt(lattice.area());
    const double amp = std::sqrt(2.0 / lattice.area());
    const double four_pi2 = 4.0 * std::numbers::pi * std::numbers::pi;

    struct Candidate {
        double norm2;
        Eigen::Vector2i k;
    };
    const int pairs_needed = (count + 1) / 2;
    // shortest dual vector bounds the search radius from below
    double radius = std::sqrt(static_cast<double>(pairs_needed) / lattice.area()) + 1.0;
    std::vector<Candidate> found;
    for (;;) {
        found.clear();
        // |k_i| = |<b_i, gamma>| <= |b_i| R
        const int n0 = static_cast<int>(std::ceil(lattice.basis().col(0).norm() * radius));
        const int n1 = static_cast<int>(std::ceil(lattice.basis().col(1).norm() * radius));
        for (int a = 0; a <= n0; ++a) {
            for (int b = -n1; b <= n1; ++b) {
                if (a == 0 && b <= 0) {
                    continue; // one representative per +-gamma pair
                }
                const Eigen::Vector2d g = dual * Eigen::Vector2d(a, b);
                const double n2 = g.squaredNorm();
                if (n2 <= radius * radius) {
                    found.push_back({n2, Eigen::Vector2i(a, b)});
                }
            }
        }
        if (static_cast<int>(found.size()) > pairs_needed) {
            break;
        }
        radius *= 1.5;
    }
    std::sort(found.begin(), found.end(), [](const Candidate& x, const Candidate& y) {
        if (x.norm2 != y.norm2) {
            return x.norm2 < y.norm2;
        }
        return std::make_pair(x.k.x(), x.k.y()) < std::make_pair(y.k.x(), y.k.y());
    });

    std::vector<TorusMode> modes;
    modes.reserve(static_cast<std::size_t>(count) + 1);
    modes.push_back(TorusMode{0.0, Eigen::Vector2d::Zero(), Eigen::Vector2i::Zero(),
                              TorusMode::Kind::constant, amp0});
    for (const auto& c : found) {
        if (static_cast<int>(modes.size()) > count) {
            break;
        }
        const Eigen::Vector2d g = dual * c.k.cast<double>();
        const double lambda = four_pi2 * g.squaredNorm();
        modes.push_back(TorusMode{lambda, g, c.k, TorusMode::Kind::cosine, amp});
        if (static_cast<int>(modes.size()) > count) {
            break;
        }
        modes.push_back(TorusMode{lambda, g, c.k, TorusMode::Kind::sine, amp});
    }
    return modes;
}

/// All exact modes whose eigenvalue equals lambda_k (relative tolerance
/// `rel_tol`), together with the paper-style index range they occupy.
struct TorusLevel {
    int k_lo = 0;
    int k_hi = 0;
    std::vector<TorusMode> modes;
    double previous = 0.0; ///< lambda_{k_lo - 1}
    double next = 0.0;     ///< lambda_{k_hi + 1}
};

inline TorusLevel flat_torus_level(const FlatTorusLattice& lattice, int k, double rel_tol = 1e-10)
{
    if (k < 1) {
        throw ContractViolation("eigenvalue index must be >= 1");
    }
    int count = k + 8;
    for (;;) {
        const auto modes = flat_torus_spectrum(lattice, count);
        const double target = modes[k].eigenvalue;
        auto same = [&](double v) { return std::abs(v - target) <= rel_tol * target; };
        int hi = k;
        while (hi + 1 < static_cast<int>(modes.size()) && same(modes[hi + 1].eigenvalue)) {
            ++hi;
        }
        if (hi + 1 >= static_cast<int>(modes.size())) {
            count *= 2;
            continue;
        }
        int lo = k;
        while (lo - 1 >= 1 && same(modes[lo - 1].eigenvalue)) {
            --lo;
        }
        TorusLevel level;
        level.k_lo = lo;
        level.k_hi = hi;
        level.modes.assign(modes.begin() + lo, modes.begin() + hi + 1);
        level.previous = modes[lo - 1].eigenvalue;
        level.next = modes[hi + 1].eigenvalue;
        return level;
    }
}

/// Periodic triangulation of a flat torus together with its induced metric.
struct FlatTorusMesh {
    std::shared_ptr<const TriMesh> mesh;
    DiscreteMetric metric;
    FlatTorusLattice lattice;
    int grid = 0;
    /// Position of every vertex in the fundamental domain (flat coordinates).
    std::vector<Eigen::Vector2d> positions;
};

/// grid x grid periodic triangulation of the fundamental domain. Each cell is
/// split along the shorter of its two diagonals (b1 + b2 on ties), so the
/// equilateral lattice is meshed by equilateral triangles.
inline FlatTorusMesh flat_torus(const FlatTorusLattice& lattice, int grid)
{
    if (grid < 3) {
        throw ContractViolation("flat torus grid must be >= 3");
    }
    const Eigen::Matrix2d& b = lattice.basis();
    const int n = grid;
    auto id = [n](int i, int j) { return ((i % n + n) % n) + n * ((j % n + n) % n); };

    std::vector<Eigen::Vector3d> vertices;
    std::vector<Eigen::Vector2d> positions;
    vertices.reserve(static_cast<std::size_t>(n) * n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const Eigen::Vector2d p = b * Eigen::Vector2d(i, j) / n;
            positions.push_back(p);
            vertices.emplace_back(p.x(), p.y(), 0.0);
        }
    }
    const double long_diag = (b.col(0) + b.col(1)).norm();
    const double short_diag = (b.col(1) - b.col(0)).norm();
    const bool split_sum = long_diag <= short_diag * (1.0 + 1e-12);

    std::vector<Face> faces;
    faces.reserve(2 * static_cast<std::size_t>(n) * n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int v00 = id(i, j), v10 = id(i + 1, j), v11 = id(i + 1, j + 1),
                      v01 = id(i, j + 1);
            if (split_sum) {
                faces.push_back({v00, v10, v11});
                faces.push_back({v00, v11, v01});
            } else {
                faces.push_back({v00, v10, v01});
                faces.push_back({v10, v11, v01});
            }
        }
    }
    auto mesh = std::make_shared<const TriMesh>(std::move(vertices), std::move(faces));

    Eigen::VectorXd lengths(mesh->num_edges());
    for (int e = 0; e < mesh->num_edges(); ++e) {
        const auto& ed = mesh->edges()[e];
        auto wrap = [n](int d) {
            d = ((d % n) + n) % n;
            return d > n / 2 ? d - n : d;
        };
        const int di = wrap(ed[1] % n - ed[0] % n);
        const int dj = wrap(ed[1] / n - ed[0] / n);
        lengths[e] = (b * Eigen::Vector2d(di, dj)).norm() / n;
    }
    DiscreteMetric metric(mesh, std::move(lengths));
    return FlatTorusMesh{mesh, std::move(metric), lattice, grid, std::move(positions)};
}

} // namespace speclab
