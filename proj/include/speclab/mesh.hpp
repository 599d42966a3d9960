#pragma once

#include "speclab/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace speclab {

using Face = std::array<int, 3>;
using EdgeKey = std::array<int, 2>;

/// Closed, consistently oriented triangle mesh.
///
/// Edges are derived from the faces and stored with the smaller vertex index
/// first. `face_edges[f][i]` is the edge opposite local vertex `i` of face `f`,
/// i.e. the edge joining local vertices `i+1` and `i+2`.
class TriMesh {
public:
    TriMesh() = default;

    /// Validates and builds the edge structure. Throws MeshError naming the
    /// offending simplex when the surface is not closed, not consistently
    /// oriented or has a degenerate face.
    TriMesh(std::vector<Eigen::Vector3d> vertices, std::vector<Face> faces)
        : vertices_(std::move(vertices)), faces_(std::move(faces))
    {
        build();
    }

    [[nodiscard]] const std::vector<Eigen::Vector3d>& vertices() const { return vertices_; }
    [[nodiscard]] const std::vector<Face>& faces() const { return faces_; }
    [[nodiscard]] const std::vector<EdgeKey>& edges() const { return edges_; }
    [[nodiscard]] const std::vector<std::array<int, 3>>& face_edges() const { return face_edges_; }
    /// The (up to) two faces sharing each edge.
    [[nodiscard]] const std::vector<std::array<int, 2>>& edge_faces() const { return edge_faces_; }

    [[nodiscard]] int num_vertices() const { return static_cast<int>(vertices_.size()); }
    [[nodiscard]] int num_faces() const { return static_cast<int>(faces_.size()); }
    [[nodiscard]] int num_edges() const { return static_cast<int>(edges_.size()); }

    [[nodiscard]] int euler_characteristic() const
    {
        return num_vertices() - num_edges() + num_faces();
    }

    /// Index of the edge joining `a` and `b`, or -1.
    [[nodiscard]] int find_edge(int a, int b) const
    {
        const EdgeKey key{std::min(a, b), std::max(a, b)};
        const auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
        if (it == edges_.end() || *it != key) {
            return -1;
        }
        return static_cast<int>(it - edges_.begin());
    }

private:
    void build()
    {
        const int nv = num_vertices();
        std::map<std::pair<int, int>, int> directed;
        for (int f = 0; f < num_faces(); ++f) {
            const Face& t = faces_[f];
            for (int i = 0; i < 3; ++i) {
                if (t[i] < 0 || t[i] >= nv) {
                    throw MeshError("face " + std::to_string(f) + " references vertex " +
                                    std::to_string(t[i]) + " outside [0, " +
                                    std::to_string(nv) + ")");
                }
            }
            if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
                throw MeshError("face " + std::to_string(f) + " is degenerate (" +
                                std::to_string(t[0]) + ", " + std::to_string(t[1]) + ", " +
                                std::to_string(t[2]) + ")");
            }
            for (int i = 0; i < 3; ++i) {
                const std::pair<int, int> de{t[(i + 1) % 3], t[(i + 2) % 3]};
                auto [it, inserted] = directed.emplace(de, f);
                if (!inserted) {
                    throw MeshError("orientation error: directed edge (" + std::to_string(de.first) +
                                    ", " + std::to_string(de.second) + ") appears in faces " +
                                    std::to_string(it->second) + " and " + std::to_string(f));
                }
            }
        }
        for (const auto& [de, f] : directed) {
            if (!directed.contains({de.second, de.first})) {
                throw MeshError("open boundary: edge (" + std::to_string(de.first) + ", " +
                                std::to_string(de.second) + ") of face " + std::to_string(f) +
                                " has no neighbour");
            }
            if (de.first < de.second) {
                edges_.push_back({de.first, de.second});
            }
        }
        std::sort(edges_.begin(), edges_.end());

        face_edges_.resize(faces_.size());
        edge_faces_.assign(edges_.size(), {-1, -1});
        for (int f = 0; f < num_faces(); ++f) {
            for (int i = 0; i < 3; ++i) {
                const int e = find_edge(faces_[f][(i + 1) % 3], faces_[f][(i + 2) % 3]);
                face_edges_[f][i] = e;
                auto& slots = edge_faces_[e];
                (slots[0] < 0 ? slots[0] : slots[1]) = f;
            }
        }
    }

    std::vector<Eigen::Vector3d> vertices_;
    std::vector<Face> faces_;
    std::vector<EdgeKey> edges_;
    std::vector<std::array<int, 3>> face_edges_;
    std::vector<std::array<int, 2>> edge_faces_;
};

namespace detail {

inline bool next_content_line(std::istream& in, std::string& line, int& line_no)
{
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        if (line.find_first_not_of(" \t\r") != std::string::npos) {
            return true;
        }
    }
    return false;
}

} // namespace detail

/// Parses the ASCII OFF subset: "OFF", "V F E", V vertex lines, F lines "3 i j k".
inline TriMesh parse_off(std::istream& in, const std::string& origin = "<stream>")
{
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& what) {
        throw ParseError(origin + ":" + std::to_string(line_no) + ": " + what);
    };

    if (!detail::next_content_line(in, line, line_no)) {
        fail("empty file");
    }
    {
        std::istringstream hs(line);
        std::string tag;
        hs >> tag;
        if (tag != "OFF") {
            fail("expected header 'OFF', got '" + tag + "'");
        }
    }
    if (!detail::next_content_line(in, line, line_no)) {
        fail("missing counts line");
    }
    long nv = -1;
    long nf = -1;
    long ne = 0;
    {
        std::istringstream cs(line);
        if (!(cs >> nv >> nf) || nv < 0 || nf < 0) {
            fail("malformed counts line '" + line + "'");
        }
        cs >> ne;
    }

    std::vector<Eigen::Vector3d> vertices;
    vertices.reserve(static_cast<std::size_t>(nv));
    for (long i = 0; i < nv; ++i) {
        if (!detail::next_content_line(in, line, line_no)) {
            fail("unexpected end of file in vertex " + std::to_string(i));
        }
        std::istringstream vs(line);
        Eigen::Vector3d p;
        if (!(vs >> p.x() >> p.y() >> p.z())) {
            fail("vertex " + std::to_string(i) + " needs 3 coordinates");
        }
        vertices.push_back(p);
    }

    std::vector<Face> faces;
    faces.reserve(static_cast<std::size_t>(nf));
    for (long f = 0; f < nf; ++f) {
        if (!detail::next_content_line(in, line, line_no)) {
            fail("unexpected end of file in face " + std::to_string(f));
        }
        std::istringstream fs(line);
        int arity = 0;
        Face t{};
        if (!(fs >> arity)) {
            fail("face " + std::to_string(f) + " is empty");
        }
        if (arity != 3) {
            fail("face " + std::to_string(f) + " has " + std::to_string(arity) +
                 " vertices; only triangles are supported");
        }
        if (!(fs >> t[0] >> t[1] >> t[2])) {
            fail("face " + std::to_string(f) + " needs 3 vertex indices");
        }
        faces.push_back(t);
    }
    return TriMesh(std::move(vertices), std::move(faces));
}

inline TriMesh load_mesh(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open mesh file " + path.string());
    }
    return parse_off(in, path.string());
}

inline void write_off(std::ostream& out, const TriMesh& mesh)
{
    out << "OFF\n" << mesh.num_vertices() << ' ' << mesh.num_faces() << " 0\n";
    out << std::setprecision(17);
    for (const auto& p : mesh.vertices()) {
        out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    }
    for (const auto& t : mesh.faces()) {
        out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    }
}

/// Regular octahedron with vertices at the unit coordinate points.
inline TriMesh octahedron()
{
    std::vector<Eigen::Vector3d> v{{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                   {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    std::vector<Face> f{{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4},
                        {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
    return TriMesh(std::move(v), std::move(f));
}

/// Icosahedron subdivided `level` times (1-to-4 split) with vertices projected
/// onto the sphere of the given radius; 10 * 4^level + 2 vertices.
inline TriMesh icosphere(int level, double radius = 1.0)
{
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Eigen::Vector3d> v{{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
                                   {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
                                   {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
    std::vector<Face> f{{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                        {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                        {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                        {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (auto& p : v) {
        p.normalize();
    }
    for (int s = 0; s < level; ++s) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
            if (auto it = midpoint.find(key); it != midpoint.end()) {
                return it->second;
            }
            v.push_back((v[a] + v[b]).normalized());
            const int id = static_cast<int>(v.size()) - 1;
            midpoint.emplace(key, id);
            return id;
        };
        std::vector<Face> next;
        next.reserve(f.size() * 4);
        for (const auto& t : f) {
            const int ab = mid(t[0], t[1]);
            const int bc = mid(t[1], t[2]);
            const int ca = mid(t[2], t[0]);
            next.push_back({t[0], ab, ca});
            next.push_back({t[1], bc, ab});
            next.push_back({t[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        f = std::move(next);
    }
    for (auto& p : v) {
        p *= radius;
    }
    return TriMesh(std::move(v), std::move(f));
}

} // namespace speclab
