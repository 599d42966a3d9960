#include "speclab/flat_torus.hpp"
#include "speclab/mesh.hpp"
#include "speclab/metric.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace speclab;

namespace {

constexpr double pi = std::numbers::pi;

TriMesh tetrahedron()
{
    return TriMesh({{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}},
                   {{0, 1, 2}, {0, 2, 3}, {0, 3, 1}, {1, 3, 2}});
}

} // namespace

TEST(TriMesh, OctahedronCounts)
{
    const TriMesh m = octahedron();
    EXPECT_EQ(m.num_vertices(), 6);
    EXPECT_EQ(m.num_faces(), 8);
    EXPECT_EQ(m.num_edges(), 12);
    EXPECT_EQ(m.euler_characteristic(), 2);
}

TEST(TriMesh, IcosphereCountsPerLevel)
{
    for (int level = 0; level <= 3; ++level) {
        const TriMesh m = icosphere(level);
        const int faces = 20 * (1 << (2 * level));
        EXPECT_EQ(m.num_faces(), faces);
        EXPECT_EQ(m.num_edges(), 3 * faces / 2);
        EXPECT_EQ(m.euler_characteristic(), 2);
        for (const auto& v : m.vertices()) {
            EXPECT_NEAR(v.norm(), 1.0, 1e-14);
        }
    }
}

TEST(TriMesh, EdgeOppositeLocalVertex)
{
    const TriMesh m = tetrahedron();
    for (int f = 0; f < m.num_faces(); ++f) {
        for (int i = 0; i < 3; ++i) {
            const auto& e = m.edges()[m.face_edges()[f][i]];
            const int a = m.faces()[f][(i + 1) % 3];
            const int b = m.faces()[f][(i + 2) % 3];
            EXPECT_EQ(e[0], std::min(a, b));
            EXPECT_EQ(e[1], std::max(a, b));
        }
    }
    EXPECT_EQ(m.find_edge(0, 0), -1);
    EXPECT_GE(m.find_edge(3, 0), 0);
}

TEST(TriMesh, RejectsOpenSurface)
{
    EXPECT_THROW(TriMesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}}), MeshError);
}

TEST(TriMesh, RejectsInconsistentOrientation)
{
    EXPECT_THROW(TriMesh({{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}},
                         {{0, 1, 2}, {0, 2, 3}, {0, 3, 1}, {1, 2, 3}}),
                 MeshError);
}

TEST(TriMesh, RejectsDegenerateFace)
{
    EXPECT_THROW(TriMesh({{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}},
                         {{0, 1, 1}, {0, 2, 3}, {0, 3, 1}, {1, 3, 2}}),
                 MeshError);
}

TEST(Off, RoundTrip)
{
    const TriMesh m = icosphere(1);
    std::stringstream s;
    write_off(s, m);
    const TriMesh back = parse_off(s);
    ASSERT_EQ(back.num_vertices(), m.num_vertices());
    ASSERT_EQ(back.num_faces(), m.num_faces());
    for (int v = 0; v < m.num_vertices(); ++v) {
        EXPECT_EQ(back.vertices()[v], m.vertices()[v]);
    }
    EXPECT_EQ(back.faces(), m.faces());
}

TEST(Off, ParsesCommentsAndBlankLines)
{
    std::istringstream in("OFF\n# tetrahedron\n\n4 4 6\n1 1 1\n1 -1 -1\n-1 1 -1\n-1 -1 1\n"
                          "3 0 1 2\n3 0 2 3 # trailing comment\n3 0 3 1\n3 1 3 2\n");
    const TriMesh m = parse_off(in);
    EXPECT_EQ(m.num_faces(), 4);
}

TEST(Off, ErrorsNameTheLine)
{
    std::istringstream bad_header("PLY\n");
    EXPECT_THROW(parse_off(bad_header), ParseError);
    std::istringstream quad("OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n");
    try {
        parse_off(quad, "quad.off");
        FAIL() << "quad face accepted";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("quad.off:"), std::string::npos) << e.what();
    }
    std::istringstream range("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n");
    EXPECT_THROW(parse_off(range), MeshError);
    std::istringstream truncated("OFF\n4 4 6\n1 1 1\n");
    EXPECT_THROW(parse_off(truncated), ParseError);
}

TEST(Off, LoadsBundledOctahedron)
{
    const TriMesh m = load_mesh(SPECLAB_DATA_DIR "/octahedron.off");
    EXPECT_EQ(m.num_faces(), 8);
    EXPECT_EQ(m.euler_characteristic(), 2);
    EXPECT_THROW(load_mesh(SPECLAB_DATA_DIR "/missing.off"), ParseError);
}

TEST(Metric, HeronMatchesRightTriangle)
{
    EXPECT_DOUBLE_EQ(heron_area(3.0, 4.0, 5.0), 6.0);
    // needle triangle, stable ordering keeps the relative error small
    const double a = heron_area(1.0, 1.0, 1e-8);
    EXPECT_NEAR(a / (0.5e-8), 1.0, 1e-8);
}

TEST(Metric, FaceGeometryOfEquilateralTriangle)
{
    const FaceGeometry g = face_geometry(1.0, 1.0, 1.0);
    EXPECT_NEAR(g.area, std::sqrt(3.0) / 4.0, 1e-15);
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(g.cot[i], 1.0 / std::sqrt(3.0), 1e-15);
    }
    // hat gradients sum to zero and have length 1 / height
    const auto grads = g.hat_gradients();
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    for (const auto& gr : grads) {
        sum += gr;
        EXPECT_NEAR(gr.norm(), 2.0 / std::sqrt(3.0), 1e-14);
    }
    EXPECT_LT(sum.norm(), 1e-14);
}

TEST(Metric, RejectsTriangleInequalityViolation)
{
    auto mesh = std::make_shared<const TriMesh>(tetrahedron());
    Eigen::VectorXd l = Eigen::VectorXd::Ones(mesh->num_edges());
    l[mesh->face_edges()[0][0]] = 2.0;
    EXPECT_THROW(DiscreteMetric(mesh, l), MetricError);
    l.setOnes();
    l[0] = -1.0;
    EXPECT_THROW(DiscreteMetric(mesh, l), MetricError);
    EXPECT_THROW(DiscreteMetric(mesh, Eigen::VectorXd::Ones(3)), MetricError);
}

TEST(Metric, AreasOfEmbeddedOctahedron)
{
    const DiscreteMetric m = metric_from_embedding(octahedron());
    // unit octahedron: 8 equilateral faces of side sqrt 2
    EXPECT_NEAR(total_volume(m), 8.0 * std::sqrt(3.0) / 4.0 * 2.0, 1e-14);
    EXPECT_NEAR(m.vertex_masses().sum(), total_volume(m), 1e-14);
    EXPECT_NEAR(m.circumcentric_areas().sum(), total_volume(m), 1e-13);
}

TEST(Metric, ScalingAndNormalization)
{
    const DiscreteMetric m = metric_from_embedding(icosphere(2));
    const DiscreteMetric s = scale_metric(m, 3.0);
    EXPECT_NEAR(total_volume(s), 3.0 * total_volume(m), 1e-12);
    const DiscreteMetric n = normalize_volume(m, 1.0);
    EXPECT_NEAR(total_volume(n), 1.0, 1e-14);
    EXPECT_THROW(scale_metric(m, 0.0), ContractViolation);
}

TEST(Metric, ConformalFactorScalesEdges)
{
    const DiscreteMetric m = metric_from_embedding(icosphere(1));
    const ConformalField c{Eigen::VectorXd::Constant(m.mesh().num_vertices(), 1.0), false};
    const DiscreteMetric g = apply_conformal_factor(m, c, 0.5);
    // constant phi: lengths scale by e^{t/2}, area by e^t
    EXPECT_NEAR(total_volume(g), std::exp(0.5) * total_volume(m), 1e-12);
    const ConformalField z = make_mean_zero(Eigen::VectorXd::LinSpaced(m.mesh().num_vertices(), 0, 1), m);
    EXPECT_TRUE(z.mean_zero);
    EXPECT_NEAR(m.vertex_masses().dot(z.values), 0.0, 1e-14);
}

TEST(FlatTorus, MeshIsEquilateralForEquilateralLattice)
{
    const FlatTorusMesh t = flat_torus(FlatTorusLattice::equilateral(), 8);
    EXPECT_EQ(t.mesh->euler_characteristic(), 0);
    EXPECT_NEAR(total_volume(t.metric), std::sqrt(3.0) / 2.0, 1e-14);
    const double h = 1.0 / 8.0;
    for (int e = 0; e < t.mesh->num_edges(); ++e) {
        EXPECT_NEAR(t.metric.edge_lengths()[e], h, 1e-15);
    }
}

TEST(FlatTorus, SquareMeshAreaAndTopology)
{
    const FlatTorusMesh t = flat_torus(FlatTorusLattice::square(), 10);
    EXPECT_EQ(t.mesh->num_vertices(), 100);
    EXPECT_EQ(t.mesh->num_faces(), 200);
    EXPECT_EQ(t.mesh->euler_characteristic(), 0);
    EXPECT_NEAR(total_volume(t.metric), 1.0, 1e-13);
    EXPECT_THROW(flat_torus(FlatTorusLattice::square(), 2), ContractViolation);
}

TEST(FlatTorus, LatticeRejectsSingularBasis)
{
    Eigen::Matrix2d b;
    b << 1.0, 2.0, 2.0, 4.0;
    EXPECT_THROW(FlatTorusLattice{b}, ContractViolation);
    EXPECT_NEAR(FlatTorusLattice::equilateral().area(), std::sqrt(3.0) / 2.0, 1e-15);
    EXPECT_NEAR(std::cos(pi / 3.0), FlatTorusLattice::equilateral().basis()(0, 1), 1e-15);
}
