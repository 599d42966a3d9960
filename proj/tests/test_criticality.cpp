#include "speclab/criticality.hpp"
#include "speclab/flat_torus.hpp"
#include "speclab/psd.hpp"
#include "speclab/sampling.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace speclab;

namespace {

constexpr double pi = std::numbers::pi;
constexpr double tol = kAnalyticCertificateTolerance;

Eigen::MatrixXd random_symmetric(int m, std::mt19937_64& rng)
{
    std::normal_distribution<double> normal;
    Eigen::MatrixXd a(m, m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            a(i, j) = normal(rng);
        }
    }
    return 0.5 * (a + a.transpose());
}

/// Weighted sum of polarized projected operators, sum_ij W_ij P_ij.
double contracted(const SampledCluster& c, const Eigen::MatrixXd& w, const DeformationTensor& h)
{
    return (w.cwiseProduct(projected_operator(c, h).matrix)).sum();
}

} // namespace

TEST(Psd, SvecIsAnIsometry)
{
    std::mt19937_64 rng(1);
    const Eigen::MatrixXd a = random_symmetric(4, rng);
    const Eigen::MatrixXd b = random_symmetric(4, rng);
    EXPECT_EQ(svec_size(4), 10);
    EXPECT_NEAR(svec(a).dot(svec(b)), (a.cwiseProduct(b)).sum(), 1e-12);
    EXPECT_LT((smat(svec(a), 4) - a).norm(), 1e-14);
}

TEST(Psd, Projections)
{
    std::mt19937_64 rng(2);
    const Eigen::MatrixXd a = random_symmetric(5, rng);
    const Eigen::MatrixXd p = project_psd(a);
    EXPECT_GE(min_eigenvalue(p), -1e-12);
    EXPECT_LT((project_psd(p) - p).norm(), 1e-12);

    const Eigen::VectorXd s = project_simplex(Eigen::Vector3d(0.9, 0.4, -2.0), 1.0);
    EXPECT_NEAR(s.sum(), 1.0, 1e-15);
    EXPECT_NEAR(s[0], 0.75, 1e-15);
    EXPECT_NEAR(s[1], 0.25, 1e-15);
    EXPECT_EQ(s[2], 0.0);

    const Eigen::MatrixXd b = random_symmetric(3, rng);
    Eigen::VectorXd x(svec_size(5) + svec_size(3));
    x << svec(a), svec(b);
    const Eigen::VectorXd y = project_spectraplex(x, {5, 3}, 2.0);
    const Eigen::MatrixXd ya = smat(y.head(svec_size(5)), 5);
    const Eigen::MatrixXd yb = smat(y.tail(svec_size(3)), 3);
    EXPECT_NEAR(ya.trace() + yb.trace(), 2.0, 1e-12);
    EXPECT_GE(min_eigenvalue(ya), -1e-12);
    EXPECT_GE(min_eigenvalue(yb), -1e-12);
}

TEST(GramFull, SphereDegreeOne)
{
    const SampledCluster c = sphere_cluster(1);
    const GramCertificate cert = gram_feasibility_full(c, tol);
    ASSERT_TRUE(cert.feasible()) << cert.residual;
    // sum of |grad Y_1m|^2 tensors is (3 / 4 pi) g
    EXPECT_LT((cert.W - 4.0 * pi / 3.0 * Eigen::Matrix3d::Identity()).norm(), 1e-7);
    EXPECT_LE(certificate_residual(cert, c), tol);
    ASSERT_TRUE(cert.sphere_radius_residual.has_value());
    EXPECT_LT(*cert.sphere_radius_residual, 1e-7);
}

TEST(GramFull, EquilateralTorus)
{
    const SampledCluster c = torus_cluster(FlatTorusLattice::equilateral(), 1);
    const GramCertificate cert = gram_feasibility_full(c, tol);
    ASSERT_TRUE(cert.feasible()) << cert.residual;
    const double area = std::sqrt(3.0) / 2.0;
    EXPECT_NEAR(cert.W.trace(), 6.0 * area / (16.0 * pi * pi), 1e-8);
    EXPECT_LE(certificate_residual(cert, c), tol);
    EXPECT_GE(min_eigenvalue(cert.W), -1e-10);
}

TEST(GramFull, SquareTorusIsCritical)
{
    // Clifford torus: the four first eigenfunctions give a minimal immersion
    const SampledCluster c = torus_cluster(FlatTorusLattice::square(), 1);
    const GramCertificate cert = gram_feasibility_full(c, tol);
    ASSERT_TRUE(cert.feasible()) << cert.residual;
    EXPECT_NEAR(cert.W.trace(), 4.0 / (8.0 * pi * pi), 1e-8);
}

TEST(GramFull, RectangularTorusIsNotCritical)
{
    Eigen::Matrix2d basis;
    basis << 1.0, 0.0, 0.0, 1.3;
    const SampledCluster c = torus_cluster(FlatTorusLattice(basis), 1);
    EXPECT_FALSE(gram_feasibility_full(c, tol).feasible());
    // witness: an area-preserving stretch raises both branches
    const Eigen::VectorXd ev =
        projected_operator(c, constant_tensor(*c.domain, 1.0, 0.0, -1.0)).eigenvalues();
    EXPECT_NEAR(ev[0], 4.0 * pi * pi / 1.69, 1e-9);
    EXPECT_NEAR(ev[1], 4.0 * pi * pi / 1.69, 1e-9);
}

TEST(GramConformal, SquareTorusAndSphere)
{
    const SampledCluster sq = torus_cluster(FlatTorusLattice::square(), 1);
    const GramCertificate a = gram_feasibility_conformal(sq, tol);
    ASSERT_TRUE(a.feasible()) << a.residual;
    EXPECT_NEAR(a.W.trace(), 1.0, 1e-8); // sum u_i^2 = 4 on the unit square torus
    const SampledCluster s = sphere_cluster(1);
    const GramCertificate b = gram_feasibility_conformal(s, tol);
    ASSERT_TRUE(b.feasible()) << b.residual;
    EXPECT_LE(certificate_residual(b, s), tol);
}

TEST(GramConformal, SimpleEigenvalueIsInfeasible)
{
    Eigen::Matrix2d basis;
    basis << 1.0, 0.0, 0.0, 1.3;
    const SampledCluster c = torus_cluster(FlatTorusLattice(basis), 1);
    ASSERT_EQ(c.dimension(), 2);
    // a single cos mode cannot have constant square
    SampledCluster one = c;
    one.cluster.basis = c.cluster.basis.leftCols(1);
    one.grad_x = c.grad_x.leftCols(1);
    one.grad_y = c.grad_y.leftCols(1);
    one.cluster.k_hi = one.cluster.k_lo;
    EXPECT_FALSE(gram_feasibility_conformal(one, tol).feasible());
    EXPECT_FALSE(gram_feasibility_full(one, tol).feasible());
    // the cos/sin pair of a rectangular torus is conformally critical
    EXPECT_TRUE(gram_feasibility_conformal(c, tol).feasible());
}

TEST(GramEquivalence, CertificateAnnihilatesEveryDirection)
{
    const SampledCluster c = sphere_cluster(1);
    const GramCertificate full = gram_feasibility_full(c, tol);
    const GramCertificate conf = gram_feasibility_conformal(c, tol);
    ASSERT_TRUE(full.feasible() && conf.feasible());
    std::mt19937_64 rng(4);
    for (int s = 0; s < 10; ++s) {
        const DeformationTensor h = random_tensor_field(*c.domain, rng);
        EXPECT_NEAR(contracted(c, full.W, h), 0.0, 1e-7);
        const ConformalField phi = random_conformal_field(*c.domain, rng);
        EXPECT_NEAR(contracted(c, conf.W, conformal_tensor(*c.domain, phi)), 0.0, 1e-7);
    }
}

TEST(Probe, IndefiniteAtCriticalMetric)
{
    const ProbeReport r = indefiniteness_probe(torus_cluster(FlatTorusLattice::equilateral(), 1), 30, 7, false);
    EXPECT_EQ(r.samples(), 30);
    EXPECT_TRUE(r.indefinite_everywhere());
    EXPECT_GT(r.smallest_margin, 0.0);
    EXPECT_THROW(indefiniteness_probe(sphere_cluster(1), 0, 1, true), ContractViolation);
}

TEST(ClusterSum, SphereLevelsAreCritical)
{
    for (int l = 1; l <= 3; ++l) {
        const SampledCluster c = sphere_cluster(l);
        const ClusterSumCertificate cert = cluster_sum_criticality(c, tol);
        EXPECT_TRUE(cert.full.feasible()) << l;
        EXPECT_TRUE(cert.conformal.feasible()) << l;
        // sum of squares of an orthonormal level is (2l + 1) / 4 pi
        EXPECT_NEAR(cert.constant, (2.0 * l + 1.0) / (4.0 * pi), 1e-10);
        EXPECT_NEAR(cert.proportionality, l * (l + 1.0) * (2.0 * l + 1.0) / (8.0 * pi), 1e-9);
    }
}

TEST(ClusterSum, RejectsPartialCluster)
{
    SampledCluster c = sphere_cluster(1);
    c.cluster.is_top = false;
    EXPECT_THROW(cluster_sum_criticality(c, tol), ContractViolation);
}

TEST(Ratio, SphereDegreesOneAndTwo)
{
    const SphereQuadrature q = sphere_quadrature();
    const SampledCluster l1 = sphere_cluster(1, q);
    const SampledCluster l2 = sphere_cluster(2, q);
    const RatioCertificate conf = ratio_criticality(l1, l2, tol, true);
    ASSERT_TRUE(conf.feasible()) << conf.residual();
    EXPECT_NEAR(conf.W_k.trace() + conf.W_k1.trace(), 4.0 * pi, 1e-8);
    const RatioCertificate full = ratio_criticality(l1, l2, tol, false);
    EXPECT_TRUE(full.feasible()) << full.residual();
    EXPECT_EQ(full.alpha.size(), q.domain->num_points());
}

TEST(Ratio, ContractChecks)
{
    const SphereQuadrature q = sphere_quadrature();
    EXPECT_THROW(ratio_criticality(sphere_cluster(1, q), sphere_cluster(3, q), tol, true), ContractViolation);
    EXPECT_THROW(ratio_criticality(sphere_cluster(1), sphere_cluster(2), tol, true), ContractViolation);
    EXPECT_THROW(ratio_criticality(sphere_cluster(1, q), sphere_cluster(2, q), 0.0, true), ContractViolation);
}

TEST(Dimensions, NecessaryConditions)
{
    std::vector<EigenCluster> clusters(3);
    clusters[0].k_lo = 1;
    clusters[0].k_hi = 1;
    clusters[1].k_lo = 2;
    clusters[1].k_hi = 4;
    clusters[2].k_lo = 5;
    clusters[2].k_hi = 6;
    const auto rows = dimension_checks(clusters);
    EXPECT_FALSE(rows[0].conformal);
    EXPECT_FALSE(rows[0].full);
    EXPECT_FALSE(*rows[0].ratio);
    EXPECT_TRUE(rows[1].full && rows[1].sphere_equality && rows[1].conformal);
    EXPECT_TRUE(*rows[1].ratio);
    EXPECT_FALSE(rows[2].full);
    EXPECT_FALSE(rows[2].ratio.has_value());
}

TEST(Decidability, InteriorIndex)
{
    EigenCluster c;
    c.k_lo = 1;
    c.k_hi = 3;
    EXPECT_TRUE(criticality_decidable(c, 1));
    EXPECT_FALSE(criticality_decidable(c, 2));
    EXPECT_TRUE(criticality_decidable(c, 3));
    c.is_bottom = false;
    EXPECT_FALSE(criticality_decidable(c, 1));
}
