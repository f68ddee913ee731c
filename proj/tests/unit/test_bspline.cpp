#include <doctest.h>

#include <Eigen/Dense>

#include <random>

#include "gaitprint/bspline.hpp"
#include "support/oracles.hpp"

using namespace gaitprint;

TEST_CASE("open uniform knots")
{
    BSplineBasis<double> b(3, 8, 0.0, 3.0);
    CHECK(b.size() == 8);
    CHECK(b.knots() == testing::open_uniform_knots(3, 8, 0.0, 3.0));
    CHECK(b.lo() == 0.0);
    CHECK(b.hi() == 3.0);
    CHECK_THROWS_AS(BSplineBasis<double>(3, 3, 0.0, 1.0), ConfigError);
    CHECK_THROWS_AS(BSplineBasis<double>(2, 5, 1.0, 1.0), ConfigError);
    CHECK_THROWS_AS(BSplineBasis<double>(1, std::vector<double>{0, 1, 0.5, 2}), ConfigError);
}

TEST_CASE("partition of unity and local support")
{
    std::mt19937_64 rng(1);
    for (int degree : {1, 2, 3, 5}) {
        BSplineBasis<double> b(degree, degree + 6, -1.0, 2.0);
        std::uniform_real_distribution<double> u(-1.0, 2.0);
        for (int rep = 0; rep < 200; ++rep) {
            const auto v = b.eval(u(rng));
            CHECK(std::abs(v.sum() - 1.0) <= 1e-12);
            CHECK(v.minCoeff() >= 0.0);
            CHECK((v.array() != 0.0).count() <= degree + 1);
        }
    }
}

TEST_CASE("endpoint interpolation and clamping")
{
    BSplineBasis<double> b(3, 8, 0.0, 3.0);
    const auto left = b.eval(0.0);
    CHECK(left[0] == 1.0);
    CHECK(left.tail(7).isZero(0));
    const auto right = b.eval(3.0);
    CHECK(right[7] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(right.head(7).isZero(1e-15));
    CHECK(b.eval(-0.5) == left);
    CHECK(b.eval(9.0) == right);
    CHECK(b.in_domain(1.0));
    CHECK_FALSE(b.in_domain(3.01));
}

TEST_CASE("values and derivatives match Cox-de Boor")
{
    std::mt19937_64 rng(2);
    for (int degree : {0, 1, 3}) {
        BSplineBasis<double> b(degree, 9, 0.0, 3.0);
        const auto& k = b.knots();
        std::uniform_real_distribution<double> u(0.0, 3.0);
        for (int rep = 0; rep < 1000; ++rep) {
            const double t = rep == 0 ? 3.0 : u(rng);
            const auto v = b.eval(t);
            for (int i = 0; i < b.size(); ++i)
                CHECK(std::abs(v[i] - testing::cox_de_boor(k, i, degree, t)) <= 1e-12);
            if (rep % 10 == 0)
                for (int order = 1; order <= 2; ++order) {
                    const auto d = b.derivative(t, order);
                    for (int i = 0; i < b.size(); ++i)
                        CHECK(std::abs(d[i] - testing::cox_de_boor_derivative(k, i, degree, t, order)) <= 1e-9);
                }
        }
    }
}

TEST_CASE("greville abscissae reproduce the identity")
{
    BSplineBasis<double> b(3, 8, 0.0, 3.0);
    const auto g = b.greville();
    for (double t : {0.0, 0.4, 1.7, 2.99, 3.0})
        CHECK(b.eval(t).dot(g) == doctest::Approx(t).epsilon(1e-12));
}

TEST_CASE("scalar template")
{
    BSplineBasis<long double> b(3, 8, 0.0L, 3.0L);
    CHECK(std::abs(static_cast<double>(b.eval(1.3L).sum()) - 1.0) < 1e-15);
}

TEST_CASE("penalty matches numerical integration")
{
    BSplineBasis<double> b(3, 8, 0.0, 3.0);
    const auto P = penalty_matrix(b);
    const auto& k = b.knots();
    for (int i = 0; i < 8; ++i)
        for (int j = i; j < 8; ++j) {
            // Integrate span by span so the kinks of B'' sit on panel ends.
            double ref = 0;
            for (std::size_t s = 0; s + 1 < k.size(); ++s) {
                // Outside either support the product vanishes.
                if (!(k[s + 1] > k[s]) || k[s] >= k[static_cast<std::size_t>(i + 4)]
                    || k[s] < k[static_cast<std::size_t>(j)])
                    continue;
                const double a = k[s], c = k[s + 1], eps = 1e-13;
                ref += testing::adaptive_trapezoid(
                    [&](double t) {
                        const double tt = std::clamp(t, a + eps, c - eps);
                        return testing::cox_de_boor_derivative(k, i, 3, tt, 2)
                               * testing::cox_de_boor_derivative(k, j, 3, tt, 2);
                    },
                    a, c, 1e-10);
            }
            CHECK(std::abs(P(i, j) - ref) <= 1e-10 * std::max(1.0, std::abs(ref)));
            CHECK(P(i, j) == P(j, i));
        }
}

TEST_CASE("penalty null space and positive semi-definiteness")
{
    BSplineBasis<double> b(3, 8, 0.0, 3.0);
    const auto P = penalty_matrix(b);
    // Linear functions have zero curvature.
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(8);
    const Eigen::VectorXd line = b.greville();
    CHECK(std::abs(ones.dot(P * ones)) < 1e-10);
    CHECK(std::abs(line.dot(P * line)) < 1e-10);
    // A quadratic does not vanish: t^2 has integral of 2*2 over [0, 3] = 12.
    Eigen::MatrixXd A(8, 8);
    Eigen::VectorXd rhs(8);
    for (int r = 0; r < 8; ++r) {
        const double t = 3.0 * r / 7.0;
        A.row(r) = b.eval(t).transpose();
        rhs[r] = t * t;
    }
    const Eigen::VectorXd quad = A.fullPivLu().solve(rhs);
    CHECK(quad.dot(P * quad) == doctest::Approx(12.0).epsilon(1e-9));

    std::mt19937_64 rng(3);
    std::normal_distribution<double> z;
    for (int rep = 0; rep < 50; ++rep) {
        Eigen::VectorXd c(8);
        for (int i = 0; i < 8; ++i)
            c[i] = z(rng);
        CHECK(c.dot(P * c) >= -1e-12);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
    CHECK(es.eigenvalues().minCoeff() > -1e-10);
    CHECK((es.eigenvalues().array().abs() < 1e-8).count() == 2);
}
