#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <random>

#include "gaitprint/cma.hpp"

using namespace gaitprint;

namespace {

Eigen::MatrixXd random_spd(int n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    Eigen::MatrixXd L(n, n + 3);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n + 3; ++k)
            L(i, k) = z(rng);
    return L * L.transpose();
}

LogisticFit fake_fit(const Eigen::VectorXd& beta_cells, const Eigen::MatrixXd& cov_cells,
                     std::vector<std::string> names = {})
{
    const auto G = beta_cells.size();
    LogisticFit f;
    f.target = "t";
    f.converged = true;
    f.beta.resize(G + 1);
    f.beta[0] = 0.3;
    f.beta.tail(G) = beta_cells;
    f.cov = Eigen::MatrixXd::Zero(G + 1, G + 1);
    f.cov(0, 0) = 1;
    f.cov.bottomRightCorner(G, G) = cov_cells;
    f.column_names = std::move(names);
    return f;
}

} // namespace

TEST_CASE("correlation from covariance")
{
    Eigen::MatrixXd d = Eigen::Vector3d(4, 9, 0.25).asDiagonal();
    CHECK(correlation_from_cov(d).isIdentity(0));

    Eigen::Matrix2d c;
    c << 4, 2, 2, 4;
    Eigen::Matrix2d expect;
    expect << 1, 0.5, 0.5, 1;
    CHECK(correlation_from_cov(c).isApprox(expect, 1e-15));

    const auto V = random_spd(5, 3);
    const auto C = correlation_from_cov(V);
    for (int g = 0; g < 5; ++g)
        for (int h = 0; h < 5; ++h)
            CHECK(std::abs(C(g, h) - V(g, h) / std::sqrt(V(g, g) * V(h, h))) <= 1e-14);

    Eigen::Matrix2d bad;
    bad << 1, 0, 0, 0;
    CHECK_THROWS_AS(correlation_from_cov(bad), NumericalError);
    CHECK_THROWS_AS(correlation_from_cov(Eigen::MatrixXd::Ones(2, 3)), NumericalError);

    // Works at other scalar types.
    Eigen::Matrix2f cf;
    cf << 4, 2, 2, 4;
    CHECK(correlation_from_cov(cf)(0, 1) == doctest::Approx(0.5f));
}

TEST_CASE("normal quantile and cdf")
{
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-13));
    CHECK(normal_cdf(normal_quantile(0.3)) == doctest::Approx(0.3).epsilon(1e-13));
}

TEST_CASE("quantile closed forms")
{
    const double z = normal_quantile(0.975);
    const double sidak = normal_quantile((1.0 + std::sqrt(0.95)) / 2.0);
    auto one = equicoordinate_quantile(Eigen::MatrixXd::Ones(1, 1), 0.05, 400'000, 1);
    CHECK(std::abs(one.q - z) < 4 * one.mc_se + 1e-3);
    auto ones = equicoordinate_quantile(Eigen::MatrixXd::Ones(4, 4), 0.05, 400'000, 2);
    CHECK(std::abs(ones.q - z) < 4 * ones.mc_se + 1e-3);
    auto ident = equicoordinate_quantile(Eigen::MatrixXd::Identity(2, 2), 0.05, 400'000, 3);
    CHECK(std::abs(ident.q - sidak) < 4 * ident.mc_se + 1e-3);
    CHECK(sidak == doctest::Approx(2.2365).epsilon(1e-4));
    CHECK(one.mc_se > 0);
    CHECK(one.mc_se < 0.02);
}

TEST_CASE("quantile is deterministic and independent of the thread count")
{
    const auto C = correlation_from_cov(random_spd(6, 9));
    auto a = equicoordinate_quantile(C, 0.05, 300'000, 5, 1);
    auto b = equicoordinate_quantile(C, 0.05, 300'000, 5, 4);
    auto c = equicoordinate_quantile(C, 0.05, 300'000, 5, 1);
    CHECK(a.q == b.q);
    CHECK(a.q == c.q);
    CHECK(a.mc_se == b.mc_se);
    auto d = equicoordinate_quantile(C, 0.05, 300'000, 6, 1);
    CHECK(a.q != d.q);
}

TEST_CASE("quantile grows with G and stays within the bounds")
{
    const double z = normal_quantile(0.975);
    double prev = 0;
    for (int G : {1, 2, 5, 10}) {
        auto q = equicoordinate_quantile(Eigen::MatrixXd::Identity(G, G), 0.05, 300'000, 17);
        CHECK(q.q >= prev);
        prev = q.q;
        const double bonf = normal_quantile(1.0 - 0.05 / (2.0 * G));
        CHECK(q.q <= bonf + 3 * q.mc_se);
        CHECK(q.q >= z - 3 * q.mc_se);
    }
}

TEST_CASE("indefinite input is clipped")
{
    Eigen::Matrix3d C;
    C << 1, 0.9, -0.9, 0.9, 1, 0.9, -0.9, 0.9, 1;
    auto q = equicoordinate_quantile(C, 0.05, 100'000, 1);
    CHECK(q.clipped_eigenvalues >= 1);
    CHECK(std::isfinite(q.q));
}

TEST_CASE("alpha outside (0, 1) is rejected")
{
    CHECK_THROWS_AS(equicoordinate_quantile(Eigen::MatrixXd::Identity(2, 2), 0.0, 1000, 1), ConfigError);
    CHECK_THROWS_AS(equicoordinate_quantile(Eigen::MatrixXd::Identity(2, 2), 1.0, 1000, 1), ConfigError);
}

TEST_CASE("single coefficient interval")
{
    auto f = fake_fit(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1), {"u15_r0_c0"});
    CmaOptions o;
    o.n_mc = 200'000;
    auto res = cma_intervals(f, o);
    REQUIRE(res.intervals.size() == 1);
    CHECK(res.q == doctest::Approx(res.z).epsilon(0.01));
    CHECK(res.intervals[0].lo == doctest::Approx(-1.96).epsilon(0.01));
    CHECK(res.intervals[0].hi == doctest::Approx(1.96).epsilon(0.01));
    CHECK_FALSE(res.intervals[0].significant);
    CHECK(res.significant.empty());
}

TEST_CASE("adjusted intervals are a uniform widening")
{
    std::mt19937_64 rng(21);
    std::normal_distribution<double> n01;
    const int G = 12;
    Eigen::VectorXd beta(G);
    for (int g = 0; g < G; ++g)
        beta[g] = 2.5 * n01(rng);
    auto f = fake_fit(beta, Eigen::MatrixXd::Identity(G, G) * 0.64);
    CmaOptions o;
    o.n_mc = 200'000;
    auto res = cma_intervals(f, o);
    CHECK(res.q >= res.z);
    const double rho = res.q / res.z;
    for (const auto& ci : res.intervals) {
        CHECK(ci.se == doctest::Approx(0.8));
        CHECK(0.5 * (ci.lo + ci.hi) == doctest::Approx(ci.estimate));
        CHECK(0.5 * (ci.unadjusted_lo + ci.unadjusted_hi) == doctest::Approx(ci.estimate));
        CHECK((ci.hi - ci.lo) == doctest::Approx(rho * (ci.unadjusted_hi - ci.unadjusted_lo)).epsilon(1e-12));
    }
    for (const auto& name : res.significant)
        CHECK(std::find(res.unadjusted_significant.begin(), res.unadjusted_significant.end(), name)
              != res.unadjusted_significant.end());
    CHECK(res.significant.size() <= res.unadjusted_significant.size());
}

TEST_CASE("significance shrinks as alpha decreases")
{
    const Eigen::MatrixXd V = random_spd(8, 4) * 0.05;
    Eigen::VectorXd beta(8);
    beta << 0.9, -0.7, 0.5, 0.3, -0.2, 0.1, 1.4, -1.1;
    auto f = fake_fit(beta, V);
    CmaOptions o;
    o.n_mc = 200'000;
    o.alpha = 0.10;
    auto loose = cma_intervals(f, o);
    o.alpha = 0.01;
    auto strict = cma_intervals(f, o);
    CHECK(strict.q > loose.q);
    for (const auto& name : strict.significant)
        CHECK(std::find(loose.significant.begin(), loose.significant.end(), name) != loose.significant.end());
}

TEST_CASE("fingerprint masks")
{
    GridSpec grid;
    CmaResult none;
    none.subject = "a";
    CmaResult some;
    some.subject = "b";
    for (const std::string name : {"u15_r1_c2", "u30_r0_c0", "u45_r11_c11", "u45_r3_c4"}) {
        CellInterval ci;
        ci.name = name;
        ci.estimate = 1.5;
        ci.significant = name != "u45_r3_c4";
        ci.unadjusted_significant = true;
        some.intervals.push_back(ci);
    }
    const std::vector<CmaResult> results{none, some};
    auto fp = fingerprint_report(results, grid);
    REQUIRE(fp.size() == 2);
    CHECK(fp[0].n_significant == 0);
    for (const auto& p : fp[0].panels)
        CHECK(p.array().isNaN().all());
    CHECK(fp[1].n_significant == 3);
    CHECK(fp[1].panels[0](1, 2) == 1.5);
    CHECK(fp[1].panels[1](0, 0) == 1.5);
    CHECK(std::isnan(fp[1].panels[2](3, 4)));
    CHECK(fingerprint_report(results, grid, false)[1].n_significant == 4);

    // Everything significant fills every panel.
    CmaResult all;
    for (int col = 0; col < grid.num_cells(); ++col) {
        CellInterval ci;
        ci.name = column_cell(col, grid).name();
        ci.estimate = -1;
        ci.significant = ci.unadjusted_significant = true;
        all.intervals.push_back(ci);
    }
    auto full = fingerprint_report(std::vector<CmaResult>{all}, grid);
    CHECK(full[0].n_significant == 432);
    for (const auto& p : full[0].panels)
        CHECK(p.allFinite());
}
