#include <doctest.h>

#include <Eigen/Dense>

#include <random>
#include <sstream>

#include "gaitprint/funreg.hpp"
#include "gaitprint/glm.hpp"
#include "support/synthetic.hpp"

using namespace gaitprint;

namespace {

SubjectSeries toy()
{
    SubjectSeries s;
    s.subject_id = "toy";
    const double vals[2][4] = {{0.9, 1.1, 1.4, 0.7}, {1.2, 0.8, 1.0, 1.3}};
    for (int j = 0; j < 2; ++j) {
        SecondFrame f;
        f.subject_id = "toy";
        f.j = j + 1;
        f.v = Eigen::Map<const Eigen::Vector4d>(vals[j]);
        s.frames.push_back(f);
    }
    return s;
}

std::vector<SubjectSeries> small_series(int subjects, int seconds, std::uint64_t seed = 1, double noise = 0.1)
{
    testing::SyntheticOptions o;
    o.subjects = subjects;
    o.seconds = seconds;
    o.rate = 20;
    o.seed = seed;
    o.noise = noise;
    return testing::synthetic_series(o);
}

Eigen::VectorXd labels_for(const std::vector<RowKey>& rows, const std::string& target)
{
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        y[static_cast<Eigen::Index>(i)] = rows[i].subject_id == target ? 1.0 : 0.0;
    return y;
}

double bernoulli_deviance(const Eigen::VectorXd& p, const Eigen::VectorXd& y)
{
    double d = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double q = std::clamp(p[i], 1e-300, 1.0 - 1e-16);
        d -= 2 * (y[i] * std::log(q) + (1 - y[i]) * std::log1p(-q));
    }
    return d;
}

} // namespace

TEST_CASE("lag matrices for the four-sample toy")
{
    const auto s = toy();
    const auto m = build_dsu_matrices(s);
    REQUIRE(m.D.rows() == 2);
    REQUIRE(m.D.cols() == 6);
    const auto& v = s.frames[0].v;
    Eigen::RowVectorXd D(6), S(6), U(6);
    D << v[0], v[0], v[0], v[1], v[1], v[2];
    S << v[1], v[2], v[3], v[2], v[3], v[3];
    U << 1, 2, 3, 1, 2, 1;
    CHECK(m.D.row(0) == D);
    CHECK(m.S.row(0) == S);
    CHECK(m.U.row(0) == U);
    CHECK(m.U.row(1) == U);
    CHECK(m.D(1, 3) == s.frames[1].v[1]);
    CHECK(m.lmat.isConstant(1.0 / 6.0, 0));
    CHECK(m.rows.at(1).j == 2);

    const auto strided = build_dsu_matrices(s, 2);
    Eigen::RowVectorXd U2(4);
    U2 << 1, 3, 1, 1;
    CHECK(strided.U.row(0) == U2);
    CHECK(strided.lmat.isConstant(0.25, 0));
    CHECK(strided.lmat.row(0).sum() == doctest::Approx(1.0));

    SubjectSeries empty;
    empty.subject_id = "e";
    CHECK_THROWS_AS(build_dsu_matrices(empty), DataError);
    CHECK_THROWS_AS(build_dsu_matrices(s, 0), ConfigError);
}

TEST_CASE("lag matrices at S = 100")
{
    testing::SyntheticOptions o;
    o.subjects = 1;
    o.seconds = 2;
    const auto s = testing::synthetic_series(o).at(0);
    const auto m = build_dsu_matrices(s);
    CHECK(m.D.rows() == 2);
    CHECK(m.D.cols() == 4950);
    CHECK(m.lmat.row(1).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("tensor design matches a hand sum on the toy")
{
    const auto s = toy();
    const auto bases = make_bases(4, 1, 2);
    const auto C = tensor_design(build_dsu_matrices(s), bases);
    REQUIRE(C.cols() == 8);
    auto lin = [](double t, double lo, double hi, int k) {
        const double w = (t - lo) / (hi - lo);
        return k == 0 ? 1 - w : w;
    };
    const int pairs[6][2] = {{1, 1}, {1, 2}, {1, 3}, {2, 1}, {2, 2}, {3, 1}};
    for (int r = 0; r < 2; ++r) {
        const auto& v = s.frames[static_cast<std::size_t>(r)].v;
        for (int kd = 0; kd < 2; ++kd)
            for (int kv = 0; kv < 2; ++kv)
                for (int ku = 0; ku < 2; ++ku) {
                    double sum = 0;
                    for (const auto& p : pairs) {
                        const int a = p[0], u = p[1];
                        sum += lin(v[a - 1], 0, 3, kd) * lin(v[a + u - 1], 0, 3, kv) * lin(u, 1, 3, ku) / 6.0;
                    }
                    CHECK(std::abs(C(r, tensor_column(kd, kv, ku, bases)) - sum) <= 1e-12);
                }
    }
}

TEST_CASE("tensor design linearity, symmetry and width")
{
    const auto s = small_series(1, 4).at(0);
    const auto bases = make_bases(20, 3, 5);
    auto m = build_dsu_matrices(s);
    const auto C = tensor_design(m, bases);
    m.lmat *= 2.0;
    CHECK((tensor_design(m, bases) - 2.0 * C).cwiseAbs().maxCoeff() <= 1e-15);

    // Each row is a convex combination of partitions of unity.
    CHECK((C.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);

    SubjectSeries flat;
    flat.subject_id = "flat";
    for (int j = 1; j <= 3; ++j) {
        SecondFrame f;
        f.j = j;
        f.v = Eigen::VectorXd::Constant(20, 1.1);
        flat.frames.push_back(f);
    }
    const auto Cf = tensor_design(build_dsu_matrices(flat), bases);
    CHECK(Cf.row(0) == Cf.row(1));
    CHECK(Cf.row(0) == Cf.row(2));

    CHECK(make_bases(100, 3, 20).size() == 8000);

    // Values past the domain are clamped and counted.
    SubjectSeries loud = flat;
    loud.frames[0].v[3] = 4.5;
    long clamped = 0;
    tensor_design(build_dsu_matrices(loud), bases, &clamped);
    CHECK(clamped > 0);

    auto bad = build_dsu_matrices(s);
    bad.lmat.conservativeResize(bad.lmat.rows(), bad.lmat.cols() - 1);
    CHECK_THROWS_AS(tensor_design(bad, bases), DataError);
}

TEST_CASE("shared design does not depend on subject order or jobs")
{
    auto series = small_series(3, 5);
    const auto bases = make_bases(20, 3, 4);
    const auto a = build_tensor_design(series, bases, 1, 1);
    std::reverse(series.begin(), series.end());
    const auto b = build_tensor_design(series, bases, 1, 3);
    CHECK(a.C == b.C);
    REQUIRE(a.rows.size() == 15);
    CHECK(a.rows.front().subject_id == "s100");
    CHECK(a.rows.back().subject_id == "s102");
}

TEST_CASE("penalty blocks follow the Kronecker layout")
{
    const auto bases = make_bases(20, 3, 4);
    const auto pb = make_penalty_blocks(bases);
    CHECK(pb.Pd.norm() == doctest::Approx(1.0));
    CHECK(pb.size() == 64);
    const Lambda lam{0.5, 2.0, 3.0};
    const auto S = pb.assemble(lam);
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            for (int c = 0; c < 4; ++c)
                for (int a2 = 0; a2 < 4; ++a2)
                    for (int b2 = 0; b2 < 4; ++b2)
                        for (int c2 = 0; c2 < 4; ++c2) {
                            const double expect = lam.d * pb.Pd(a, a2) * (b == b2) * (c == c2)
                                                  + lam.v * pb.Pv(b, b2) * (a == a2) * (c == c2)
                                                  + lam.u * pb.Pu(c, c2) * (a == a2) * (b == b2);
                            CHECK(S(tensor_column(a, b, c, bases), tensor_column(a2, b2, c2, bases))
                                  == doctest::Approx(expect).epsilon(1e-14));
                        }
    const auto raw = make_penalty_blocks(bases, false);
    CHECK((raw.Pd - penalty_matrix(bases.d)).norm() == 0.0);
}

TEST_CASE("direct evaluation matches the cached design")
{
    const auto series = small_series(3, 8);
    const auto bases = make_bases(20, 3, 5);
    const auto design = build_tensor_design(series, bases);
    const auto y = labels_for(design.rows, "s101");
    const auto fit = fit_penalized_irls(design.C, y, make_penalty_blocks(bases), Lambda{1e-3, 1e-3, 1e-3});
    CHECK(fit.converged);
    const auto p = funreg_predict_prob(fit, design.C);
    std::size_t row = 0;
    for (const auto& s : series)
        for (const auto& f : s.frames) {
            const double logit = std::log(p[static_cast<Eigen::Index>(row)] / (1 - p[static_cast<Eigen::Index>(row)]));
            const double cached = fit.intercept + design.C.row(static_cast<Eigen::Index>(row)).dot(fit.beta);
            CHECK(std::abs(direct_logit(fit, bases, f) - cached) <= 1e-10);
            CHECK(std::abs(logit - cached) <= 1e-8);
            ++row;
        }

    // Random coefficients too, including a lag stride.
    std::mt19937_64 rng(4);
    std::normal_distribution<double> z;
    FunFit random;
    random.intercept = 0.3;
    random.beta.resize(bases.size());
    for (Eigen::Index k = 0; k < random.beta.size(); ++k)
        random.beta[k] = z(rng);
    const auto strided = build_tensor_design(series, bases, 3);
    for (Eigen::Index r = 0; r < strided.C.rows(); r += 5) {
        const auto& f = series[static_cast<std::size_t>(r / 8)].frames[static_cast<std::size_t>(r % 8)];
        CHECK(std::abs(direct_logit(random, bases, f, 3) - (0.3 + strided.C.row(r).dot(random.beta))) <= 1e-10);
    }
    CHECK_THROWS_AS(funreg_predict_prob(fit, design.C.leftCols(10)), DataError);
}

TEST_CASE("penalized fit is monotone and the gradient vanishes")
{
    const auto series = small_series(3, 8);
    const auto bases = make_bases(20, 3, 4);
    const auto design = build_tensor_design(series, bases);
    const auto y = labels_for(design.rows, "s100");
    const auto pb = make_penalty_blocks(bases);
    const Lambda lam{0.01, 0.1, 1.0};
    const auto fit = fit_penalized_irls(design.C, y, pb, lam);
    REQUIRE(fit.converged);
    for (std::size_t k = 1; k < fit.trace.size(); ++k)
        CHECK(fit.trace[k] <= fit.trace[k - 1]);
    Eigen::VectorXd theta(fit.beta.size() + 1);
    theta << fit.intercept, fit.beta;
    CHECK(penalized_loglik_gradient(design.C, y, pb, lam, theta).cwiseAbs().maxCoeff() < 1e-6);

    // The unpenalized intercept makes fitted probabilities sum to the positives.
    CHECK(funreg_predict_prob(fit, design.C).sum() == doctest::Approx(y.sum()).epsilon(1e-6));

    CHECK_THROWS_AS(fit_penalized_irls(design.C, Eigen::VectorXd::Zero(y.size()), pb, lam), DataError);
    CHECK_THROWS_AS(fit_penalized_irls(design.C, y, pb, Lambda{-1, 0, 0}), ConfigError);
}

TEST_CASE("very large smoothing collapses to the multilinear null space")
{
    // Random labels keep the small null-space model away from separation.
    const auto series = small_series(3, 20);
    const auto bases = make_bases(20, 3, 4);
    const auto design = build_tensor_design(series, bases);
    std::mt19937_64 rng(6);
    std::bernoulli_distribution coin(0.4);
    Eigen::VectorXd y(design.C.rows());
    for (Eigen::Index i = 0; i < y.size(); ++i)
        y[i] = coin(rng) ? 1.0 : 0.0;
    const auto pb = make_penalty_blocks(bases);
    const auto fit = fit_penalized_irls(design.C, y, pb, Lambda{1e8, 1e8, 1e8});

    // Null space: products of {1, t} in each margin, written in the basis via
    // Greville abscissae.
    auto margin = [](const BSplineBasis<double>& b) {
        Eigen::MatrixXd N(b.size(), 2);
        N.col(0).setOnes();
        N.col(1) = b.greville();
        return N;
    };
    const Eigen::MatrixXd Nd = margin(bases.d), Nv = margin(bases.v), Nu = margin(bases.u);
    Eigen::MatrixXd N(bases.size(), 8);
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            for (int c = 0; c < 4; ++c)
                for (int m = 0; m < 8; ++m)
                    N(tensor_column(a, b, c, bases), m) = Nd(a, m >> 2) * Nv(b, (m >> 1) & 1) * Nu(c, m & 1);
    CHECK(pb.assemble(Lambda{1, 1, 1}).lazyProduct(N).cwiseAbs().maxCoeff() < 1e-10);

    // Lag-only terms are constant across rows, so drop the exactly collinear
    // directions before the reference fit.
    const Eigen::MatrixXd CN = design.C * N;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(CN, Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const Eigen::Index rank = (sv.array() > 1e-10 * sv[0]).count();
    CHECK(rank == 6);
    const Eigen::MatrixXd reduced = CN * svd.matrixV().leftCols(rank);
    const auto ref = fit_logistic_irls(reduced, y);
    const auto p = funreg_predict_prob(fit, design.C);
    const auto q = predict_prob(ref, reduced);
    CHECK((p - q).cwiseAbs().maxCoeff() < 1e-3);
    const double rough = fit.beta.dot(pb.assemble(Lambda{1, 1, 1}) * fit.beta);
    CHECK(rough < 1e-6 * std::max(1.0, fit.beta.squaredNorm()));
}

TEST_CASE("lambda grid")
{
    const auto iso = lambda_grid({0.1, 1, 10}, true);
    REQUIRE(iso.size() == 3);
    CHECK(iso[1] == Lambda{1, 1, 1});
    const auto full = lambda_grid({0.1, 1}, false);
    REQUIRE(full.size() == 8);
    CHECK(full[1] == Lambda{0.1, 0.1, 1});
    CHECK(full[4] == Lambda{1, 0.1, 0.1});
}

TEST_CASE("lambda selection rules")
{
    const auto series = small_series(3, 10);
    const auto bases = make_bases(20, 3, 4);
    const auto design = build_tensor_design(series, bases);
    const auto y = labels_for(design.rows, "s101");
    const auto pb = make_penalty_blocks(bases);

    const Lambda only{0.3, 0.2, 0.1};
    CHECK(select_lambda(design.C, y, pb, {only}).best == only);

    const Lambda a{1, 1, 1};
    const auto twice = select_lambda(design.C, y, pb, {a, a}, 3, 7);
    CHECK(twice.best == a);
    CHECK(twice.cv_deviance[0] == twice.cv_deviance[1]);
    CHECK(twice.folds_used == 3);

    // Deterministic given the seed.
    const std::vector<Lambda> grid = lambda_grid({1e-4, 1e-2, 1, 100}, true);
    const auto s1 = select_lambda(design.C, y, pb, grid, 4, 9);
    const auto s2 = select_lambda(design.C, y, pb, grid, 4, 9);
    CHECK(s1.best == s2.best);
    CHECK(s1.cv_deviance == s2.cv_deviance);

    CHECK_THROWS_AS(select_lambda(design.C, y, pb, {}), ConfigError);
    Eigen::VectorXd lonely = Eigen::VectorXd::Zero(y.size());
    lonely[0] = 1;
    CHECK_THROWS_AS(select_lambda(design.C, lonely, pb, grid, 5, 1), DataError);
}

TEST_CASE("selected smoothing beats no smoothing on held-out data")
{
    // Labels drawn from a smooth surface over the lag image.
    const auto series = small_series(8, 40, 3, 0.3);
    const auto bases = make_bases(20, 3, 5);
    const auto design = build_tensor_design(series, bases);
    const auto pb = make_penalty_blocks(bases);
    Eigen::VectorXd beta_true(bases.size());
    for (int a = 0; a < 5; ++a)
        for (int b = 0; b < 5; ++b)
            for (int c = 0; c < 5; ++c) {
                const double d = bases.d.greville()[a], v = bases.v.greville()[b], u = bases.u.greville()[c];
                beta_true[tensor_column(a, b, c, bases)] = 4.0 * std::sin(1.5 * d) * (v - 1.0) * std::cos(u / 6.0);
            }
    const Eigen::VectorXd eta = design.C * beta_true;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U;
    Eigen::VectorXd y(eta.size());
    for (Eigen::Index i = 0; i < y.size(); ++i)
        y[i] = U(rng) < 1.0 / (1.0 + std::exp(-(eta[i] - eta.mean()))) ? 1.0 : 0.0;

    std::vector<Eigen::Index> tr, te;
    for (Eigen::Index i = 0; i < y.size(); ++i)
        (i % 2 ? te : tr).push_back(i);
    const Eigen::MatrixXd Ctr = design.C(tr, Eigen::all), Cte = design.C(te, Eigen::all);
    const Eigen::VectorXd ytr = y(tr), yte = y(te);

    const auto sel = select_lambda(Ctr, ytr, pb, lambda_grid({1e-6, 1e-4, 1e-2, 1, 100}, true), 5, 2);
    const auto smooth = fit_penalized_irls(Ctr, ytr, pb, sel.best);
    const auto raw = fit_penalized_irls(Ctr, ytr, pb, Lambda{0, 0, 0});
    const double d_smooth = bernoulli_deviance(funreg_predict_prob(smooth, Cte), yte);
    const double d_raw = bernoulli_deviance(funreg_predict_prob(raw, Cte), yte);
    CHECK(d_smooth <= d_raw);
}

TEST_CASE("one versus rest identifies a shifted sinusoid")
{
    // Two subjects, same shape, B's cadence shifted.
    auto make = [](const std::string& id, double freq, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> noise(0.0, 0.05);
        std::vector<RawSample> s;
        for (int t = 0; t < 40 * 20; ++t) {
            RawSample r;
            r.subject_id = id;
            r.t = t;
            r.z = 1.0 + 0.4 * std::sin(2 * 3.141592653589793 * freq * t / 20.0) + noise(rng);
            s.push_back(r);
        }
        return segment_seconds(s, 20);
    };
    const std::vector<SubjectSeries> all{make("A", 1.0, 1), make("B", 1.6, 2)};
    SplitSpec spec;
    spec.seed = 3;
    const auto split = stratified_split(all, spec);
    const auto bases = make_bases(20, 3, 5);
    FunRegConfig cfg;
    cfg.grid = lambda_grid({1e-4, 1e-2}, true);
    cfg.folds = 3;
    const auto fits = funreg_one_vs_rest(split.train, bases, cfg);
    REQUIRE(fits.fits.size() == 2);
    CHECK(fits.failures.empty());

    const auto test = build_tensor_design(split.test, bases);
    const auto pa = funreg_predict_prob(fits.fits.at("A"), test.C);
    const auto pb = funreg_predict_prob(fits.fits.at("B"), test.C);
    double mean_a = 0;
    int n = 0;
    for (std::size_t i = 0; i < test.rows.size(); ++i)
        if (test.rows[i].subject_id == "A") {
            const auto k = static_cast<Eigen::Index>(i);
            mean_a += pa[k] / (pa[k] + pb[k]);
            ++n;
        }
    CHECK(n == 10);
    CHECK(mean_a / n > 0.5);
}

TEST_CASE("one versus rest over three subjects")
{
    const auto series = small_series(3, 8);
    const auto bases = make_bases(20, 3, 4);
    FunRegConfig cfg;
    cfg.grid = {Lambda{0.01, 0.01, 0.01}};
    const auto design = build_tensor_design(series, bases);
    const auto fits = funreg_one_vs_rest(design, make_penalty_blocks(bases), cfg);
    REQUIRE(fits.fits.size() == 3);
    for (const auto& [id, fit] : fits.fits) {
        CHECK(fit.target == id);
        CHECK(funreg_predict_prob(fit, design.C).sum() == doctest::Approx(8.0).epsilon(1e-6));
    }
    cfg.jobs = 3;
    const auto again = funreg_one_vs_rest(design, make_penalty_blocks(bases), cfg);
    for (const auto& [id, fit] : fits.fits)
        CHECK(again.fits.at(id).beta == fit.beta);
}

TEST_CASE("surface export")
{
    const auto bases = make_bases(20, 3, 4);
    FunFit f;
    f.beta = Eigen::VectorXd::Constant(bases.size(), 0.5);
    CHECK(surface_value(f, bases, 1.0, 2.0, 7.0) == doctest::Approx(0.5).epsilon(1e-12));
    std::ostringstream out;
    write_surface_csv(out, f, bases, 2, 2, 2);
    const auto text = out.str();
    CHECK(text.rfind("d,v,u,F\n0,0,1,0.5", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 9);
}
