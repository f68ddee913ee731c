#include "gaitprint/funreg.hpp"
#include "gaitprint/glm.hpp"
#include "gaitprint/parallel.hpp"
#include "gaitprint/series_io.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

namespace gaitprint {
namespace {

std::vector<int> kept_lags(int S, int stride)
{
    std::vector<int> lags;
    for (int u = 1; u < S; u += stride)
        lags.push_back(u);
    return lags;
}

constexpr int kMaxLocal = 32;

} // namespace

DsuMatrices build_dsu_matrices(const SubjectSeries& series, int lag_stride)
{
    if (series.frames.empty())
        throw DataError("build_dsu_matrices: subject " + series.subject_id + " has no intervals");
    if (lag_stride < 1)
        throw ConfigError("build_dsu_matrices: lag_stride must be >= 1");
    const int S = static_cast<int>(series.frames.front().v.size());
    if (S < 2)
        throw DataError("build_dsu_matrices: interval length must be >= 2");

    std::vector<char> keep(static_cast<std::size_t>(S), 0);
    for (int u : kept_lags(S, lag_stride))
        keep[static_cast<std::size_t>(u)] = 1;

    // (a, u) pairs in column order, 1-based.
    std::vector<std::pair<int, int>> columns;
    for (int a = 1; a < S; ++a)
        for (int u = 1; a + u <= S; ++u)
            if (keep[static_cast<std::size_t>(u)])
                columns.emplace_back(a, u);

    const auto J = static_cast<Eigen::Index>(series.frames.size());
    const auto n = static_cast<Eigen::Index>(columns.size());
    DsuMatrices m;
    m.interval_length = S;
    m.lag_stride = lag_stride;
    m.D.resize(J, n);
    m.S.resize(J, n);
    m.U.resize(J, n);
    m.lmat = Eigen::MatrixXd::Constant(J, n, 1.0 / static_cast<double>(n));
    for (Eigen::Index r = 0; r < J; ++r) {
        const auto& frame = series.frames[static_cast<std::size_t>(r)];
        if (frame.v.size() != S)
            throw DataError("build_dsu_matrices: intervals of different lengths");
        for (Eigen::Index c = 0; c < n; ++c) {
            const auto [a, u] = columns[static_cast<std::size_t>(c)];
            m.D(r, c) = frame.v[a - 1];
            m.S(r, c) = frame.v[a + u - 1];
            m.U(r, c) = u;
        }
        m.rows.push_back({series.subject_id, frame.session, frame.j});
    }
    return m;
}

MarginalBases make_bases(int interval_length, int degree, int num_basis, double lo, double hi)
{
    if (interval_length < 3)
        throw ConfigError("make_bases: interval length must be >= 3 for a lag domain");
    return {BSplineBasis<double>(degree, num_basis, lo, hi), BSplineBasis<double>(degree, num_basis, lo, hi),
            BSplineBasis<double>(degree, num_basis, 1.0, static_cast<double>(interval_length - 1))};
}

Eigen::MatrixXd tensor_design(const DsuMatrices& dsu, const MarginalBases& bases, long* clamped)
{
    const auto J = dsu.D.rows();
    const auto n = dsu.D.cols();
    if (dsu.S.rows() != J || dsu.U.rows() != J || dsu.lmat.rows() != J || dsu.S.cols() != n || dsu.U.cols() != n
        || dsu.lmat.cols() != n)
        throw DataError("tensor_design: D, S, U and lmat shapes differ");
    const int pd = bases.d.degree() + 1;
    const int pv = bases.v.degree() + 1;
    const int pu = bases.u.degree() + 1;
    const int Kv = bases.v.size();
    const int Ku = bases.u.size();

    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(J, bases.size());
    long outside = 0;
    double bd[kMaxLocal], bv[kMaxLocal], bu[kMaxLocal];
    for (Eigen::Index r = 0; r < J; ++r) {
        auto row = C.row(r);
        for (Eigen::Index c = 0; c < n; ++c) {
            const double d = dsu.D(r, c), v = dsu.S(r, c), u = dsu.U(r, c);
            outside += !bases.d.in_domain(d) + !bases.v.in_domain(v) + !bases.u.in_domain(u);
            const int fd = bases.d.eval_nonzero(d, bd);
            const int fv = bases.v.eval_nonzero(v, bv);
            const int fu = bases.u.eval_nonzero(u, bu);
            const double w = dsu.lmat(r, c);
            for (int a = 0; a < pd; ++a) {
                const double wa = w * bd[a];
                if (wa == 0.0)
                    continue;
                for (int b = 0; b < pv; ++b) {
                    const double wab = wa * bv[b];
                    if (wab == 0.0)
                        continue;
                    const int base = ((fd + a) * Kv + (fv + b)) * Ku + fu;
                    for (int k = 0; k < pu; ++k)
                        row[base + k] += wab * bu[k];
                }
            }
        }
    }
    if (outside > 0)
        spdlog::debug("tensor_design: clamped {} values into the basis domains", outside);
    if (clamped)
        *clamped += outside;
    return C;
}

TensorDesign build_tensor_design(std::span<const SubjectSeries> series, const MarginalBases& bases, int lag_stride,
                                 int jobs)
{
    std::vector<std::size_t> order(series.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return series[a].subject_id < series[b].subject_id; });

    std::vector<Eigen::MatrixXd> blocks(series.size());
    std::vector<std::vector<RowKey>> keys(series.size());
    std::vector<long> clamped(series.size(), 0);
    parallel_for(series.size(), jobs, [&](std::size_t k) {
        const auto& s = series[order[k]];
        if (s.frames.empty())
            return;
        SubjectSeries sorted = s;
        std::sort(sorted.frames.begin(), sorted.frames.end(),
                  [](const SecondFrame& a, const SecondFrame& b) { return a.j < b.j; });
        const auto dsu = build_dsu_matrices(sorted, lag_stride);
        blocks[k] = tensor_design(dsu, bases, &clamped[k]);
        keys[k] = dsu.rows;
    });

    TensorDesign out;
    Eigen::Index total = 0;
    for (const auto& b : blocks)
        total += b.rows();
    out.C.resize(total, bases.size());
    Eigen::Index at = 0;
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        if (blocks[k].rows() == 0)
            continue;
        out.C.middleRows(at, blocks[k].rows()) = blocks[k];
        at += blocks[k].rows();
        out.rows.insert(out.rows.end(), keys[k].begin(), keys[k].end());
        out.clamped += clamped[k];
    }
    if (out.clamped > 0)
        spdlog::info("tensor design: {} values clamped into the basis domains", out.clamped);
    return out;
}

Eigen::MatrixXd PenaltyBlocks::assemble(const Lambda& lambda) const
{
    const auto Id = Eigen::MatrixXd::Identity(Pd.rows(), Pd.rows());
    const auto Iv = Eigen::MatrixXd::Identity(Pv.rows(), Pv.rows());
    const auto Iu = Eigen::MatrixXd::Identity(Pu.rows(), Pu.rows());
    Eigen::MatrixXd S = lambda.d * Eigen::kroneckerProduct(Pd, Eigen::kroneckerProduct(Iv, Iu)).eval();
    S += lambda.v * Eigen::kroneckerProduct(Id, Eigen::kroneckerProduct(Pv, Iu)).eval();
    S += lambda.u * Eigen::kroneckerProduct(Id, Eigen::kroneckerProduct(Iv, Pu)).eval();
    return S;
}

PenaltyBlocks make_penalty_blocks(const MarginalBases& bases, bool normalize)
{
    PenaltyBlocks p{penalty_matrix(bases.d), penalty_matrix(bases.v), penalty_matrix(bases.u)};
    if (normalize) {
        for (auto* P : {&p.Pd, &p.Pv, &p.Pu}) {
            const double norm = P->norm();
            if (norm > 0)
                *P /= norm;
        }
    }
    return p;
}

namespace {

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& C)
{
    Eigen::MatrixXd Z(C.rows(), C.cols() + 1);
    Z.col(0).setOnes();
    Z.rightCols(C.cols()) = C;
    return Z;
}

Eigen::MatrixXd full_penalty(const PenaltyBlocks& penalty, const Lambda& lambda)
{
    const auto K = penalty.size();
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(K + 1, K + 1);
    P.bottomRightCorner(K, K) = penalty.assemble(lambda);
    return P;
}

void check_labels(const Eigen::VectorXd& y)
{
    bool has0 = false, has1 = false;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        has0 |= y[i] == 0.0;
        has1 |= y[i] == 1.0;
    }
    if (!has0 || !has1)
        throw DataError("functional regression: labels contain a single class");
}

double heldout_deviance(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, const Eigen::VectorXd& theta)
{
    return -2.0 * bernoulli_loglik(Z * theta, y);
}

} // namespace

FunFit fit_penalized_irls(const Eigen::MatrixXd& C, const Eigen::VectorXd& y, const PenaltyBlocks& penalty,
                          const Lambda& lambda, int max_iter, double tol, const Eigen::VectorXd& start)
{
    if (!(lambda.d >= 0 && lambda.v >= 0 && lambda.u >= 0))
        throw ConfigError("fit_penalized_irls: smoothing parameters must be >= 0");
    if (C.cols() != penalty.size() || C.rows() != y.size())
        throw DataError("fit_penalized_irls: design, labels and penalty do not match");
    if (!C.allFinite())
        throw DataError("fit_penalized_irls: non-finite design values");
    check_labels(y);

    const Eigen::MatrixXd Z = with_intercept(C);
    Eigen::VectorXd theta0 = start;
    if (theta0.size() != Z.cols()) {
        theta0 = Eigen::VectorXd::Zero(Z.cols());
        const double ybar = y.mean();
        theta0[0] = std::log(ybar / (1.0 - ybar));
    }
    const auto res = penalized_irls(Z, y, full_penalty(penalty, lambda), max_iter, tol, theta0);

    FunFit fit;
    fit.intercept = res.beta[0];
    fit.beta = res.beta.tail(C.cols());
    fit.lambda = lambda;
    fit.deviance = res.deviance;
    fit.converged = res.converged;
    fit.n_iter = res.n_iter;
    fit.trace = res.trace;
    return fit;
}

double penalized_loglik(const Eigen::MatrixXd& C, const Eigen::VectorXd& y, const PenaltyBlocks& penalty,
                        const Lambda& lambda, const Eigen::VectorXd& theta)
{
    const Eigen::VectorXd beta = theta.tail(C.cols());
    const Eigen::VectorXd eta = (C * beta).array() + theta[0];
    return bernoulli_loglik(eta, y) - beta.dot(penalty.assemble(lambda) * beta);
}

Eigen::VectorXd penalized_loglik_gradient(const Eigen::MatrixXd& C, const Eigen::VectorXd& y,
                                          const PenaltyBlocks& penalty, const Lambda& lambda,
                                          const Eigen::VectorXd& theta)
{
    return penalized_score(with_intercept(C), y, full_penalty(penalty, lambda), theta);
}

std::vector<Lambda> lambda_grid(const std::vector<double>& values, bool isotropic)
{
    std::vector<Lambda> grid;
    if (isotropic) {
        for (double l : values)
            grid.push_back({l, l, l});
        return grid;
    }
    for (double a : values)
        for (double b : values)
            for (double c : values)
                grid.push_back({a, b, c});
    return grid;
}

LambdaSelection select_lambda(const Eigen::MatrixXd& C, const Eigen::VectorXd& y, const PenaltyBlocks& penalty,
                              const std::vector<Lambda>& grid, int folds, std::uint64_t seed, int max_iter,
                              double tol)
{
    if (grid.empty())
        throw ConfigError("select_lambda: empty lambda grid");
    LambdaSelection sel;
    if (grid.size() == 1) {
        sel.best = grid.front();
        sel.cv_deviance.assign(1, std::numeric_limits<double>::quiet_NaN());
        return sel;
    }
    if (folds < 2)
        throw ConfigError("select_lambda: need at least 2 folds");

    // Stratified fold labels: each class shuffled and dealt round-robin.
    const auto n = y.size();
    std::vector<int> fold(static_cast<std::size_t>(n));
    std::mt19937_64 rng(mix_seed(seed, 0x5eed));
    for (const double cls : {0.0, 1.0}) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index i = 0; i < n; ++i)
            if (y[i] == cls)
                idx.push_back(i);
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[rng() % i]);
        for (std::size_t i = 0; i < idx.size(); ++i)
            fold[static_cast<std::size_t>(idx[i])] = static_cast<int>(i % static_cast<std::size_t>(folds));
    }

    // Repeated triples share the first occurrence's result.
    std::vector<std::size_t> first(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g)
        first[g] = static_cast<std::size_t>(std::find(grid.begin(), grid.end(), grid[g]) - grid.begin());

    std::vector<double> total(grid.size(), 0.0);
    for (int f = 0; f < folds; ++f) {
        std::vector<Eigen::Index> tr, te;
        for (Eigen::Index i = 0; i < n; ++i)
            (fold[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
        const Eigen::MatrixXd Ctr = C(tr, Eigen::all);
        const Eigen::VectorXd ytr = y(tr);
        const Eigen::VectorXd yte = y(te);
        auto two_classes = [](const Eigen::VectorXd& v) {
            return v.size() > 0 && v.maxCoeff() == 1.0 && v.minCoeff() == 0.0;
        };
        if (!two_classes(ytr) || !two_classes(yte)) {
            spdlog::warn("select_lambda: fold {} skipped (single class)", f);
            continue;
        }
        const Eigen::MatrixXd Zte = with_intercept(C(te, Eigen::all));
        Eigen::VectorXd warm;
        for (std::size_t g = 0; g < grid.size(); ++g) {
            if (first[g] != g)
                continue;
            const auto fit = fit_penalized_irls(Ctr, ytr, penalty, grid[g], max_iter, tol, warm);
            Eigen::VectorXd theta(fit.beta.size() + 1);
            theta << fit.intercept, fit.beta;
            warm = theta;
            total[g] += heldout_deviance(Zte, yte, theta);
        }
        ++sel.folds_used;
    }
    if (sel.folds_used == 0)
        throw DataError("select_lambda: every fold was skipped");

    std::size_t best = 0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        sel.cv_deviance.push_back(total[first[g]] / sel.folds_used);
        if (g == 0 || first[g] != g)
            continue;
        const double a = sel.cv_deviance[g];
        const double b = sel.cv_deviance[best];
        const bool tie = std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b));
        const double sum_g = grid[g].d + grid[g].v + grid[g].u;
        const double sum_b = grid[best].d + grid[best].v + grid[best].u;
        if ((!tie && a < b) || (tie && sum_g > sum_b))
            best = g;
    }
    sel.best = grid[best];
    return sel;
}

FunRegFits funreg_one_vs_rest(const TensorDesign& design, const PenaltyBlocks& penalty, const FunRegConfig& cfg)
{
    std::set<std::string> distinct;
    for (const auto& r : design.rows)
        distinct.insert(r.subject_id);
    if (distinct.size() < 2)
        throw DataError("funreg_one_vs_rest: need at least 2 subjects");
    const std::vector<std::string> subjects(distinct.begin(), distinct.end());

    std::vector<FunFit> fits(subjects.size());
    std::vector<std::string> errors(subjects.size());
    parallel_for(subjects.size(), cfg.jobs, [&](std::size_t k) {
        Eigen::VectorXd y(design.C.rows());
        for (Eigen::Index i = 0; i < y.size(); ++i)
            y[i] = design.rows[static_cast<std::size_t>(i)].subject_id == subjects[k] ? 1.0 : 0.0;
        try {
            const auto sel = select_lambda(design.C, y, penalty, cfg.grid, cfg.folds, mix_seed(cfg.seed, k),
                                           cfg.max_iter, cfg.tol);
            fits[k] = fit_penalized_irls(design.C, y, penalty, sel.best, cfg.max_iter, cfg.tol);
            fits[k].target = subjects[k];
            if (!fits[k].converged)
                spdlog::warn("funreg: model for subject {} did not converge", subjects[k]);
        } catch (const std::exception& e) {
            errors[k] = e.what();
        }
    });

    FunRegFits out;
    for (std::size_t k = 0; k < subjects.size(); ++k) {
        if (errors[k].empty())
            out.fits.emplace(subjects[k], std::move(fits[k]));
        else
            out.failures.emplace(subjects[k], errors[k]);
    }
    return out;
}

FunRegFits funreg_one_vs_rest(std::span<const SubjectSeries> series, const MarginalBases& bases,
                              const FunRegConfig& cfg, int lag_stride)
{
    const auto design = build_tensor_design(series, bases, lag_stride, cfg.jobs);
    return funreg_one_vs_rest(design, make_penalty_blocks(bases), cfg);
}

Eigen::VectorXd funreg_predict_prob(const FunFit& fit, const Eigen::MatrixXd& C)
{
    if (C.cols() != fit.beta.size())
        throw DataError("funreg_predict_prob: design width does not match the model");
    const Eigen::VectorXd eta = (C * fit.beta).array() + fit.intercept;
    return expit(eta.array()).matrix();
}

double surface_value(const FunFit& fit, const MarginalBases& bases, double d, double v, double u)
{
    const Eigen::VectorXd bd = bases.d.eval(d);
    const Eigen::VectorXd bv = bases.v.eval(v);
    const Eigen::VectorXd bu = bases.u.eval(u);
    double F = 0;
    for (int a = 0; a < bases.d.size(); ++a)
        for (int b = 0; b < bases.v.size(); ++b)
            for (int c = 0; c < bases.u.size(); ++c)
                F += fit.beta[tensor_column(a, b, c, bases)] * bd[a] * bv[b] * bu[c];
    return F;
}

double direct_logit(const FunFit& fit, const MarginalBases& bases, const SecondFrame& frame, int lag_stride)
{
    const int S = static_cast<int>(frame.v.size());
    double sum = 0;
    long pairs = 0;
    for (int u = 1; u < S; u += lag_stride)
        for (int s = u; s < S; ++s, ++pairs)
            sum += surface_value(fit, bases, frame.v[s - u], frame.v[s], u);
    return fit.intercept + sum / static_cast<double>(pairs);
}

void write_surface_csv(std::ostream& out, const FunFit& fit, const MarginalBases& bases, int nd, int nv, int nu)
{
    auto axis = [](const BSplineBasis<double>& b, int n, int i) {
        return n == 1 ? b.lo() : b.lo() + (b.hi() - b.lo()) * i / (n - 1);
    };
    out << "d,v,u,F\n";
    for (int a = 0; a < nd; ++a)
        for (int b = 0; b < nv; ++b)
            for (int c = 0; c < nu; ++c) {
                const double d = axis(bases.d, nd, a), v = axis(bases.v, nv, b), u = axis(bases.u, nu, c);
                out << format_double(d) << ',' << format_double(v) << ',' << format_double(u) << ','
                    << format_double(surface_value(fit, bases, d, v, u)) << '\n';
            }
}

} // namespace gaitprint
