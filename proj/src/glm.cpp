#include "gaitprint/glm.hpp"
#include "gaitprint/error.hpp"
#include "gaitprint/parallel.hpp"

#include <Eigen/Cholesky>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <set>

namespace gaitprint {

double bernoulli_loglik(const Eigen::VectorXd& eta, const Eigen::VectorXd& y)
{
    return (y.array() * eta.array() - softplus(eta.array())).sum();
}

Eigen::VectorXd penalized_score(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, const Eigen::MatrixXd& penalty,
                                const Eigen::VectorXd& beta)
{
    const Eigen::VectorXd p = expit((Z * beta).array()).matrix();
    return Z.transpose() * (y - p) - 2.0 * penalty * beta;
}

namespace {

// Cholesky of a symmetric PSD matrix. Under separation the IRLS weights can
// underflow and leave the information singular; the smallest diagonal jitter
// that restores definiteness is added in that case.
Eigen::LLT<Eigen::MatrixXd> factor_spd(const Eigen::MatrixXd& A)
{
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success)
        return llt;
    const double scale = std::max(A.diagonal().cwiseAbs().maxCoeff(), 1e-300);
    for (double eps = 1e-14; eps <= 1e-2; eps *= 10) {
        llt.compute(A + Eigen::MatrixXd::Identity(A.rows(), A.cols()) * (eps * scale));
        if (llt.info() == Eigen::Success) {
            spdlog::debug("information matrix needed diagonal jitter {:.1e}", eps * scale);
            return llt;
        }
    }
    throw NumericalError("penalized_irls: information matrix is not positive semi-definite");
}

} // namespace

PenalizedIrls penalized_irls(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, const Eigen::MatrixXd& penalty,
                             int max_iter, double tol, const Eigen::VectorXd& start, double score_tol)
{
    const auto n = Z.rows();
    const auto p = Z.cols();
    if (y.size() != n || penalty.rows() != p || penalty.cols() != p)
        throw DataError("penalized_irls: dimension mismatch");

    PenalizedIrls out;
    out.beta = start.size() == p ? start : Eigen::VectorXd::Zero(p);

    auto objective = [&](const Eigen::VectorXd& beta, double& dev) {
        dev = -2.0 * bernoulli_loglik(Z * beta, y);
        return dev + 2.0 * beta.dot(penalty * beta);
    };

    double dev = 0;
    double pen_dev = objective(out.beta, dev);
    out.trace.push_back(pen_dev);

    Eigen::MatrixXd info(p, p);
    auto information_at = [&](const Eigen::VectorXd& beta) {
        const Eigen::ArrayXd mu = expit((Z * beta).array());
        const Eigen::VectorXd w = mu * (1.0 - mu);
        info.setZero();
        info.selfadjointView<Eigen::Lower>().rankUpdate(Z.transpose() * w.cwiseSqrt().asDiagonal());
        info.triangularView<Eigen::Upper>() = info.transpose();
        info += 2.0 * penalty;
    };

    // Near the optimum the objective stops resolving changes in beta below
    // about sqrt(machine epsilon), so line-search steps stall there. One last
    // full Newton step is taken when it shrinks the score and moves the
    // objective by no more than rounding. Only genuine decreases enter the trace.
    auto polish = [&](const Eigen::VectorXd& score) {
        information_at(out.beta);
        const Eigen::VectorXd candidate = out.beta + factor_spd(info).solve(score);
        double cand_dev = 0;
        const double cand_pen = objective(candidate, cand_dev);
        const bool shrinks = penalized_score(Z, y, penalty, candidate).cwiseAbs().maxCoeff()
                             < score.cwiseAbs().maxCoeff();
        if (!(cand_pen <= pen_dev || (shrinks && cand_pen <= pen_dev + 1e-12 * std::abs(pen_dev))))
            return;
        if (cand_pen <= pen_dev)
            out.trace.push_back(cand_pen);
        out.beta = candidate;
        pen_dev = cand_pen;
        dev = cand_dev;
    };

    for (int iter = 1; iter <= max_iter; ++iter) {
        information_at(out.beta);
        const Eigen::VectorXd score = penalized_score(Z, y, penalty, out.beta);
        const Eigen::VectorXd step = factor_spd(info).solve(score);
        if (!step.allFinite())
            throw NumericalError("penalized_irls: non-finite Newton step");

        double t = 1.0;
        Eigen::VectorXd candidate;
        double cand_dev = 0;
        double cand_pen = 0;
        bool accepted = false;
        for (int halving = 0; halving < 40; ++halving, t *= 0.5) {
            candidate = out.beta + t * step;
            cand_pen = objective(candidate, cand_dev);
            if (std::isfinite(cand_pen) && cand_pen <= pen_dev) {
                accepted = true;
                break;
            }
        }
        out.n_iter = iter;
        if (!accepted) {
            // No decrease possible along the Newton direction: at the optimum
            // up to rounding, or stuck.
            out.converged = score.cwiseAbs().maxCoeff() < score_tol;
            if (out.converged)
                polish(score);
            break;
        }
        const double change = std::abs(cand_pen - pen_dev) / (std::abs(cand_pen) + 0.1);
        out.beta = candidate;
        pen_dev = cand_pen;
        dev = cand_dev;
        out.trace.push_back(pen_dev);
        if (change < tol) {
            const Eigen::VectorXd s = penalized_score(Z, y, penalty, out.beta);
            if (s.cwiseAbs().maxCoeff() < score_tol) {
                out.converged = true;
                polish(s);
                break;
            }
        }
    }

    information_at(out.beta);
    out.information = info;
    out.deviance = dev;
    out.penalized_deviance = pen_dev;
    return out;
}

namespace {

void check_inputs(const Eigen::MatrixXd& X, const Eigen::VectorXd& y)
{
    if (X.rows() != y.size())
        throw DataError("fit_logistic_irls: X and y have different row counts");
    if (!X.allFinite())
        throw DataError("fit_logistic_irls: non-finite values in X");
    bool has0 = false, has1 = false;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (y[i] == 1.0)
            has1 = true;
        else if (y[i] == 0.0)
            has0 = true;
        else
            throw DataError("fit_logistic_irls: labels must be 0 or 1");
    }
    if (!has0 || !has1)
        throw DataError("fit_logistic_irls: labels contain a single class");
}

// beta_original = A * beta_standardized
Eigen::MatrixXd unstandardize_map(const Eigen::VectorXd& center, const Eigen::VectorXd& scale)
{
    const auto g = center.size();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(g + 1, g + 1);
    A(0, 0) = 1.0;
    for (Eigen::Index j = 0; j < g; ++j) {
        A(j + 1, j + 1) = 1.0 / scale[j];
        A(0, j + 1) = -center[j] / scale[j];
    }
    return A;
}

} // namespace

LogisticFit fit_logistic_irls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const FitConfig& cfg,
                              std::vector<std::string> column_names)
{
    if (!(cfg.tol > 0) || !(cfg.ridge >= 0) || cfg.max_iter < 1)
        throw ConfigError("fit_logistic_irls: need tol > 0, ridge >= 0, max_iter >= 1");
    check_inputs(X, y);
    const auto n = X.rows();
    const auto g = X.cols();
    if (!column_names.empty() && static_cast<Eigen::Index>(column_names.size()) != g)
        throw DataError("fit_logistic_irls: column name count does not match X");

    LogisticFit fit;
    fit.config = cfg;
    fit.column_names = std::move(column_names);
    fit.center = Eigen::VectorXd::Zero(g);
    fit.scale = Eigen::VectorXd::Ones(g);
    if (cfg.standardize && n > 1) {
        fit.center = X.colwise().mean().transpose();
        for (Eigen::Index j = 0; j < g; ++j) {
            const double sd = std::sqrt((X.col(j).array() - fit.center[j]).square().sum() / static_cast<double>(n - 1));
            fit.scale[j] = sd > 0 ? sd : 1.0;
        }
    }

    Eigen::MatrixXd Z(n, g + 1);
    Z.col(0).setOnes();
    Z.rightCols(g) = ((X.rowwise() - fit.center.transpose()).array().rowwise() / fit.scale.transpose().array()).matrix();

    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(g + 1, g + 1);
    P.diagonal().tail(g).setConstant(cfg.ridge);

    // Intercept-only start at the marginal log-odds speeds up unbalanced one-vs-rest fits.
    Eigen::VectorXd start = Eigen::VectorXd::Zero(g + 1);
    const double ybar = y.mean();
    start[0] = std::log(ybar / (1.0 - ybar));

    const auto res = penalized_irls(Z, y, P, cfg.max_iter, cfg.tol, start);
    const Eigen::MatrixXd A = unstandardize_map(fit.center, fit.scale);
    const Eigen::MatrixXd cov_std = factor_spd(res.information).solve(Eigen::MatrixXd::Identity(g + 1, g + 1));

    fit.beta = A * res.beta;
    fit.cov = A * cov_std * A.transpose();
    fit.cov = 0.5 * (fit.cov + fit.cov.transpose()).eval();
    fit.converged = res.converged;
    fit.n_iter = res.n_iter;
    fit.deviance = res.deviance;
    fit.deviance_trace = res.trace;
    if (!fit.converged)
        spdlog::warn("logistic fit did not converge after {} iterations", res.n_iter);
    return fit;
}

Eigen::MatrixXd effective_penalty(const LogisticFit& fit)
{
    const auto g = fit.center.size();
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(g + 1, g + 1);
    P.diagonal().tail(g).setConstant(fit.config.ridge);
    // beta_std = A^{-1} beta_orig, so P_orig = A^{-T} P A^{-1}.
    Eigen::MatrixXd Ainv = Eigen::MatrixXd::Zero(g + 1, g + 1);
    Ainv(0, 0) = 1.0;
    for (Eigen::Index j = 0; j < g; ++j) {
        Ainv(j + 1, j + 1) = fit.scale[j];
        Ainv(0, j + 1) = fit.center[j];
    }
    return Ainv.transpose() * P * Ainv;
}

Eigen::VectorXd predict_prob(const LogisticFit& fit, const Eigen::MatrixXd& X)
{
    if (X.cols() + 1 != fit.beta.size())
        throw DataError("predict_prob: design has " + std::to_string(X.cols()) + " columns, model expects "
                        + std::to_string(fit.beta.size() - 1));
    const Eigen::VectorXd eta = (X * fit.beta.tail(X.cols())).array() + fit.beta[0];
    return expit(eta.array()).matrix();
}

Eigen::VectorXd predict_prob(const LogisticFit& fit, const Eigen::MatrixXd& X,
                             const std::vector<std::string>& column_names)
{
    if (column_names != fit.column_names)
        throw DataError("predict_prob: column names do not match the fitted model");
    return predict_prob(fit, X);
}

OneVsRestFits one_vs_rest_fit(const Eigen::MatrixXd& X, const std::vector<std::string>& row_subjects,
                              const FitConfig& cfg, const std::vector<std::string>& column_names, int jobs)
{
    if (static_cast<Eigen::Index>(row_subjects.size()) != X.rows())
        throw DataError("one_vs_rest_fit: row index does not match design");
    const std::set<std::string> distinct(row_subjects.begin(), row_subjects.end());
    if (distinct.size() < 2)
        throw DataError("one_vs_rest_fit: need at least 2 subjects");
    const std::vector<std::string> subjects(distinct.begin(), distinct.end());

    std::vector<LogisticFit> fits(subjects.size());
    std::vector<std::string> errors(subjects.size());
    parallel_for(subjects.size(), jobs, [&](std::size_t k) {
        Eigen::VectorXd y(X.rows());
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            y[i] = row_subjects[static_cast<std::size_t>(i)] == subjects[k] ? 1.0 : 0.0;
        try {
            fits[k] = fit_logistic_irls(X, y, cfg, column_names);
            fits[k].target = subjects[k];
        } catch (const std::exception& e) {
            errors[k] = e.what();
        }
    });

    OneVsRestFits out;
    for (std::size_t k = 0; k < subjects.size(); ++k) {
        if (errors[k].empty())
            out.fits.emplace(subjects[k], std::move(fits[k]));
        else
            out.failures.emplace(subjects[k], errors[k]);
    }
    if (!out.failures.empty())
        spdlog::warn("one_vs_rest_fit: {} of {} subject fits failed", out.failures.size(), subjects.size());
    return out;
}

} // namespace gaitprint
