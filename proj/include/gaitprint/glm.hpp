#pragma once

#include <Eigen/Core>

#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace gaitprint {

/// Numerically stable logistic function, element-wise.
template <typename Derived>
auto expit(const Eigen::ArrayBase<Derived>& eta)
{
    using Scalar = typename Derived::Scalar;
    return eta.unaryExpr([](Scalar e) {
        if (e >= Scalar(0))
            return Scalar(1) / (Scalar(1) + std::exp(-e));
        const Scalar z = std::exp(e);
        return z / (Scalar(1) + z);
    });
}

/// log(1 + exp(eta)), element-wise, without overflow.
template <typename Derived>
auto softplus(const Eigen::ArrayBase<Derived>& eta)
{
    using Scalar = typename Derived::Scalar;
    return eta.unaryExpr([](Scalar e) {
        return e > Scalar(0) ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
    });
}

/// Bernoulli log likelihood of labels y at linear predictor eta.
double bernoulli_loglik(const Eigen::VectorXd& eta, const Eigen::VectorXd& y);

struct FitConfig {
    int max_iter = 100;
    double tol = 1e-9;       // relative change in penalized deviance
    double ridge = 1e-6;     // on non-intercept coefficients
    bool standardize = true;
};

/// Result of maximizing  loglik(beta) - beta' P beta  by Newton/IRLS.
struct PenalizedIrls {
    Eigen::VectorXd beta;
    Eigen::MatrixXd information;  // Z' W Z + 2 P at beta
    double deviance = 0;          // -2 loglik
    double penalized_deviance = 0;
    bool converged = false;
    int n_iter = 0;
    std::vector<double> trace;    // penalized deviance per accepted iterate, starting value first
};

/// Core solver shared by the grid-cell and functional models. `Z` already
/// contains any intercept column; `penalty` is the symmetric P above.
/// Step-halving keeps the penalized deviance non-increasing. Converged means
/// the relative deviance change fell below `tol` and the penalized score has
/// max-norm below `score_tol`.
PenalizedIrls penalized_irls(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, const Eigen::MatrixXd& penalty,
                             int max_iter, double tol, const Eigen::VectorXd& start = {}, double score_tol = 1e-6);

/// Score of the penalized log likelihood: Z'(y - p) - 2 P beta.
Eigen::VectorXd penalized_score(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, const Eigen::MatrixXd& penalty,
                                const Eigen::VectorXd& beta);

struct LogisticFit {
    std::string target;
    Eigen::VectorXd beta;   // intercept first, original predictor scale
    Eigen::MatrixXd cov;    // inverse penalized information, original scale
    bool converged = false;
    int n_iter = 0;
    double deviance = 0;
    std::vector<double> deviance_trace;
    std::vector<std::string> column_names;
    Eigen::VectorXd center;  // training means (zeros when not standardized)
    Eigen::VectorXd scale;   // training sds (ones when not standardized)
    FitConfig config;
};

/// Binary logistic regression by IRLS with a ridge on the slopes. With
/// standardize the ridge acts on standardized slopes; estimates are mapped
/// back exactly. Throws DataError for single-class labels or non-finite X.
LogisticFit fit_logistic_irls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const FitConfig& cfg = {},
                              std::vector<std::string> column_names = {});

/// Penalty matrix P (intercept first) that the fit applied, on the original scale.
Eigen::MatrixXd effective_penalty(const LogisticFit& fit);

Eigen::VectorXd predict_prob(const LogisticFit& fit, const Eigen::MatrixXd& X);
/// Same, after checking that `column_names` matches the fit's columns.
Eigen::VectorXd predict_prob(const LogisticFit& fit, const Eigen::MatrixXd& X,
                             const std::vector<std::string>& column_names);

struct OneVsRestFits {
    std::map<std::string, LogisticFit> fits;
    std::map<std::string, std::string> failures;  // subject -> error message
};

/// One model per distinct subject, labels 1{row subject == target}.
OneVsRestFits one_vs_rest_fit(const Eigen::MatrixXd& X, const std::vector<std::string>& row_subjects,
                              const FitConfig& cfg = {}, const std::vector<std::string>& column_names = {},
                              int jobs = 1);

} // namespace gaitprint
