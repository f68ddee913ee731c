#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gaitprint/error.hpp"
#include "gaitprint/glm.hpp"
#include "gaitprint/gridcells.hpp"

namespace gaitprint {

/// C = V / (D D') with D the square roots of diag(V).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
correlation_from_cov(const Eigen::MatrixBase<Derived>& cov)
{
    using Scalar = typename Derived::Scalar;
    if (cov.rows() != cov.cols())
        throw NumericalError("correlation_from_cov: matrix is not square");
    for (Eigen::Index g = 0; g < cov.rows(); ++g)
        if (!(cov(g, g) > Scalar(0)))
            throw NumericalError("correlation_from_cov: non-positive variance for coefficient " + std::to_string(g));
    const auto d = cov.diagonal().array().sqrt().matrix().eval();
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> C = cov.array() / (d * d.transpose()).array();
    C.diagonal().setOnes();
    return C;
}

double normal_quantile(double p);
double normal_cdf(double x);

struct QuantileEstimate {
    double q = 0;
    double mc_se = 0;
    int clipped_eigenvalues = 0;
};

/// Monte Carlo estimate of q with P(max_g |Z_g| <= q) = 1 - alpha for
/// Z ~ N(0, C), using the symmetric square root of C (negative eigenvalues
/// clipped to 0). Draws come in fixed-size chunks, each seeded from
/// (seed, chunk), so the result does not depend on `jobs`.
QuantileEstimate equicoordinate_quantile(const Eigen::MatrixXd& C, double alpha, std::int64_t n_mc = 2'000'000,
                                         std::uint64_t seed = 0, int jobs = 1);

struct CellInterval {
    std::string name;
    double estimate = 0;
    double se = 0;
    double lo = 0, hi = 0;                      // CMA adjusted
    double unadjusted_lo = 0, unadjusted_hi = 0;
    bool significant = false;
    bool unadjusted_significant = false;
};

struct CmaResult {
    std::string subject;
    double alpha = 0.05;
    double q = 0;
    double z = 0;  // z_{1 - alpha/2}
    double mc_se = 0;
    bool fit_converged = true;
    std::vector<CellInterval> intervals;
    std::vector<std::string> significant;
    std::vector<std::string> unadjusted_significant;
};

struct CmaOptions {
    double alpha = 0.05;
    std::int64_t n_mc = 2'000'000;
    std::uint64_t seed = 0;
    int jobs = 1;
};

/// Joint intervals beta_g +/- q * se_g over the non-intercept coefficients.
/// q is never below z_{1 - alpha/2}.
CmaResult cma_intervals(const LogisticFit& fit, const CmaOptions& options = {});

/// Per-lag coefficient maps with non-significant cells set to NaN. Matrix
/// entry (r, c) is row r (value bin), column c (lagged bin).
struct Fingerprint {
    std::string subject;
    std::vector<int> lags;
    std::vector<Eigen::MatrixXd> panels;
    int n_significant = 0;
};

std::vector<Fingerprint> fingerprint_report(std::span<const CmaResult> results, const GridSpec& grid,
                                            bool adjusted = true);

} // namespace gaitprint
