#include "gaitprint/cma.hpp"
#include "gaitprint/parallel.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/normal.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <limits>
#include <random>

namespace gaitprint {

double normal_quantile(double p)
{
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double normal_cdf(double x)
{
    return boost::math::cdf(boost::math::normal_distribution<double>(), x);
}

QuantileEstimate equicoordinate_quantile(const Eigen::MatrixXd& C, double alpha, std::int64_t n_mc,
                                         std::uint64_t seed, int jobs)
{
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ConfigError("equicoordinate_quantile: alpha must be in (0, 1)");
    if (n_mc < 100)
        throw ConfigError("equicoordinate_quantile: need at least 100 draws");
    const auto G = C.rows();
    if (G == 0 || C.cols() != G)
        throw NumericalError("equicoordinate_quantile: empty or non-square correlation matrix");

    QuantileEstimate est;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C);
    if (eig.info() != Eigen::Success)
        throw NumericalError("equicoordinate_quantile: eigendecomposition failed");
    Eigen::VectorXd lambda = eig.eigenvalues();
    const double tiny = 1e-10 * std::max(1.0, lambda.cwiseAbs().maxCoeff());
    for (Eigen::Index g = 0; g < G; ++g) {
        if (lambda[g] < 0) {
            if (lambda[g] < -tiny)
                ++est.clipped_eigenvalues;
            lambda[g] = 0;
        }
    }
    if (est.clipped_eigenvalues > 0)
        spdlog::warn("equicoordinate_quantile: clipped {} negative eigenvalues of the correlation matrix",
                     est.clipped_eigenvalues);
    const Eigen::MatrixXd root = eig.eigenvectors() * lambda.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();

    constexpr std::int64_t chunk = 8192;
    const std::int64_t n_chunks = (n_mc + chunk - 1) / chunk;
    std::vector<double> maxima(static_cast<std::size_t>(n_mc));
    parallel_for(static_cast<std::size_t>(n_chunks), jobs, [&](std::size_t k) {
        const std::int64_t begin = static_cast<std::int64_t>(k) * chunk;
        const std::int64_t count = std::min(chunk, n_mc - begin);
        std::mt19937_64 rng(mix_seed(seed, k));
        std::normal_distribution<double> normal;
        // Filled coordinate by coordinate so the first g rows are shared
        // between matrices of different size under the same seed.
        Eigen::MatrixXd E(G, count);
        for (Eigen::Index g = 0; g < G; ++g)
            for (Eigen::Index b = 0; b < count; ++b)
                E(g, b) = normal(rng);
        const Eigen::MatrixXd Z = root * E;
        for (Eigen::Index b = 0; b < count; ++b)
            maxima[static_cast<std::size_t>(begin + b)] = Z.col(b).cwiseAbs().maxCoeff();
    });

    std::sort(maxima.begin(), maxima.end());
    const double p = 1.0 - alpha;
    const auto n = static_cast<double>(n_mc);
    auto at = [&](double idx) {
        const auto i = static_cast<std::int64_t>(std::clamp(idx, 0.0, n - 1));
        return maxima[static_cast<std::size_t>(i)];
    };
    const double k = std::ceil(n * p) - 1.0;
    const double spread = std::ceil(std::sqrt(n * p * (1.0 - p)));
    est.q = at(k);
    est.mc_se = 0.5 * (at(k + spread) - at(k - spread));
    return est;
}

CmaResult cma_intervals(const LogisticFit& fit, const CmaOptions& options)
{
    const auto G = fit.beta.size() - 1;
    if (G < 1)
        throw NumericalError("cma_intervals: model has no predictor coefficients");
    if (!fit.converged)
        spdlog::warn("cma_intervals: model for subject {} did not converge; proceeding", fit.target);

    CmaResult res;
    res.subject = fit.target;
    res.alpha = options.alpha;
    res.fit_converged = fit.converged;
    res.z = normal_quantile(1.0 - options.alpha / 2.0);

    const Eigen::MatrixXd V = fit.cov.bottomRightCorner(G, G);
    const Eigen::MatrixXd C = correlation_from_cov(V);
    const auto est = equicoordinate_quantile(C, options.alpha, options.n_mc, options.seed, options.jobs);
    res.q = std::max(est.q, res.z);
    res.mc_se = est.mc_se;

    for (Eigen::Index g = 0; g < G; ++g) {
        CellInterval ci;
        ci.name = static_cast<std::size_t>(g) < fit.column_names.size() ? fit.column_names[static_cast<std::size_t>(g)]
                                                                        : "x" + std::to_string(g + 1);
        ci.estimate = fit.beta[g + 1];
        ci.se = std::sqrt(V(g, g));
        ci.lo = ci.estimate - res.q * ci.se;
        ci.hi = ci.estimate + res.q * ci.se;
        ci.unadjusted_lo = ci.estimate - res.z * ci.se;
        ci.unadjusted_hi = ci.estimate + res.z * ci.se;
        ci.significant = ci.lo > 0 || ci.hi < 0;
        ci.unadjusted_significant = ci.unadjusted_lo > 0 || ci.unadjusted_hi < 0;
        if (ci.significant)
            res.significant.push_back(ci.name);
        if (ci.unadjusted_significant)
            res.unadjusted_significant.push_back(ci.name);
        res.intervals.push_back(std::move(ci));
    }
    return res;
}

std::vector<Fingerprint> fingerprint_report(std::span<const CmaResult> results, const GridSpec& grid, bool adjusted)
{
    grid.validate();
    const int n = grid.cells_per_side();
    std::vector<Fingerprint> out;
    for (const auto& res : results) {
        Fingerprint fp;
        fp.subject = res.subject;
        fp.lags = grid.lags;
        fp.panels.assign(grid.lags.size(), Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::quiet_NaN()));
        for (const auto& ci : res.intervals) {
            if (!(adjusted ? ci.significant : ci.unadjusted_significant))
                continue;
            const auto cell = parse_cell_name(ci.name);
            const auto it = std::find(grid.lags.begin(), grid.lags.end(), cell.u);
            if (it == grid.lags.end() || cell.r >= n || cell.c >= n)
                throw DataError("fingerprint_report: cell " + ci.name + " outside the grid");
            fp.panels[static_cast<std::size_t>(it - grid.lags.begin())](cell.r, cell.c) = ci.estimate;
            ++fp.n_significant;
        }
        out.push_back(std::move(fp));
    }
    return out;
}

} // namespace gaitprint
