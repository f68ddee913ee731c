#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gaitprint/bspline.hpp"
#include "gaitprint/gridcells.hpp"
#include "gaitprint/ingest.hpp"

namespace gaitprint {

/// Per-subject lag matrices, J x n_pairs each. Column layout: for each start
/// position a = 1..S-1, the lags u = 1..S-a in order (D = v(a),
/// S = v(a+u), U = u). lmat holds equal Riemann weights summing to 1 per row.
struct DsuMatrices {
    Eigen::MatrixXd D;
    Eigen::MatrixXd S;
    Eigen::MatrixXd U;
    Eigen::MatrixXd lmat;
    int interval_length = 0;
    int lag_stride = 1;
    std::vector<RowKey> rows;
};

/// With lag_stride > 1 only lags 1, 1 + stride, ... are kept and lmat is
/// renormalized.
DsuMatrices build_dsu_matrices(const SubjectSeries& series, int lag_stride = 1);

/// Marginal bases for (lagged value, value, lag).
struct MarginalBases {
    BSplineBasis<double> d;
    BSplineBasis<double> v;
    BSplineBasis<double> u;

    int size() const { return d.size() * v.size() * u.size(); }
};

/// Open-uniform bases: [lo, hi] g for d and v, [1, S-1] for u.
MarginalBases make_bases(int interval_length, int degree = 3, int num_basis = 8, double lo = 0.0, double hi = 3.0);

/// Column of the (kd, kv, ku) tensor coefficient: kd-major, then kv, then ku.
inline int tensor_column(int kd, int kv, int ku, const MarginalBases& b)
{
    return (kd * b.v.size() + kv) * b.u.size() + ku;
}

/// C[row, (kd,kv,ku)] = sum over pairs of lmat * Bd(D) * Bv(S) * Bu(U).
/// Values outside a basis domain are clamped; `clamped` counts them.
Eigen::MatrixXd tensor_design(const DsuMatrices& dsu, const MarginalBases& bases, long* clamped = nullptr);

struct TensorDesign {
    Eigen::MatrixXd C;
    std::vector<RowKey> rows;  // (subject, j) ascending
    long clamped = 0;
};

/// Builds the shared design for many subjects, one subject's DSU matrices
/// at a time.
TensorDesign build_tensor_design(std::span<const SubjectSeries> series, const MarginalBases& bases,
                                 int lag_stride = 1, int jobs = 1);

struct Lambda {
    double d = 1.0;
    double v = 1.0;
    double u = 1.0;

    bool operator==(const Lambda&) const = default;
};

/// Marginal roughness penalties (second-derivative Gram matrices).
struct PenaltyBlocks {
    Eigen::MatrixXd Pd, Pv, Pu;

    /// lambda_d (Pd x I x I) + lambda_v (I x Pv x I) + lambda_u (I x I x Pu).
    Eigen::MatrixXd assemble(const Lambda& lambda) const;
    Eigen::Index size() const { return Pd.rows() * Pv.rows() * Pu.rows(); }
};

/// With `normalize`, each marginal penalty is divided by its Frobenius norm
/// so that one lambda scale fits all three margins.
PenaltyBlocks make_penalty_blocks(const MarginalBases& bases, bool normalize = true);

struct FunFit {
    std::string target;
    double intercept = 0;
    Eigen::VectorXd beta;  // tensor coefficients, tensor_column order
    Lambda lambda;
    double deviance = 0;
    bool converged = false;
    int n_iter = 0;
    std::vector<double> trace;  // penalized deviance per iteration
};

/// Maximizes loglik - beta' S_lambda beta over (intercept, beta); the
/// intercept is unpenalized.
FunFit fit_penalized_irls(const Eigen::MatrixXd& C, const Eigen::VectorXd& y, const PenaltyBlocks& penalty,
                          const Lambda& lambda, int max_iter = 100, double tol = 1e-9,
                          const Eigen::VectorXd& start = {});

/// Penalized log likelihood and its gradient in theta = (intercept, beta).
double penalized_loglik(const Eigen::MatrixXd& C, const Eigen::VectorXd& y, const PenaltyBlocks& penalty,
                        const Lambda& lambda, const Eigen::VectorXd& theta);
Eigen::VectorXd penalized_loglik_gradient(const Eigen::MatrixXd& C, const Eigen::VectorXd& y,
                                          const PenaltyBlocks& penalty, const Lambda& lambda,
                                          const Eigen::VectorXd& theta);

struct LambdaSelection {
    Lambda best;
    std::vector<double> cv_deviance;  // per grid entry, NaN when every fold was skipped
    int folds_used = 0;
};

/// Mean held-out Bernoulli deviance over stratified folds. Ties go to the
/// larger lambda sum, then to the earlier grid entry.
LambdaSelection select_lambda(const Eigen::MatrixXd& C, const Eigen::VectorXd& y, const PenaltyBlocks& penalty,
                              const std::vector<Lambda>& grid, int folds = 5, std::uint64_t seed = 0,
                              int max_iter = 100, double tol = 1e-9);

/// Log-spaced grid; isotropic uses lambda_d = lambda_v = lambda_u.
std::vector<Lambda> lambda_grid(const std::vector<double>& values, bool isotropic);

struct FunRegConfig {
    int max_iter = 100;
    double tol = 1e-9;
    int folds = 5;
    std::uint64_t seed = 0;
    std::vector<Lambda> grid{Lambda{}};
    int jobs = 1;
};

struct FunRegFits {
    std::map<std::string, FunFit> fits;
    std::map<std::string, std::string> failures;
};

FunRegFits funreg_one_vs_rest(const TensorDesign& design, const PenaltyBlocks& penalty, const FunRegConfig& cfg);
FunRegFits funreg_one_vs_rest(std::span<const SubjectSeries> series, const MarginalBases& bases,
                              const FunRegConfig& cfg, int lag_stride = 1);

Eigen::VectorXd funreg_predict_prob(const FunFit& fit, const Eigen::MatrixXd& C);

/// F(d, v, u) for a fitted coefficient vector.
double surface_value(const FunFit& fit, const MarginalBases& bases, double d, double v, double u);

/// logit p for one interval evaluated straight from the signal, without a
/// tensor design.
double direct_logit(const FunFit& fit, const MarginalBases& bases, const SecondFrame& frame, int lag_stride = 1);

/// CSV "d,v,u,F" over an nd x nv x nu lattice spanning the basis domains.
void write_surface_csv(std::ostream& out, const FunFit& fit, const MarginalBases& bases, int nd = 25, int nv = 25,
                       int nu = 25);

} // namespace gaitprint
