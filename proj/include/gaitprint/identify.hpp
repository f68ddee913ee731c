#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gaitprint/gridcells.hpp"

namespace gaitprint {

/// Test seconds x candidate identities, rows summing to one.
struct ProbMatrix {
    Eigen::MatrixXd P;
    std::vector<RowKey> rows;
    std::vector<std::string> candidates;
    int degenerate_rows = 0;  // all-zero rows replaced by uniform
};

/// Divides each row by its sum. All-zero rows become uniform (with a warning).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
normalize_rows(const Eigen::MatrixBase<Derived>& raw, int* degenerate = nullptr)
{
    using Scalar = typename Derived::Scalar;
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out = raw;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const Scalar s = out.row(i).sum();
        if (s > Scalar(0)) {
            out.row(i) /= s;
        } else {
            out.row(i).setConstant(Scalar(1) / Scalar(out.cols()));
            if (degenerate)
                ++*degenerate;
        }
    }
    return out;
}

ProbMatrix normalize_per_second(const Eigen::MatrixXd& raw, std::vector<RowKey> rows,
                                std::vector<std::string> candidates);

/// Mean probability vector over a run of one subject's test seconds.
struct AveragedBlock {
    std::string subject;
    int block = 0;
    int n_seconds = 0;
    Eigen::VectorXd p;
};

inline constexpr int kAllSeconds = 0;

/// window = kAllSeconds gives one block per subject; otherwise consecutive
/// non-overlapping blocks of `window` seconds in row order, keeping a
/// trailing partial block.
std::vector<AveragedBlock> average_probs(const ProbMatrix& probs, int window = kAllSeconds);

/// 1-based rank of `truth` under descending probability, ties broken by
/// ascending candidate index.
int rank_of(const Eigen::VectorXd& p, Eigen::Index truth);

struct RankEntry {
    std::string subject;
    int block = 0;
    int n_seconds = 0;
    std::string predicted;
    int rank = 0;
};

struct RankReport {
    std::vector<int> ks;
    std::vector<RankEntry> entries;
    std::map<int, int> correct;
    std::map<int, double> accuracy;
    int total = 0;
};

RankReport rank_k_accuracy(std::span<const AveragedBlock> blocks, const std::vector<std::string>& candidates,
                           std::vector<int> ks = {1, 5});

struct SensitivityRow {
    int window = 0;
    int k = 0;
    double accuracy = 0;
    int n_blocks = 0;
};

std::vector<SensitivityRow> seconds_sensitivity(const ProbMatrix& probs,
                                                const std::vector<int>& windows = {1, 2, 5, 10, 25, 50, 100},
                                                const std::vector<int>& ks = {1, 5});

void write_rank_csv(std::ostream& out, const RankReport& report);
void write_sensitivity_csv(std::ostream& out, const std::vector<SensitivityRow>& rows);

} // namespace gaitprint
