#include "gaitprint/identify.hpp"
#include "gaitprint/series_io.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <ostream>

namespace gaitprint {

ProbMatrix normalize_per_second(const Eigen::MatrixXd& raw, std::vector<RowKey> rows,
                                std::vector<std::string> candidates)
{
    if (static_cast<Eigen::Index>(rows.size()) != raw.rows()
        || static_cast<Eigen::Index>(candidates.size()) != raw.cols())
        throw DataError("normalize_per_second: labels do not match matrix shape");
    if ((raw.array() < 0).any() || !raw.allFinite())
        throw DataError("normalize_per_second: probabilities must be finite and non-negative");
    ProbMatrix out;
    out.P = normalize_rows(raw, &out.degenerate_rows);
    out.rows = std::move(rows);
    out.candidates = std::move(candidates);
    if (out.degenerate_rows > 0)
        spdlog::warn("normalize_per_second: {} all-zero rows replaced by uniform", out.degenerate_rows);
    return out;
}

std::vector<AveragedBlock> average_probs(const ProbMatrix& probs, int window)
{
    if (window < 0)
        throw ConfigError("average_probs: window must be >= 1 (or 0 for all seconds)");
    std::vector<AveragedBlock> out;
    const auto n = static_cast<Eigen::Index>(probs.rows.size());
    Eigen::Index i = 0;
    while (i < n) {
        const auto& subject = probs.rows[static_cast<std::size_t>(i)].subject_id;
        Eigen::Index end = i;
        while (end < n && probs.rows[static_cast<std::size_t>(end)].subject_id == subject)
            ++end;
        const Eigen::Index len = end - i;
        const Eigen::Index step = window == kAllSeconds ? len : window;
        int block = 0;
        for (Eigen::Index b = i; b < end; b += step) {
            const Eigen::Index m = std::min(step, end - b);
            AveragedBlock avg;
            avg.subject = subject;
            avg.block = block++;
            avg.n_seconds = static_cast<int>(m);
            avg.p = probs.P.middleRows(b, m).colwise().mean().transpose();
            out.push_back(std::move(avg));
        }
        i = end;
    }
    return out;
}

int rank_of(const Eigen::VectorXd& p, Eigen::Index truth)
{
    int rank = 1;
    for (Eigen::Index k = 0; k < p.size(); ++k)
        if (p[k] > p[truth] || (p[k] == p[truth] && k < truth))
            ++rank;
    return rank;
}

RankReport rank_k_accuracy(std::span<const AveragedBlock> blocks, const std::vector<std::string>& candidates,
                           std::vector<int> ks)
{
    std::sort(ks.begin(), ks.end());
    RankReport report;
    report.ks = ks;
    for (int k : ks)
        report.correct[k] = 0;
    for (const auto& b : blocks) {
        const auto it = std::find(candidates.begin(), candidates.end(), b.subject);
        if (it == candidates.end())
            throw DataError("rank_k_accuracy: subject " + b.subject + " is not a candidate identity");
        if (b.p.size() != static_cast<Eigen::Index>(candidates.size()))
            throw DataError("rank_k_accuracy: probability vector length differs from candidate count");
        RankEntry e;
        e.subject = b.subject;
        e.block = b.block;
        e.n_seconds = b.n_seconds;
        e.rank = rank_of(b.p, it - candidates.begin());
        Eigen::Index top = 0;
        for (Eigen::Index k = 1; k < b.p.size(); ++k)
            if (b.p[k] > b.p[top])
                top = k;
        e.predicted = candidates[static_cast<std::size_t>(top)];
        for (int k : ks)
            if (e.rank <= k)
                ++report.correct[k];
        report.entries.push_back(std::move(e));
    }
    report.total = static_cast<int>(report.entries.size());
    for (int k : ks)
        report.accuracy[k] = report.total > 0 ? static_cast<double>(report.correct[k]) / report.total : 0.0;
    return report;
}

std::vector<SensitivityRow> seconds_sensitivity(const ProbMatrix& probs, const std::vector<int>& windows,
                                                const std::vector<int>& ks)
{
    if (windows.empty())
        throw ConfigError("seconds_sensitivity: no windows");
    std::vector<SensitivityRow> out;
    for (int w : windows) {
        if (w < 1)
            throw ConfigError("seconds_sensitivity: windows must be >= 1");
        const auto blocks = average_probs(probs, w);
        const auto report = rank_k_accuracy(blocks, probs.candidates, ks);
        for (int k : report.ks)
            out.push_back({w, k, report.accuracy.at(k), report.total});
    }
    return out;
}

void write_rank_csv(std::ostream& out, const RankReport& report)
{
    out << "subject,block,n_seconds,predicted,rank";
    for (int k : report.ks)
        out << ",rank" << k << "_correct";
    out << '\n';
    for (const auto& e : report.entries) {
        out << e.subject << ',' << e.block << ',' << e.n_seconds << ',' << e.predicted << ',' << e.rank;
        for (int k : report.ks)
            out << ',' << (e.rank <= k ? 1 : 0);
        out << '\n';
    }
}

void write_sensitivity_csv(std::ostream& out, const std::vector<SensitivityRow>& rows)
{
    out << "window,k,accuracy,n_blocks\n";
    for (const auto& r : rows)
        out << r.window << ',' << r.k << ',' << format_double(r.accuracy) << ',' << r.n_blocks << '\n';
}

} // namespace gaitprint
