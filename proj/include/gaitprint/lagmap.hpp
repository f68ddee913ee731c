#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gaitprint/ingest.hpp"

namespace gaitprint {

/// (lagged value, value, lag) for one pair of samples inside an interval.
struct LagTriple {
    double d = 0;  // v(s - u)
    double v = 0;  // v(s)
    int u = 0;
};

/// Complete empirical autocorrelation distribution of one interval: triples
/// ordered by lag, then by position s.
struct LagMap {
    std::string subject_id;
    int j = 0;
    int S = 0;
    std::vector<int> lags;           // ascending
    std::vector<std::size_t> offset; // offset[k] = first triple of lags[k]; size lags+1
    std::vector<LagTriple> triples;

    std::size_t size() const { return triples.size(); }
};

/// Lag selection: std::nullopt means every lag 1..S-1.
using LagSet = std::optional<std::vector<int>>;

inline const LagSet all_lags = std::nullopt;

LagMap build_lagmap(const SecondFrame& frame, const LagSet& lags = all_lags);

/// The S-u (lagged, value) pairs for lag u, in s order. Throws ConfigError if
/// u was not built.
std::vector<std::pair<double, double>> lag_slice(const LagMap& map, int u);

/// Debug dump, columns subject,j,u,s,d,v with s 1-based.
void write_lagmap_csv(std::ostream& out, const LagMap& map, bool header = true);

} // namespace gaitprint
