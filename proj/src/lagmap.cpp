#include "gaitprint/lagmap.hpp"
#include "gaitprint/series_io.hpp"

#include <algorithm>
#include <ostream>

namespace gaitprint {

LagMap build_lagmap(const SecondFrame& frame, const LagSet& lags)
{
    const int S = static_cast<int>(frame.v.size());
    LagMap map;
    map.subject_id = frame.subject_id;
    map.j = frame.j;
    map.S = S;
    if (lags) {
        map.lags = *lags;
        std::sort(map.lags.begin(), map.lags.end());
        map.lags.erase(std::unique(map.lags.begin(), map.lags.end()), map.lags.end());
        for (int u : map.lags)
            if (u < 1 || u > S - 1)
                throw ConfigError("build_lagmap: lag " + std::to_string(u) + " outside 1.." + std::to_string(S - 1));
    } else {
        for (int u = 1; u < S; ++u)
            map.lags.push_back(u);
    }

    std::size_t total = 0;
    for (int u : map.lags)
        total += static_cast<std::size_t>(S - u);
    map.triples.reserve(total);
    map.offset.reserve(map.lags.size() + 1);
    for (int u : map.lags) {
        map.offset.push_back(map.triples.size());
        for (int s = u; s < S; ++s)  // 0-based s; pairs (s-u, s)
            map.triples.push_back({frame.v[s - u], frame.v[s], u});
    }
    map.offset.push_back(map.triples.size());
    return map;
}

std::vector<std::pair<double, double>> lag_slice(const LagMap& map, int u)
{
    const auto it = std::lower_bound(map.lags.begin(), map.lags.end(), u);
    if (it == map.lags.end() || *it != u)
        throw ConfigError("lag_slice: lag " + std::to_string(u) + " not present");
    const auto k = static_cast<std::size_t>(it - map.lags.begin());
    std::vector<std::pair<double, double>> out;
    out.reserve(map.offset[k + 1] - map.offset[k]);
    for (std::size_t i = map.offset[k]; i < map.offset[k + 1]; ++i)
        out.emplace_back(map.triples[i].d, map.triples[i].v);
    return out;
}

void write_lagmap_csv(std::ostream& out, const LagMap& map, bool header)
{
    if (header)
        out << "subject,j,u,s,d,v\n";
    for (std::size_t k = 0; k < map.lags.size(); ++k) {
        const int u = map.lags[k];
        for (std::size_t i = map.offset[k]; i < map.offset[k + 1]; ++i) {
            const auto s = u + 1 + static_cast<int>(i - map.offset[k]);
            out << map.subject_id << ',' << map.j << ',' << u << ',' << s << ','
                << format_double(map.triples[i].d) << ',' << format_double(map.triples[i].v) << '\n';
        }
    }
}

} // namespace gaitprint
