#pragma once

#include <json.hpp>

#include "gaitprint/cma.hpp"
#include "gaitprint/funreg.hpp"
#include "gaitprint/glm.hpp"
#include "gaitprint/gridcells.hpp"
#include "gaitprint/identify.hpp"

namespace gaitprint {

using json = nlohmann::ordered_json;

inline constexpr int kModelFormatVersion = 1;

void to_json(json& j, const GridSpec& g);
void from_json(const json& j, GridSpec& g);
void to_json(json& j, const ScreenReport& r);
void from_json(const json& j, ScreenReport& r);
void to_json(json& j, const FitConfig& c);
void from_json(const json& j, FitConfig& c);
void to_json(json& j, const LogisticFit& f);
void from_json(const json& j, LogisticFit& f);
void to_json(json& j, const Lambda& l);
void from_json(const json& j, Lambda& l);
void to_json(json& j, const FunFit& f);
void from_json(const json& j, FunFit& f);
void to_json(json& j, const MarginalBases& b);
void from_json(const json& j, MarginalBases& b);
void to_json(json& j, const CmaResult& r);
void from_json(const json& j, CmaResult& r);
void to_json(json& j, const RankReport& r);

/// Grid-cell logistic model artifact: the fit plus the grid and screen it
/// was trained on.
struct GridModelArtifact {
    std::string config_hash;
    GridSpec grid;
    ScreenReport screen;
    LogisticFit fit;
};

/// Functional regression model artifact.
struct FunModelArtifact {
    std::string config_hash;
    MarginalBases bases;
    int lag_stride = 1;
    bool normalized_penalty = true;
    FunFit fit;
};

json to_json(const GridModelArtifact& a);
GridModelArtifact grid_model_from_json(const json& j);
json to_json(const FunModelArtifact& a);
FunModelArtifact fun_model_from_json(const json& j);

} // namespace gaitprint
