// Panel CSV ingestion, bound-function serialization and structured result
// records (stable key order, round-trippable).
#pragma once

#include "pbounds/idset.hpp"
#include "pbounds/inference.hpp"
#include "pbounds/sims.hpp"

#include <json.hpp>

#include <string>

namespace pbounds {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

/// Long format: header `id,t,y,x1..xK[,y0]`, one row per (unit, period).
/// The panel must be balanced with t covering 1..T for every id; unit order
/// follows first appearance.
PanelDataset load_panel_csv(const std::string& path);

void save_panel_csv(const PanelDataset& panel, const std::string& path);

nlohmann::json bound_function_record(const BoundFunction& bf);
BoundFunction bound_function_from_record(const nlohmann::json& j);
void save_bound_functions(const std::vector<BoundFunction>& bfs,
                          const std::string& path);
std::vector<BoundFunction> load_bound_functions(const std::string& path);

nlohmann::json to_record(const BoundsEstimate& be);
nlohmann::json to_record(const ConfidenceInterval& ci);
nlohmann::json to_record(const IdentifiedSet& set);
nlohmann::json to_record(const ReplicationSummary& s);
nlohmann::json to_record(const DgpSpec& dgp);
nlohmann::json to_record(const TrueEffect& te);

/// Figure-data CSV, one row per swept parameter value.
void save_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);
std::string sweep_csv_text(const std::vector<SweepRow>& rows);

void save_choice_prob_csv(const ChoiceProbTable& table, const std::string& path);

/// Top-level result envelope: schema version, library version, effective
/// configuration echo and the payload.
nlohmann::json result_envelope(const std::string& command,
                               const std::string& effective_config,
                               nlohmann::json payload);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace pbounds
