#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dronedelivery/mission.hpp"
#include "dronedelivery/scenario.hpp"

namespace dd::run {

// Process exit statuses. Scripts may rely on these.
namespace exit_code {
inline constexpr int kDelivered = 0;
inline constexpr int kFailure = 1;
inline constexpr int kUsage = 2;
inline constexpr int kApiError = 3;
inline constexpr int kNotDelivered = 10;
inline constexpr int kMissedDelivery = 11;
inline constexpr int kAborted = 12;
inline constexpr int kNotLaunched = 13;
}  // namespace exit_code

int exit_code_for(const std::optional<mission::Outcome>& outcome);

struct RunReport {
    std::string scenario;
    std::uint64_t seed = 0;
    std::string delivery_id;
    bool launched = false;
    std::optional<mission::Outcome> outcome;
    double delivery_duration_s = 0.0;
    double distance_flown_m = 0.0;
    double energy_used_j = 0.0;
    std::vector<std::string> notifications;
    std::optional<std::string> disposition;
    int exit_status = exit_code::kNotLaunched;
};

// Every field comes from the log alone.
RunReport report_from_log(const mission::MissionLog& log, const std::string& scenario, std::uint64_t seed);
nlohmann::ordered_json to_json(const RunReport& report);

struct RunOutput {
    RunReport report;
    mission::MissionLog log;
};

// Full mission against an embedded in-memory cloud in fixture mode.
RunOutput run_scenario(const scenario::Scenario& s, std::uint64_t seed, const mission::TickObserver& observer = {});

struct SweepGrid {
    std::vector<nlohmann::json> detector_profiles;  // names or profile objects
    std::vector<nlohmann::json> gps_profiles;
    std::vector<std::uint64_t> seeds;
};

// {"detector_profiles": [...], "gps_profiles": [...], "seeds": [...]} or
// "seed_count"/"seed_start" instead of "seeds". An absent axis keeps the
// scenario's own profile; an empty grid is rejected.
SweepGrid parse_grid(const nlohmann::json& j);

struct SweepRow {
    std::string detector;
    std::string gps;
    RunReport report;
};

struct SweepSummary {
    std::string detector;
    std::string gps;
    int runs = 0;
    int delivered = 0;
    double success_rate = 0.0;
    std::optional<double> mean_delivery_time_s;  // over delivered runs
    double mean_energy_j = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<SweepSummary> summary;
};

SweepResult sweep(const nlohmann::json& scenario_doc, const std::string& name, const SweepGrid& grid);
nlohmann::ordered_json to_json(const SweepRow& row);
nlohmann::ordered_json to_json(const SweepSummary& s);
std::string format_table(const std::vector<SweepSummary>& summary);

}  // namespace dd::run
