#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dronedelivery/geocode.hpp"
#include "dronedelivery/mission.hpp"

namespace dd::scenario {

// The order a scenario places before dispatch. `color_index` is the palette
// slot the recipient should end up with; lower slots are filled with
// placeholder accounts first.
struct OrderSpec {
    std::string recipient = "recipient";
    std::string address;
    std::string building_id;
    int color_index = 0;
    std::string face_image = "reference-face";
};

// Fault injection for the embedded cloud and the container servo.
struct Faults {
    int image_unreachable_attempts = 0;
    bool image_missing = false;
    std::set<int> servo_failures;  // 1-based servo command attempts that go unacknowledged
};

struct Scenario {
    std::string name;
    nlohmann::json document;  // after overrides
    sim::World world;
    mission::Equipment equipment;
    mission::MissionConfig config;
    perception::FaceStream faces;
    geo::FixtureTable geocode_fixtures;
    OrderSpec order;
    Faults faults;
};

nlohmann::json read_document(const std::filesystem::path& path);

// `--set a.b=value`: value parsed as JSON, falling back to a plain string.
void apply_set(nlohmann::json& doc, const std::string& assignment);
// RFC 7386 merge of `patch` into `doc`.
void apply_config(nlohmann::json& doc, const nlohmann::json& patch);

Scenario parse_scenario(const nlohmann::json& doc, const std::string& fallback_name = "scenario");

struct Overrides {
    std::optional<std::filesystem::path> config;
    std::vector<std::string> sets;
};

// Errors carry "<file>: <json path>" in their detail.
Scenario load_scenario(const std::filesystem::path& path, const Overrides& overrides = {});

mission::MissionConfig parse_mission_config(const nlohmann::json& j, const std::string& path = "/mission");
perception::DetectorProfile parse_detector_profile(const nlohmann::json& j, const std::string& path = "/detector_profile");
sim::GpsProfile parse_gps_profile(const nlohmann::json& j, const std::string& path = "/gps_profile");
perception::FaceStream parse_face_stream(const nlohmann::json& j, const std::string& path = "/face_stream");

}  // namespace dd::scenario
