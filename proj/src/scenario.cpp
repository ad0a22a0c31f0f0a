#include "dronedelivery/scenario.hpp"

#include <fstream>
#include <sstream>

#include "dronedelivery/error.hpp"

namespace dd::scenario {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& path, const std::string& what) {
    fail(ErrorCode::Validation, path + ": " + what, path);
}

double number(const json& obj, const char* key, const std::string& path, double fallback) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number()) invalid(path + "/" + key, "expected a number");
    return v.get<double>();
}

int integer(const json& obj, const char* key, const std::string& path, int fallback) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) invalid(path + "/" + key, "expected an integer");
    return v.get<int>();
}

std::string text(const json& obj, const char* key, const std::string& path, const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_string()) invalid(path + "/" + key, "expected a string");
    return v.get<std::string>();
}

void expect_object(const json& j, const std::string& path) {
    if (!j.is_object()) invalid(path, "expected an object");
}

// Wraps a validate() call so its message names the JSON path.
template <typename T>
void checked(const T& value, const std::string& path) {
    try {
        validate(value);
    } catch (const Error& e) {
        fail(e.code(), path + ": " + e.what(), path);
    }
}

}  // namespace

json read_document(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::NotFound, "cannot open " + path.string(), path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return json::parse(buf.str());
    } catch (const json::parse_error& e) {
        fail(ErrorCode::Validation, path.string() + ": " + e.what(), path.string());
    }
}

void apply_set(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) fail(ErrorCode::Validation, "--set expects key=value: " + assignment);
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) fail(ErrorCode::Validation, "--set has an empty path segment: " + key);
        if (node->is_array()) {
            std::size_t idx = 0;
            try {
                idx = std::stoul(part);
            } catch (const std::exception&) {
                fail(ErrorCode::Validation, "--set: '" + part + "' is not an array index", key);
            }
            if (idx >= node->size()) fail(ErrorCode::Validation, "--set: index out of range", key);
            node = &(*node)[idx];
        } else {
            if (!node->is_object()) *node = json::object();
            node = &(*node)[part];
        }
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    *node = std::move(value);
}

void apply_config(json& doc, const json& patch) { doc.merge_patch(patch); }

perception::DetectorProfile parse_detector_profile(const json& j, const std::string& path) {
    if (j.is_string()) return perception::detector_profile_by_name(j.get<std::string>());
    expect_object(j, path);
    perception::DetectorProfile p;
    if (j.contains("name")) p = perception::detector_profile_by_name(text(j, "name", path, ""));
    p.label = text(j, "label", path, p.label);
    p.true_positive_prob = number(j, "true_positive_prob", path, p.true_positive_prob);
    p.false_positive_per_min = number(j, "false_positive_per_min", path, p.false_positive_per_min);
    p.max_range_m = number(j, "max_range", path, p.max_range_m);
    p.height_sigma_m = number(j, "height_sigma", path, p.height_sigma_m);
    p.latency_ticks = integer(j, "latency_ticks", path, p.latency_ticks);
    p.misread_rate = number(j, "misread_rate", path, p.misread_rate);
    p.scan_range_m = number(j, "scan_range", path, p.scan_range_m);
    checked(p, path);
    return p;
}

sim::GpsProfile parse_gps_profile(const json& j, const std::string& path) {
    if (j.is_string()) return sim::gps_profile_by_name(j.get<std::string>());
    expect_object(j, path);
    sim::GpsProfile p;
    if (j.contains("name")) p = sim::gps_profile_by_name(text(j, "name", path, ""));
    p.label = text(j, "label", path, p.label);
    p.sigma_m = number(j, "sigma", path, p.sigma_m);
    p.update_period_s = number(j, "update_period", path, p.update_period_s);
    checked(p, path);
    return p;
}

perception::FaceStream parse_face_stream(const json& j, const std::string& path) {
    if (!j.is_array()) invalid(path, "expected a list of [t, confidence] pairs");
    std::vector<perception::FaceSample> samples;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& e = j[i];
        const std::string at = path + "/" + std::to_string(i);
        if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
            invalid(at, "expected [t, confidence]");
        }
        samples.push_back({e[0].get<double>(), e[1].get<double>()});
    }
    try {
        return perception::FaceStream(std::move(samples));
    } catch (const Error& e) {
        fail(e.code(), path + ": " + e.what(), path);
    }
}

mission::MissionConfig parse_mission_config(const json& j, const std::string& path) {
    expect_object(j, path);
    mission::MissionConfig c;
    c.locality_radius_m = number(j, "locality_radius", path, c.locality_radius_m);
    c.scan_altitude_m = number(j, "scan_altitude", path, c.scan_altitude_m);
    c.overpass_margin_m = number(j, "overpass_margin", path, c.overpass_margin_m);
    c.cruise_altitude_m = number(j, "cruise_altitude", path, c.cruise_altitude_m);
    c.auth_timeout_s = number(j, "auth_timeout", path, c.auth_timeout_s);
    c.face_threshold = number(j, "face_threshold", path, c.face_threshold);
    c.unlock_dwell_s = number(j, "unlock_dwell", path, c.unlock_dwell_s);
    c.battery_reserve_fraction = number(j, "battery_reserve", path, c.battery_reserve_fraction);
    c.telemetry_period_s = number(j, "telemetry_period", path, c.telemetry_period_s);
    c.approach_speed_mps = number(j, "approach_speed", path, c.approach_speed_mps);
    c.arrival_tolerance_m = number(j, "arrival_tolerance", path, c.arrival_tolerance_m);
    c.image_request_attempts = integer(j, "image_request_attempts", path, c.image_request_attempts);
    c.image_retry_interval_s = number(j, "image_retry_interval", path, c.image_retry_interval_s);
    c.max_mission_s = number(j, "max_mission_time", path, c.max_mission_s);
    const std::string order = text(j, "door_order", path, "stored");
    if (order == "stored") {
        c.door_order = mission::DoorOrder::Stored;
    } else if (order == "nearest_first") {
        c.door_order = mission::DoorOrder::NearestFirst;
    } else {
        invalid(path + "/door_order", "expected \"stored\" or \"nearest_first\"");
    }
    checked(c, path);
    return c;
}

Scenario parse_scenario(const json& doc, const std::string& fallback_name) {
    expect_object(doc, "");
    Scenario s;
    s.document = doc;
    s.name = text(doc, "name", "", fallback_name);
    s.world = sim::load_world(doc);

    auto& eq = s.equipment;
    if (doc.contains("power_profile")) {
        const auto& j = doc.at("power_profile");
        const std::string path = "/power_profile";
        expect_object(j, path);
        eq.power.hover_draw_w = number(j, "hover_w", path, eq.power.hover_draw_w);
        eq.power.cruise_draw_w_per_mps = number(j, "cruise_w_per_mps", path, eq.power.cruise_draw_w_per_mps);
        eq.power.battery_capacity_j = number(j, "battery_capacity_j", path, eq.power.battery_capacity_j);
        if (j.contains("components")) {
            expect_object(j.at("components"), path + "/components");
            eq.power.component_draw_w.clear();
            for (const auto& [label, w] : j.at("components").items()) {
                if (!w.is_number()) invalid(path + "/components/" + label, "expected watts");
                eq.power.component_draw_w[label] = w.get<double>();
            }
        }
        checked(eq.power, path);
    }
    if (doc.contains("drone")) {
        const auto& j = doc.at("drone");
        const std::string path = "/drone";
        expect_object(j, path);
        eq.limits.max_horizontal_speed_mps = number(j, "max_horizontal_speed", path, eq.limits.max_horizontal_speed_mps);
        eq.limits.max_vertical_speed_mps = number(j, "max_vertical_speed", path, eq.limits.max_vertical_speed_mps);
        if (!(eq.limits.max_horizontal_speed_mps > 0.0) || !(eq.limits.max_vertical_speed_mps > 0.0)) {
            invalid(path, "speed limits must be > 0");
        }
        eq.baro_sigma_m = number(j, "baro_sigma", path, eq.baro_sigma_m);
        if (!(eq.baro_sigma_m >= 0.0)) invalid(path + "/baro_sigma", "must be >= 0");
        if (j.contains("initial_battery_fraction")) {
            const double f = number(j, "initial_battery_fraction", path, 1.0);
            if (!(f >= 0.0 && f <= 1.0)) invalid(path + "/initial_battery_fraction", "must be in [0, 1]");
            eq.initial_battery_j = f * eq.power.battery_capacity_j;
        }
        if (j.contains("initial_battery_j")) eq.initial_battery_j = number(j, "initial_battery_j", path, 0.0);
        if (j.contains("servo_failures")) {
            for (const auto& v : j.at("servo_failures")) {
                if (!v.is_number_integer()) invalid(path + "/servo_failures", "expected integers");
                s.faults.servo_failures.insert(v.get<int>());
            }
        }
    }
    eq.gps = doc.contains("gps_profile") ? parse_gps_profile(doc.at("gps_profile")) : sim::gps_profile_by_name("neo6m");
    eq.detector = doc.contains("detector_profile") ? parse_detector_profile(doc.at("detector_profile"))
                                                   : perception::detector_profile_by_name("yolov4-tiny");
    if (doc.contains("face_stream")) s.faces = parse_face_stream(doc.at("face_stream"));
    s.config = doc.contains("mission") ? parse_mission_config(doc.at("mission")) : mission::MissionConfig{};

    if (doc.contains("geocode_fixtures")) {
        try {
            s.geocode_fixtures = geo::parse_fixture_table(doc.at("geocode_fixtures").dump());
        } catch (const Error& e) {
            fail(e.code(), std::string("/geocode_fixtures: ") + e.what(), "/geocode_fixtures");
        }
    }

    if (!doc.contains("order")) invalid("/order", "missing");
    const auto& jo = doc.at("order");
    expect_object(jo, "/order");
    s.order.recipient = text(jo, "recipient", "/order", s.order.recipient);
    s.order.address = text(jo, "address", "/order", "");
    if (s.order.address.empty()) invalid("/order/address", "missing");
    s.order.building_id = text(jo, "building_id", "/order", "");
    if (!s.world.find_building(s.order.building_id)) invalid("/order/building_id", "unknown building");
    s.order.color_index = integer(jo, "color_index", "/order", 0);
    if (s.order.color_index < 0 ||
        s.order.color_index >= static_cast<int>(perception::Palette::default16().size())) {
        invalid("/order/color_index", "outside the palette");
    }
    s.order.face_image = text(jo, "face_image", "/order", s.order.face_image);

    if (doc.contains("cloud")) {
        const auto& jc = doc.at("cloud");
        expect_object(jc, "/cloud");
        s.faults.image_unreachable_attempts = integer(jc, "image_unreachable_attempts", "/cloud", 0);
        if (jc.contains("image_missing")) s.faults.image_missing = jc.at("image_missing").get<bool>();
    }
    return s;
}

Scenario load_scenario(const std::filesystem::path& path, const Overrides& overrides) {
    json doc = read_document(path);
    if (overrides.config) apply_config(doc, read_document(*overrides.config));
    for (const auto& s : overrides.sets) apply_set(doc, s);
    try {
        return parse_scenario(doc, path.stem().string());
    } catch (const Error& e) {
        fail(e.code(), path.string() + ": " + e.what(), path.string() + ": " + e.detail());
    } catch (const json::exception& e) {
        fail(ErrorCode::Validation, path.string() + ": " + e.what(), path.string());
    }
}

}  // namespace dd::scenario
