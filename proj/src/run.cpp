#include "dronedelivery/run.hpp"

#include <cstdio>
#include <map>

#include "dronedelivery/cloud.hpp"
#include "dronedelivery/error.hpp"

namespace dd::run {

using mission::Outcome;
using nlohmann::json;
using ojson = nlohmann::ordered_json;

int exit_code_for(const std::optional<Outcome>& outcome) {
    if (!outcome) return exit_code::kNotLaunched;
    switch (*outcome) {
        case Outcome::Delivered: return exit_code::kDelivered;
        case Outcome::NotDelivered: return exit_code::kNotDelivered;
        case Outcome::MissedDelivery: return exit_code::kMissedDelivery;
        case Outcome::Aborted: return exit_code::kAborted;
    }
    return exit_code::kFailure;
}

RunReport report_from_log(const mission::MissionLog& log, const std::string& scenario, std::uint64_t seed) {
    namespace ek = mission::event_kind;
    RunReport r;
    r.scenario = scenario;
    r.seed = seed;
    for (const auto& e : log.events()) {
        if (e.kind == ek::kMissionStarted) {
            r.delivery_id = e.payload.value("delivery_id", "");
        } else if (e.kind == ek::kStateTransition) {
            if (e.payload.at("trigger") == "ParamsReady") r.launched = true;
            const auto to = mission::parse_state_label(e.payload.at("to").get<std::string>());
            if (to && to->outcome) r.outcome = to->outcome;
        } else if (e.kind == ek::kNotificationPushed) {
            r.notifications.push_back(e.payload.at("kind").get<std::string>());
        } else if (e.kind == ek::kMissionClosed) {
            r.delivery_duration_s = e.payload.at("delivery_duration_s").get<double>();
            r.distance_flown_m = e.payload.at("distance_flown_m").get<double>();
            r.energy_used_j = e.payload.at("energy_used_j").get<double>();
            if (e.payload.at("disposition").is_string()) r.disposition = e.payload.at("disposition").get<std::string>();
        }
    }
    r.exit_status = exit_code_for(r.outcome);
    return r;
}

ojson to_json(const RunReport& r) {
    ojson j;
    j["scenario"] = r.scenario;
    j["seed"] = r.seed;
    j["delivery_id"] = r.delivery_id;
    j["launched"] = r.launched;
    j["outcome"] = r.outcome ? ojson(mission::outcome_name(*r.outcome)) : ojson(nullptr);
    j["delivery_duration_s"] = r.delivery_duration_s;
    j["distance_flown_m"] = r.distance_flown_m;
    j["energy_used_j"] = r.energy_used_j;
    j["notifications"] = r.notifications;
    j["disposition"] = r.disposition ? ojson(*r.disposition) : ojson(nullptr);
    j["exit_status"] = r.exit_status;
    return j;
}

RunOutput run_scenario(const scenario::Scenario& s, std::uint64_t seed, const mission::TickObserver& observer) {
    cloud::ServiceOptions opts;
    opts.id_seed = seed;
    opts.clock = [] { return 0.0; };
    for (const auto& b : s.world.buildings) opts.buildings.insert(b.id);
    cloud::Service service(opts, geo::GeocodeProvider::fixture(s.geocode_fixtures));

    const auto& order = s.order;
    for (int i = 0; i < order.color_index; ++i) {
        service.register_user("placeholder-" + std::to_string(i), "placeholder-face-" + std::to_string(i),
                              order.building_id);
    }
    const auto user = service.register_user(order.recipient, order.face_image, order.building_id);
    if (s.faults.image_missing) service.delete_face_image(user.user_id);

    RunOutput out;
    std::optional<cloud::Order> placed;
    try {
        placed = service.place_order(user.user_id, geo::Address::from_text(order.address));
    } catch (const Error& e) {
        if (e.code() != ErrorCode::UnresolvableAddress) throw;
        // The mission never leaves AwaitDispatch.
        mission::Recorder rec(out.log, s.world.dt_s);
        rec.emit(mission::event_kind::kPreflightFailed,
                 {{"reason", "unresolvable_address"}, {"address", order.address}});
        out.report = report_from_log(out.log, s.name, seed);
        return out;
    }

    const auto params = service.dispatch(placed->delivery_id, "depot");
    cloud::ServiceLink link(service, false, s.faults.image_unreachable_attempts);
    mission::SimServo servo(s.faults.servo_failures);
    auto result = mission::launch({params, s.config, s.world, s.equipment, s.faces, seed}, link, servo, observer);
    out.log = std::move(result.log);
    out.report = report_from_log(out.log, s.name, seed);
    return out;
}

SweepGrid parse_grid(const json& j) {
    if (!j.is_object()) fail(ErrorCode::Validation, "grid must be an object");
    SweepGrid g;
    auto list = [&](const char* key, std::vector<json>& into) {
        if (!j.contains(key)) return;
        if (!j.at(key).is_array() || j.at(key).empty()) {
            fail(ErrorCode::Validation, std::string("grid ") + key + " must be a non-empty list", key);
        }
        for (const auto& v : j.at(key)) into.push_back(v);
    };
    list("detector_profiles", g.detector_profiles);
    list("gps_profiles", g.gps_profiles);
    if (g.detector_profiles.empty() && g.gps_profiles.empty()) {
        fail(ErrorCode::Validation, "grid has no detector_profiles or gps_profiles");
    }
    if (j.contains("seeds")) {
        for (const auto& v : j.at("seeds")) g.seeds.push_back(v.get<std::uint64_t>());
    } else {
        const auto count = j.value("seed_count", 1);
        const auto start = j.value("seed_start", std::uint64_t{1});
        for (int i = 0; i < count; ++i) g.seeds.push_back(start + static_cast<std::uint64_t>(i));
    }
    if (g.seeds.empty()) fail(ErrorCode::Validation, "grid has no seeds");
    return g;
}

SweepResult sweep(const json& scenario_doc, const std::string& name, const SweepGrid& grid) {
    const std::vector<json> dets = grid.detector_profiles.empty() ? std::vector<json>{json()} : grid.detector_profiles;
    const std::vector<json> gpss = grid.gps_profiles.empty() ? std::vector<json>{json()} : grid.gps_profiles;
    if (grid.seeds.empty()) fail(ErrorCode::Validation, "grid has no seeds");

    SweepResult out;
    for (const auto& det : dets) {
        for (const auto& gps : gpss) {
            json doc = scenario_doc;
            if (!det.is_null()) doc["detector_profile"] = det;
            if (!gps.is_null()) doc["gps_profile"] = gps;
            const auto s = scenario::parse_scenario(doc, name);
            SweepSummary sum;
            sum.detector = s.equipment.detector.label;
            sum.gps = s.equipment.gps.label;
            double time_total = 0.0;
            double energy_total = 0.0;
            for (auto seed : grid.seeds) {
                auto run = run_scenario(s, seed);
                ++sum.runs;
                energy_total += run.report.energy_used_j;
                if (run.report.outcome == Outcome::Delivered) {
                    ++sum.delivered;
                    time_total += run.report.delivery_duration_s;
                }
                out.rows.push_back({sum.detector, sum.gps, std::move(run.report)});
            }
            sum.success_rate = static_cast<double>(sum.delivered) / sum.runs;
            if (sum.delivered > 0) sum.mean_delivery_time_s = time_total / sum.delivered;
            sum.mean_energy_j = energy_total / sum.runs;
            out.summary.push_back(std::move(sum));
        }
    }
    return out;
}

ojson to_json(const SweepRow& row) {
    ojson j;
    j["detector_profile"] = row.detector;
    j["gps_profile"] = row.gps;
    const ojson report = to_json(row.report);
    for (auto it = report.begin(); it != report.end(); ++it) j[it.key()] = *it;
    return j;
}

ojson to_json(const SweepSummary& s) {
    ojson j;
    j["detector_profile"] = s.detector;
    j["gps_profile"] = s.gps;
    j["runs"] = s.runs;
    j["delivered"] = s.delivered;
    j["success_rate"] = s.success_rate;
    j["mean_delivery_time_s"] = s.mean_delivery_time_s ? ojson(*s.mean_delivery_time_s) : ojson(nullptr);
    j["mean_energy_j"] = s.mean_energy_j;
    return j;
}

std::string format_table(const std::vector<SweepSummary>& summary) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "%-16s %-10s %6s %12s %16s %14s\n", "detector", "gps", "runs", "success_rate",
                  "mean_delivery_s", "mean_energy_j");
    out += line;
    for (const auto& s : summary) {
        char t[32] = "-";
        if (s.mean_delivery_time_s) std::snprintf(t, sizeof t, "%.1f", *s.mean_delivery_time_s);
        std::snprintf(line, sizeof line, "%-16s %-10s %6d %12.3f %16s %14.1f\n", s.detector.c_str(), s.gps.c_str(),
                      s.runs, s.success_rate, t, s.mean_energy_j);
        out += line;
    }
    return out;
}

}  // namespace dd::run
