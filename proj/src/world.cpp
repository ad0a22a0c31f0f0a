#include "dronedelivery/world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "dronedelivery/error.hpp"

namespace dd::sim {

using json = nlohmann::json;

GeoPoint Obstacle::center_at(double t) const {
    if (track.size() < 2) return track.empty() ? center : track.front().center;
    if (t <= track.front().t) return track.front().center;
    if (t >= track.back().t) return track.back().center;
    auto hi = std::upper_bound(track.begin(), track.end(), t,
                               [](double value, const TrackPoint& p) { return value < p.t; });
    auto lo = std::prev(hi);
    const double f = (t - lo->t) / (hi->t - lo->t);
    // Segments are a few hundred meters at most; linear in degrees is adequate.
    return {lo->center.lat() + f * (hi->center.lat() - lo->center.lat()),
            lo->center.lon() + f * (hi->center.lon() - lo->center.lon()), 0.0};
}

const Building* World::find_building(const std::string& id) const {
    auto it = std::find_if(buildings.begin(), buildings.end(), [&](const Building& b) { return b.id == id; });
    return it == buildings.end() ? nullptr : &*it;
}

std::vector<Obstacle> World::obstacles_at(double t) const {
    std::vector<Obstacle> out = obstacles;
    for (auto& o : out) o.center = o.center_at(t);
    return out;
}

double PowerProfile::component_total_w() const {
    double total = 0.0;
    for (const auto& [_, w] : component_draw_w) total += w;
    return total;
}

PowerProfile default_power_profile() {
    PowerProfile p;
    p.component_draw_w = {
        {"esp32-cam", 0.8},
        {"raspberry-pi-zero-2w", 2.0},
        {"esp32-wrover", 0.5},
        {"neo-6m", 0.15},
        {"bmp280", 0.01},
        {"a7670", 1.5},
        {"mpu6050", 0.02},
        {"servo", 0.3},
    };
    return p;
}

GpsProfile gps_profile_by_name(const std::string& name) {
    if (name == "neo6m") return {"neo6m", 2.5, 1.0};
    if (name == "m8n") return {"m8n", 2.0, 0.5};
    fail(ErrorCode::Validation, "unknown GPS profile", name);
}

namespace {

[[noreturn]] void invalid(const std::string& path, const std::string& message) {
    fail(ErrorCode::Validation, message, path);
}

void require_positive(double v, const std::string& path) {
    if (!std::isfinite(v) || v <= 0.0) invalid(path, "must be finite and > 0");
}

GeoPoint parse_point(const json& j, const std::string& path) {
    try {
        if (j.is_array() && (j.size() == 2 || j.size() == 3)) {
            return {j[0].get<double>(), j[1].get<double>(), j.size() == 3 ? j[2].get<double>() : 0.0};
        }
        if (j.is_object()) return {j.at("lat").get<double>(), j.at("lon").get<double>(), j.value("alt", 0.0)};
    } catch (const Error& e) {
        invalid(path, e.what());
    } catch (const json::exception& e) {
        invalid(path, e.what());
    }
    invalid(path, "expected {lat, lon} or [lat, lon]");
}

double number_at(const json& obj, const char* key, const std::string& path) {
    if (!obj.contains(key) || !obj.at(key).is_number()) invalid(path + "/" + key, "expected a number");
    return obj.at(key).get<double>();
}

std::string id_at(const json& obj, const std::string& path) {
    if (!obj.contains("id") || !obj.at("id").is_string() || obj.at("id").get<std::string>().empty()) {
        invalid(path + "/id", "expected a non-empty string id");
    }
    return obj.at("id").get<std::string>();
}

}  // namespace

void validate(const World& world) {
    require_positive(world.dt_s, "/dt");
    require_positive(world.corridor_width_m, "/corridor_width");
    require_positive(world.door_bound_m, "/door_bound");
    require_positive(world.earth_radius_m, "/earth_radius");

    std::set<std::string> building_ids;
    for (std::size_t i = 0; i < world.buildings.size(); ++i) {
        const auto& b = world.buildings[i];
        const auto path = "/buildings/" + std::to_string(i);
        if (!building_ids.insert(b.id).second) invalid(path + "/id", "duplicate building id '" + b.id + "'");
        if (b.doors.empty()) invalid(path + "/doors", "building '" + b.id + "' has no doors");
        std::set<std::string> door_ids;
        for (std::size_t k = 0; k < b.doors.size(); ++k) {
            const auto& d = b.doors[k];
            const auto dpath = path + "/doors/" + std::to_string(k);
            if (!door_ids.insert(d.id).second) invalid(dpath + "/id", "duplicate door id '" + d.id + "'");
            if (geo::haversine_distance(d.position, b.entrance, world.earth_radius_m) > world.door_bound_m) {
                invalid(dpath, "door '" + d.id + "' lies beyond the door bound of its building entrance");
            }
            if (d.color_index && *d.color_index < 0) invalid(dpath + "/color_index", "must be >= 0");
        }
    }

    std::set<std::string> obstacle_ids;
    for (std::size_t i = 0; i < world.obstacles.size(); ++i) {
        const auto& o = world.obstacles[i];
        const auto path = "/obstacles/" + std::to_string(i);
        if (!obstacle_ids.insert(o.id).second) invalid(path + "/id", "duplicate obstacle id '" + o.id + "'");
        require_positive(o.radius_m, path + "/radius");
        require_positive(o.height_m, path + "/height");
        for (std::size_t k = 1; k < o.track.size(); ++k) {
            if (!(o.track[k].t > o.track[k - 1].t)) invalid(path + "/track", "track times must strictly increase");
        }
        std::vector<GeoPoint> centers{o.center};
        for (const auto& tp : o.track) centers.push_back(tp.center);
        for (const auto& c : centers) {
            if (inside_footprint(world.depot, c, o.radius_m, world.earth_radius_m)) {
                invalid(path, "depot lies inside obstacle '" + o.id + "'");
            }
        }
    }
}

void validate(const PowerProfile& power) {
    for (const auto& [label, w] : power.component_draw_w) {
        if (!std::isfinite(w) || w < 0.0) invalid("/power_profile/components/" + label, "draw must be >= 0");
    }
    if (!std::isfinite(power.hover_draw_w) || power.hover_draw_w < 0.0) invalid("/power_profile/hover_w", "must be >= 0");
    if (!std::isfinite(power.cruise_draw_w_per_mps) || power.cruise_draw_w_per_mps < 0.0) {
        invalid("/power_profile/cruise_w_per_mps", "must be >= 0");
    }
    require_positive(power.battery_capacity_j, "/power_profile/battery_capacity_j");
}

void validate(const GpsProfile& gps) {
    if (!std::isfinite(gps.sigma_m) || gps.sigma_m < 0.0) invalid("/gps_profile/sigma", "must be >= 0");
    require_positive(gps.update_period_s, "/gps_profile/update_period");
}

World load_world(const json& doc) {
    if (!doc.is_object()) invalid("/", "scenario must be a JSON object");
    World w;
    if (!doc.contains("depot")) invalid("/depot", "missing");
    w.depot = parse_point(doc.at("depot"), "/depot");
    if (doc.contains("dt")) w.dt_s = number_at(doc, "dt", "");
    if (doc.contains("corridor_width")) w.corridor_width_m = number_at(doc, "corridor_width", "");
    if (doc.contains("door_bound")) w.door_bound_m = number_at(doc, "door_bound", "");
    if (doc.contains("earth_radius")) w.earth_radius_m = number_at(doc, "earth_radius", "");

    const json buildings = doc.value("buildings", json::array());
    if (!buildings.is_array()) invalid("/buildings", "expected an array");
    for (std::size_t i = 0; i < buildings.size(); ++i) {
        const auto& jb = buildings[i];
        const auto path = "/buildings/" + std::to_string(i);
        Building b;
        b.id = id_at(jb, path);
        if (!jb.contains("entrance")) invalid(path + "/entrance", "missing");
        b.entrance = parse_point(jb.at("entrance"), path + "/entrance");
        const json doors = jb.value("doors", json::array());
        for (std::size_t k = 0; k < doors.size(); ++k) {
            const auto& jd = doors[k];
            const auto dpath = path + "/doors/" + std::to_string(k);
            Door d;
            d.id = id_at(jd, dpath);
            d.position = jd.contains("position") ? parse_point(jd.at("position"), dpath + "/position")
                                                 : parse_point(jd, dpath);
            if (jd.contains("color_index") && !jd.at("color_index").is_null()) {
                if (!jd.at("color_index").is_number_integer()) invalid(dpath + "/color_index", "expected an integer");
                d.color_index = jd.at("color_index").get<int>();
            }
            b.doors.push_back(std::move(d));
        }
        w.buildings.push_back(std::move(b));
    }

    const json obstacles = doc.value("obstacles", json::array());
    if (!obstacles.is_array()) invalid("/obstacles", "expected an array");
    for (std::size_t i = 0; i < obstacles.size(); ++i) {
        const auto& jo = obstacles[i];
        const auto path = "/obstacles/" + std::to_string(i);
        Obstacle o;
        o.id = id_at(jo, path);
        o.radius_m = number_at(jo, "radius", path);
        o.height_m = number_at(jo, "height", path);
        if (jo.contains("track")) {
            const auto& jt = jo.at("track");
            for (std::size_t k = 0; k < jt.size(); ++k) {
                const auto tpath = path + "/track/" + std::to_string(k);
                o.track.push_back({number_at(jt[k], "t", tpath), parse_point(jt[k], tpath)});
            }
        }
        if (jo.contains("lat") || jo.contains("center")) {
            o.center = jo.contains("center") ? parse_point(jo.at("center"), path + "/center") : parse_point(jo, path);
        } else if (!o.track.empty()) {
            o.center = o.track.front().center;
        } else {
            invalid(path, "obstacle needs a center or a track");
        }
        w.obstacles.push_back(std::move(o));
    }

    validate(w);
    return w;
}

DroneState step_drone(const DroneState& state, const FlightCommand& command, const World& world,
                      const DroneLimits& limits, const PowerProfile& power) {
    DroneState next = state;
    if (state.battery_j <= 0.0) {
        next.battery_j = 0.0;
        next.horizontal_speed_mps = 0.0;
        next.vertical_speed_mps = 0.0;
        next.exhausted = true;
        return next;
    }

    const double dt = world.dt_s;
    const double speed = std::clamp(command.horizontal_speed_mps, 0.0, limits.max_horizontal_speed_mps);
    const double vz = std::clamp(command.vertical_speed_mps, -limits.max_vertical_speed_mps,
                                 limits.max_vertical_speed_mps);
    next.heading_deg = geo::wrap_heading_deg(command.heading_deg);
    next.horizontal_speed_mps = speed;

    const GeoPoint moved = geo::destination_point(state.position, next.heading_deg, speed * dt, world.earth_radius_m);
    const double alt = std::max(0.0, state.position.alt() + vz * dt);
    next.vertical_speed_mps = (alt - state.position.alt()) / dt;
    next.position = moved.with_alt(alt);

    const double drain = (power.hover_draw_w + power.cruise_draw_w_per_mps * speed + power.component_total_w()) * dt;
    next.battery_j = state.battery_j - drain;
    if (next.battery_j <= 0.0) {
        next.battery_j = 0.0;
        next.exhausted = true;
    }
    return next;
}

GeoPoint GpsReceiver::sample(const DroneState& state, Rng& rng, double now_s) {
    const auto epoch = static_cast<long long>(std::floor(now_s / profile_.update_period_s + 1e-9));
    if (epoch_ && *epoch_ == epoch) return fix_;
    epoch_ = epoch;
    if (profile_.sigma_m == 0.0) {
        error_ = {};
        fix_ = state.position;
        return fix_;
    }
    error_.north = rng.normal(0.0, profile_.sigma_m);
    error_.east = rng.normal(0.0, profile_.sigma_m);
    fix_ = geo::offset_ne(state.position, error_.north, error_.east, earth_radius_m_);
    return fix_;
}

double sample_altitude(const DroneState& state, double baro_sigma_m, Rng& rng) {
    if (baro_sigma_m < 0.0) fail(ErrorCode::Validation, "barometer sigma must be >= 0");
    if (baro_sigma_m == 0.0) return state.position.alt();
    return state.position.alt() + rng.normal(0.0, baro_sigma_m);
}

bool inside_footprint(const GeoPoint& p, const GeoPoint& center, double radius_m, double earth_radius_m) {
    return geo::haversine_distance(p, center, earth_radius_m) <= radius_m;
}

std::vector<ObstacleAhead> obstacles_ahead(const World& world, const DroneState& state, double look_ahead_m,
                                           double now_s) {
    if (!(look_ahead_m > 0.0)) fail(ErrorCode::Validation, "look-ahead must be > 0");
    const double h = state.heading_deg * std::numbers::pi / 180.0;
    const double un = std::cos(h);
    const double ue = std::sin(h);
    const double half_w = world.corridor_width_m / 2.0;

    std::vector<ObstacleAhead> hits;
    for (const auto& o : world.obstacles) {
        const GeoPoint c = o.center_at(now_s);
        const auto local = geo::to_local_ne(state.position, c, world.earth_radius_m);
        const double along = local.north * un + local.east * ue;
        const double cross = -local.north * ue + local.east * un;
        const double da = along - std::clamp(along, 0.0, look_ahead_m);
        const double dc = cross - std::clamp(cross, -half_w, half_w);
        if (da * da + dc * dc > o.radius_m * o.radius_m) continue;
        ObstacleAhead hit{o, std::max(0.0, geo::haversine_distance(state.position, c, world.earth_radius_m) - o.radius_m)};
        hit.obstacle.center = c;
        hits.push_back(std::move(hit));
    }
    std::sort(hits.begin(), hits.end(), [](const ObstacleAhead& a, const ObstacleAhead& b) {
        if (a.distance_m != b.distance_m) return a.distance_m < b.distance_m;
        return a.obstacle.id < b.obstacle.id;
    });
    return hits;
}

}  // namespace dd::sim
