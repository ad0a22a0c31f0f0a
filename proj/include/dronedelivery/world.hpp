#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dronedelivery/geo.hpp"
#include "dronedelivery/rng.hpp"

namespace dd::sim {

using geo::GeoPoint;

struct Door {
    std::string id;
    GeoPoint position;
    std::optional<int> color_index;  // palette index of the displayed code, if any
};

struct Building {
    std::string id;
    GeoPoint entrance;
    std::vector<Door> doors;
};

// One vertex of a scripted obstacle trajectory.
struct TrackPoint {
    double t = 0.0;
    GeoPoint center;
};

// Vertical cylinder. Dynamic obstacles follow a piecewise-linear track and
// hold the end points outside its time span.
struct Obstacle {
    std::string id;
    GeoPoint center;
    double radius_m = 1.0;
    double height_m = 1.0;
    std::vector<TrackPoint> track;

    GeoPoint center_at(double t) const;
    bool is_dynamic() const noexcept { return track.size() >= 2; }
};

struct World {
    GeoPoint depot;
    std::vector<Building> buildings;
    std::vector<Obstacle> obstacles;
    double dt_s = 0.1;
    double corridor_width_m = 2.0;
    double door_bound_m = 100.0;
    double earth_radius_m = geo::kDefaultEarthRadiusM;

    const Building* find_building(const std::string& id) const;
    // Obstacles with centers resolved at simulated time t.
    std::vector<Obstacle> obstacles_at(double t) const;
};

struct DroneLimits {
    double max_horizontal_speed_mps = 10.0;
    double max_vertical_speed_mps = 3.0;
};

struct DroneState {
    GeoPoint position;
    double horizontal_speed_mps = 0.0;
    double heading_deg = 0.0;
    double vertical_speed_mps = 0.0;
    double battery_j = 0.0;
    bool container_locked = false;
    bool exhausted = false;
};

struct FlightCommand {
    double horizontal_speed_mps = 0.0;
    double heading_deg = 0.0;
    double vertical_speed_mps = 0.0;
};

struct GpsProfile {
    std::string label = "neo6m";
    double sigma_m = 2.5;
    double update_period_s = 1.0;
};

struct PowerProfile {
    std::map<std::string, double> component_draw_w;
    double hover_draw_w = 70.0;
    double cruise_draw_w_per_mps = 1.5;
    double battery_capacity_j = 87'912.0;

    double component_total_w() const;
};

// Table 1 component roles, drawing illustrative idle powers.
PowerProfile default_power_profile();
GpsProfile gps_profile_by_name(const std::string& name);

void validate(const World& world);
void validate(const PowerProfile& power);
void validate(const GpsProfile& gps);

// Parses and validates the world part of a scenario document. Errors carry the
// offending JSON path in their detail.
World load_world(const nlohmann::json& scenario);

// First-order kinematics plus battery drain for one tick of world.dt_s.
DroneState step_drone(const DroneState& state, const FlightCommand& command, const World& world,
                      const DroneLimits& limits, const PowerProfile& power);

// Holds the last fix between update epochs; epochs are multiples of the period.
class GpsReceiver {
public:
    explicit GpsReceiver(GpsProfile profile, double earth_radius_m = geo::kDefaultEarthRadiusM)
        : profile_(std::move(profile)), earth_radius_m_(earth_radius_m) {}

    GeoPoint sample(const DroneState& state, Rng& rng, double now_s);

    const GpsProfile& profile() const noexcept { return profile_; }
    // North/east error of the current fix relative to the truth it was taken from.
    geo::LocalNE current_error() const noexcept { return error_; }

private:
    GpsProfile profile_;
    double earth_radius_m_;
    std::optional<long long> epoch_;
    GeoPoint fix_;
    geo::LocalNE error_{};
};

inline GeoPoint sample_gps(const DroneState& state, GpsReceiver& receiver, Rng& rng, double now_s) {
    return receiver.sample(state, rng, now_s);
}

// True altitude plus Gaussian barometer noise.
double sample_altitude(const DroneState& state, double baro_sigma_m, Rng& rng);

struct ObstacleAhead {
    Obstacle obstacle;
    double distance_m = 0.0;  // along-track distance to the footprint's nearest point, >= 0
};

// Obstacles whose circular footprint meets the corridor rectangle
// [0, look_ahead] x [-w/2, w/2] laid along the current heading, nearest first.
std::vector<ObstacleAhead> obstacles_ahead(const World& world, const DroneState& state, double look_ahead_m,
                                           double now_s = 0.0);

bool inside_footprint(const GeoPoint& p, const GeoPoint& center, double radius_m,
                      double earth_radius_m = geo::kDefaultEarthRadiusM);

}  // namespace dd::sim
