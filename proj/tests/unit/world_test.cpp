#include <cmath>
#include <fstream>
#include <random>

#include <gtest/gtest.h>
#include <json.hpp>

#include "dronedelivery/error.hpp"
#include "dronedelivery/world.hpp"
#include "oracles.hpp"

using namespace dd;
using geo::GeoPoint;
using nlohmann::json;

namespace {

json minimal_doc() {
    return json::parse(R"({
        "depot": {"lat": 10.0, "lon": 20.0},
        "buildings": [{"id": "b1", "entrance": {"lat": 10.001, "lon": 20.0},
                       "doors": [{"id": "d1", "lat": 10.00101, "lon": 20.0, "color_index": 4}]}],
        "obstacles": []
    })");
}

sim::DroneState drone_at(double lat, double lon, double alt, double battery = 50'000.0) {
    sim::DroneState s;
    s.position = GeoPoint(lat, lon, alt);
    s.battery_j = battery;
    return s;
}

}  // namespace

TEST(LoadWorld, Minimal) {
    const auto w = sim::load_world(minimal_doc());
    ASSERT_EQ(w.buildings.size(), 1u);
    ASSERT_EQ(w.buildings[0].doors.size(), 1u);
    EXPECT_EQ(w.buildings[0].doors[0].color_index, 4);
    EXPECT_TRUE(w.obstacles.empty());
    EXPECT_EQ(w.depot, GeoPoint(10, 20));
    EXPECT_NE(w.find_building("b1"), nullptr);
    EXPECT_EQ(w.find_building("b2"), nullptr);
}

TEST(LoadWorld, DuplicateDoorIdNamesTheId) {
    auto doc = minimal_doc();
    doc["buildings"][0]["doors"].push_back(doc["buildings"][0]["doors"][0]);
    try {
        sim::load_world(doc);
        FAIL() << "expected a validation error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Validation);
        EXPECT_NE(std::string(e.what()).find("d1"), std::string::npos);
        EXPECT_NE(e.detail().find("/buildings/0/doors/1"), std::string::npos);
    }
}

TEST(LoadWorld, RejectsBadFields) {
    auto doc = minimal_doc();
    doc["buildings"][0]["doors"][0]["lat"] = 95.0;
    EXPECT_THROW(sim::load_world(doc), Error);
    doc = minimal_doc();
    doc["obstacles"] = json::array({{{"id", "o"}, {"lat", 10.0}, {"lon", 20.0}, {"radius", -1}, {"height", 5}}});
    EXPECT_THROW(sim::load_world(doc), Error);
    doc = minimal_doc();
    doc.erase("depot");
    EXPECT_THROW(sim::load_world(doc), Error);
}

TEST(LoadWorld, CampusCountsMatchFile) {
    std::ifstream in(std::string(DD_SOURCE_DIR) + "/scenarios/campus.json");
    const json doc = json::parse(in);
    std::size_t doors = 0;
    for (const auto& b : doc.at("buildings")) doors += b.at("doors").size();

    const auto w = sim::load_world(doc);
    EXPECT_EQ(w.buildings.size(), doc.at("buildings").size());
    EXPECT_EQ(w.obstacles.size(), doc.at("obstacles").size());
    std::size_t loaded_doors = 0;
    for (const auto& b : w.buildings) loaded_doors += b.doors.size();
    EXPECT_EQ(loaded_doors, doors);
}

TEST(StepDrone, HoverDrainsHoverPlusComponents) {
    sim::World w;
    w.depot = GeoPoint(10, 20);
    const auto power = sim::default_power_profile();
    const auto s0 = drone_at(10, 20, 5);
    const auto s1 = sim::step_drone(s0, {}, w, {}, power);
    EXPECT_EQ(s1.position, s0.position);
    double components = 0.0;
    for (const auto& [name, watts] : power.component_draw_w) components += watts;
    EXPECT_NEAR(s0.battery_j - s1.battery_j, (power.hover_draw_w + components) * w.dt_s, 1e-9);
}

TEST(StepDrone, NorthAtMaxSpeedAlongMeridian) {
    sim::World w;
    sim::DroneLimits limits;
    auto s = drone_at(10, 20, 30);
    for (int i = 0; i < 10; ++i) {
        s = sim::step_drone(s, {limits.max_horizontal_speed_mps, 0.0, 0.0}, w, limits, sim::default_power_profile());
    }
    const double expected = limits.max_horizontal_speed_mps * 10 * w.dt_s;
    const double moved = (s.position.lat() - 10.0) * std::numbers::pi / 180.0 * geo::kDefaultEarthRadiusM;
    EXPECT_NEAR(moved / expected, 1.0, 1e-6);
    EXPECT_NEAR(s.position.lon(), 20.0, 1e-12);
    EXPECT_NEAR(geo::haversine_distance({10, 20}, s.position) / expected, 1.0, 1e-6);
}

TEST(StepDrone, CommandsAreClampedToLimits) {
    sim::World w;
    sim::DroneLimits limits{5.0, 1.0};
    const auto s = sim::step_drone(drone_at(0, 0, 0.05), {50.0, 90.0, -20.0}, w, limits, sim::default_power_profile());
    EXPECT_DOUBLE_EQ(s.horizontal_speed_mps, 5.0);
    EXPECT_EQ(s.position.alt(), 0.0);  // cannot sink below ground
}

TEST(StepDrone, EmptyBatteryFreezes) {
    sim::World w;
    const auto s0 = drone_at(10, 20, 12, 0.0);
    const auto s1 = sim::step_drone(s0, {10.0, 45.0, 1.0}, w, {}, sim::default_power_profile());
    EXPECT_EQ(s1.position, s0.position);
    EXPECT_TRUE(s1.exhausted);
    EXPECT_EQ(s1.battery_j, 0.0);
}

TEST(StepDrone, DeterministicTrajectory) {
    sim::World w;
    auto a = drone_at(10, 20, 0), b = a;
    for (int i = 0; i < 500; ++i) {
        const sim::FlightCommand c{std::fmod(i * 0.37, 10.0), std::fmod(i * 7.0, 360.0), (i % 7) - 3.0};
        a = sim::step_drone(a, c, w, {}, sim::default_power_profile());
        b = sim::step_drone(b, c, w, {}, sim::default_power_profile());
    }
    EXPECT_EQ(std::memcmp(&a.position, &b.position, sizeof a.position), 0);
    EXPECT_EQ(a.battery_j, b.battery_j);
}

TEST(Gps, ZeroSigmaIsExact) {
    sim::GpsReceiver rx({"ideal", 0.0, 1.0});
    Rng rng(1);
    const auto s = drone_at(10, 20, 30);
    EXPECT_EQ(rx.sample(s, rng, 0.0), s.position);
}

TEST(Gps, FixIsHeldWithinAnUpdatePeriod) {
    sim::GpsReceiver rx({"neo6m", 2.5, 1.0});
    Rng rng(2);
    const auto s = drone_at(10, 20, 30);
    const auto a = rx.sample(s, rng, 3.0);
    const auto b = rx.sample(drone_at(10.001, 20, 30), rng, 3.9);
    EXPECT_EQ(a, b);
    EXPECT_NE(rx.sample(s, rng, 4.0), a);
}

TEST(Gps, EmpiricalSigmaPerAxis) {
    const double sigma = 2.5;
    Rng rng = Rng::stream(42, "gps");
    const auto s = drone_at(10, 20, 30);
    double sum_n = 0, sum_e = 0, sq_n = 0, sq_e = 0;
    const int n = 10'000;
    for (int i = 0; i < n; ++i) {
        sim::GpsReceiver rx({"neo6m", sigma, 1.0});
        const auto fix = rx.sample(s, rng, 0.0);
        const auto [dn, de] = oracle::local_ne(10, 20, fix.lat(), fix.lon());
        sum_n += dn, sum_e += de, sq_n += dn * dn, sq_e += de * de;
    }
    const double sd_n = std::sqrt(sq_n / n - (sum_n / n) * (sum_n / n));
    const double sd_e = std::sqrt(sq_e / n - (sum_e / n) * (sum_e / n));
    EXPECT_NEAR(sd_n, sigma, 0.05 * sigma);
    EXPECT_NEAR(sd_e, sigma, 0.05 * sigma);
}

TEST(Baro, ZeroSigmaAndReplay) {
    Rng rng(5);
    EXPECT_EQ(sim::sample_altitude(drone_at(0, 0, 2.0), 0.0, rng), 2.0);
    EXPECT_EQ(sim::sample_altitude(drone_at(0, 0, 0.0), 0.0, rng), 0.0);
    Rng a = Rng::stream(9, "baro"), b = Rng::stream(9, "baro");
    for (int i = 0; i < 100; ++i) {
        EXPECT_EQ(sim::sample_altitude(drone_at(0, 0, 10), 0.3, a), sim::sample_altitude(drone_at(0, 0, 10), 0.3, b));
    }
}

TEST(ObstaclesAhead, EmptyWorld) {
    sim::World w;
    EXPECT_TRUE(sim::obstacles_ahead(w, drone_at(10, 20, 30), 50.0).empty());
}

TEST(ObstaclesAhead, DirectlyAheadIsFirst) {
    sim::World w;
    const GeoPoint origin(10, 20, 30);
    w.obstacles.push_back({"far", geo::offset_ne(origin, 30, 0), 1.0, 20.0, {}});
    w.obstacles.push_back({"near", geo::offset_ne(origin, 10, 0), 1.0, 20.0, {}});
    w.obstacles.push_back({"behind", geo::offset_ne(origin, -10, 0), 1.0, 20.0, {}});
    const auto hits = sim::obstacles_ahead(w, drone_at(10, 20, 30), 50.0);
    ASSERT_EQ(hits.size(), 2u);
    EXPECT_EQ(hits[0].obstacle.id, "near");
    EXPECT_EQ(hits[1].obstacle.id, "far");
}

TEST(ObstaclesAhead, MatchesSampledCorridorOnRandomFields) {
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> pos(-60, 60), rad(0.3, 6.0), heading(0, 360);
    int compared = 0;
    for (int field = 0; field < 10; ++field) {
        sim::World w;
        const GeoPoint origin(10, 20, 30);
        auto drone = drone_at(10, 20, 30);
        drone.heading_deg = heading(gen);
        for (int i = 0; i < 20; ++i) {
            w.obstacles.push_back({"o" + std::to_string(i), geo::offset_ne(origin, pos(gen), pos(gen)), rad(gen), 10.0, {}});
        }
        std::set<std::string> got;
        for (const auto& h : sim::obstacles_ahead(w, drone, 50.0)) got.insert(h.obstacle.id);
        for (const auto& o : w.obstacles) {
            const auto [n, e] = oracle::local_ne(10, 20, o.center.lat(), o.center.lon());
            const auto v = oracle::sampled_corridor_hit(n, e, o.radius_m, drone.heading_deg, 50.0, w.corridor_width_m);
            if (std::abs(v.clearance_m) < 0.05) continue;  // too close to tangent for the sampling grid
            ++compared;
            EXPECT_EQ(got.count(o.id) > 0, v.hit) << "field " << field << " obstacle " << o.id;
        }
    }
    EXPECT_GT(compared, 150);
}

TEST(Obstacle, DynamicTrackInterpolates) {
    sim::Obstacle o{"van", GeoPoint(0, 0), 2.0, 3.0, {{0.0, GeoPoint(0, 0)}, {10.0, GeoPoint(0, 0.001)}}};
    EXPECT_TRUE(o.is_dynamic());
    EXPECT_NEAR(o.center_at(5.0).lon(), 0.0005, 1e-12);
    EXPECT_EQ(o.center_at(-1.0), GeoPoint(0, 0));
    EXPECT_EQ(o.center_at(20.0), GeoPoint(0, 0.001));
}
