#include <random>

#include <gtest/gtest.h>

#include "dronedelivery/error.hpp"
#include "dronedelivery/mission.hpp"
#include "dronedelivery/run.hpp"
#include "dronedelivery/scenario.hpp"
#include "oracles.hpp"

using namespace dd;
using namespace dd::mission;
using geo::GeoPoint;
using nlohmann::json;

namespace {

std::vector<std::string> notice_texts(const std::vector<NoticeKind>& kinds) {
    std::vector<std::string> out;
    for (auto k : kinds) out.emplace_back(notice_text(k));
    return out;
}

perception::DetectorProfile perfect_reader() {
    perception::DetectorProfile p;
    p.true_positive_prob = 1.0;
    p.misread_rate = 0.0;
    p.false_positive_per_min = 0.0;
    return p;
}

// Doors 4 m apart heading east from the entrance; door i shows colors[i].
sim::Building row_of_doors(const std::vector<std::optional<int>>& colors) {
    sim::Building b;
    b.id = "row";
    b.entrance = GeoPoint(10, 20);
    for (std::size_t i = 0; i < colors.size(); ++i) {
        b.doors.push_back({"door-" + std::to_string(i + 1), geo::offset_ne(b.entrance, 1.0, 4.0 * i), colors[i]});
    }
    return b;
}

struct ScanRun {
    ScanOutcome outcome;
    MissionLog log;
    RecordingCloudLink cloud;
};

ScanRun scan(const sim::Building& b, int expected_index, int unreachable = 0, bool missing = false) {
    ScanRun r;
    r.cloud.unreachable_attempts = unreachable;
    r.cloud.image_missing = missing;
    sim::World world;
    MissionConfig config;
    Equipment eq;
    eq.detector = perfect_reader();
    Rng rng(1);
    sim::DroneState drone;
    drone.position = b.entrance.with_alt(config.scan_altitude_m);
    drone.battery_j = 80'000.0;
    Recorder rec(r.log, world.dt_s);
    r.outcome = execute_door_scan(b, perception::Palette::default16().code(expected_index), drone,
                                  {world, config, eq, rng}, r.cloud, "D1", rec);
    return r;
}

struct AuthRun {
    AuthResult result;
    MissionLog log;
    RecordingCloudLink cloud;
    SimServo servo;
};

AuthRun auth(std::vector<perception::FaceSample> samples, std::set<int> servo_failures = {}, bool reference = true) {
    AuthRun r;
    r.servo = SimServo(std::move(servo_failures));
    Recorder rec(r.log, 0.1);
    r.result = authenticate_recipient(perception::FaceStream(std::move(samples)), MissionConfig{}, 0.1, r.servo,
                                      r.cloud, "D1", rec, reference);
    return r;
}

json scenario_doc(const std::string& name) {
    return scenario::read_document(std::string(DD_SOURCE_DIR) + "/scenarios/" + name + ".json");
}

run::RunOutput run_doc(json doc, const std::vector<std::string>& sets = {}, std::uint64_t seed = 42,
                       const TickObserver& observer = {}) {
    for (const auto& s : sets) scenario::apply_set(doc, s);
    return run::run_scenario(scenario::parse_scenario(doc), seed, observer);
}

std::vector<const MissionEvent*> servo_events(const MissionLog& log, const std::string& command) {
    std::vector<const MissionEvent*> out;
    for (const auto* e : log.of_kind(event_kind::kServoCommand)) {
        if (e->payload.at("command") == command) out.push_back(e);
    }
    return out;
}

}  // namespace

TEST(Config, DefaultsValidateAndBadValuesFail) {
    EXPECT_NO_THROW(validate(MissionConfig{}));
    MissionConfig c;
    c.face_threshold = 0.0;
    EXPECT_THROW(validate(c), Error);
    c = {};
    c.battery_reserve_fraction = 1.0;
    EXPECT_THROW(validate(c), Error);
    c = {};
    c.locality_radius_m = -1;
    EXPECT_THROW(validate(c), Error);
}

TEST(Overpass, Examples) {
    perception::Detection d;
    d.estimated_height_m = 10.0;
    EXPECT_EQ(plan_overpass(d, 8.0, MissionConfig{}), 15.0);
    d.estimated_height_m = 1.0;
    EXPECT_EQ(plan_overpass(d, 30.0, MissionConfig{}), 30.0);
}

TEST(Overpass, MarginAlwaysKept) {
    std::mt19937_64 gen(42);
    std::uniform_real_distribution<double> h(0.0, 120.0), cur(0.0, 150.0);
    const MissionConfig config;
    for (int i = 0; i < 1000; ++i) {
        perception::Detection d;
        d.estimated_height_m = h(gen);
        const double c = cur(gen);
        const double target = plan_overpass(d, c, config);
        EXPECT_GE(target, d.estimated_height_m + config.overpass_margin_m);
        EXPECT_GE(target, c);
    }
}

TEST(Servo, FailsListedAttempts) {
    SimServo servo({2});
    EXPECT_TRUE(servo.command(ServoCommand::Lock));
    EXPECT_FALSE(servo.command(ServoCommand::Open));
    EXPECT_TRUE(servo.command(ServoCommand::Open));
    // Only acknowledged commands reach the actuator.
    EXPECT_EQ(servo.history(), (std::vector<ServoCommand>{ServoCommand::Lock, ServoCommand::Open}));
}

TEST(DoorScan, SecondOfThreeMatches) {
    const auto r = scan(row_of_doors({4, 9, 2}), 9);
    EXPECT_TRUE(r.outcome.found);
    EXPECT_EQ(r.outcome.door_id, "door-2");
    EXPECT_TRUE(r.outcome.image_available);
    EXPECT_EQ(r.log.of_kind(event_kind::kDoorScanned).size(), 2u);
    EXPECT_EQ(notice_texts(r.cloud.notices), std::vector<std::string>{"Accept Delivery"});
    EXPECT_EQ(r.cloud.image_requests, 1);
}

TEST(DoorScan, SingleBlankDoorIsMissed) {
    const auto r = scan(row_of_doors({std::nullopt}), 0);
    EXPECT_FALSE(r.outcome.found);
    EXPECT_EQ(r.outcome.scans, 1);
    EXPECT_EQ(notice_texts(r.cloud.notices), std::vector<std::string>{"Missed delivery"});
    EXPECT_EQ(r.cloud.image_requests, 0);
}

TEST(DoorScan, EveryDoorCountAndMatchPosition) {
    for (int n = 1; n <= 8; ++n) {
        for (int k = 0; k <= n; ++k) {  // k == 0: no door matches
            std::vector<std::optional<int>> colors;
            for (int i = 1; i <= n; ++i) colors.push_back(i == k ? 15 : i % 15);
            const auto r = scan(row_of_doors(colors), 15);
            const auto want = oracle::expected_scan(n, k ? std::optional<int>(k) : std::nullopt);
            EXPECT_EQ(r.outcome.scans, want.scans) << n << "/" << k;
            EXPECT_EQ(static_cast<int>(r.log.of_kind(event_kind::kDoorScanned).size()), want.scans);
            EXPECT_EQ(notice_texts(r.cloud.notices), want.notices) << n << "/" << k;
        }
    }
}

TEST(DoorScan, ImageRetriedUntilReachable) {
    const auto r = scan(row_of_doors({1}), 1, 2);
    EXPECT_TRUE(r.outcome.image_available);
    EXPECT_EQ(r.cloud.image_requests, 3);
    const auto reqs = r.log.of_kind(event_kind::kImageRequested);
    ASSERT_EQ(reqs.size(), 3u);
    EXPECT_NEAR(reqs[1]->sim_time_s - reqs[0]->sim_time_s, 5.0, 1e-9);
    EXPECT_NEAR(reqs[2]->sim_time_s - reqs[1]->sim_time_s, 5.0, 1e-9);
}

TEST(DoorScan, ImageUnreachableBecomesMissed) {
    const auto r = scan(row_of_doors({1}), 1, 3);
    EXPECT_FALSE(r.outcome.found);
    EXPECT_TRUE(r.outcome.image_unreachable);
    EXPECT_EQ(r.cloud.image_requests, 3);
    EXPECT_EQ(r.log.of_kind(event_kind::kImageRequestFailed).size(), 1u);
    EXPECT_EQ(notice_texts(r.cloud.notices), (std::vector<std::string>{"Accept Delivery", "Missed delivery"}));
}

TEST(DoorScan, MissingImageFlagged) {
    const auto r = scan(row_of_doors({1}), 1, 0, true);
    EXPECT_TRUE(r.outcome.found);
    EXPECT_TRUE(r.outcome.image_missing);
    EXPECT_FALSE(r.outcome.image_available);
}

TEST(DoorScan, NearestFirstVisitsClosestDoor) {
    MissionConfig config;
    config.door_order = DoorOrder::NearestFirst;
    const auto b = row_of_doors({1, 2, 3});
    DoorScanner s(b, perception::Palette::default16().code(1), config, perfect_reader(), b.doors[2].position);
    EXPECT_EQ(s.visit_order(), (std::vector<std::string>{"door-3", "door-2", "door-1"}));
}

TEST(Authenticate, StrongFaceUnlocksForThirtySeconds) {
    const auto r = auth({{20.0, 0.95}});
    EXPECT_EQ(r.result.outcome, AuthOutcome::Delivered);
    ASSERT_TRUE(r.result.opened_at_s && r.result.closed_at_s);
    EXPECT_NEAR(*r.result.opened_at_s, 20.0, 0.1 + 1e-9);
    EXPECT_NEAR(*r.result.closed_at_s - *r.result.opened_at_s, 30.0, 1e-9);
    const auto opens = servo_events(r.log, "open"), closes = servo_events(r.log, "close");
    ASSERT_EQ(opens.size(), 1u);
    ASSERT_EQ(closes.size(), 1u);
    EXPECT_EQ(closes[0]->tick - opens[0]->tick, 300);
    EXPECT_EQ(notice_texts(r.cloud.notices), std::vector<std::string>{"Delivered"});
}

TEST(Authenticate, WeakFacesTimeOutAtSixHundredSeconds) {
    const auto r = auth({{50.0, 0.79}, {100.0, 0.5}});
    EXPECT_EQ(r.result.outcome, AuthOutcome::NotDelivered);
    EXPECT_DOUBLE_EQ(r.result.decided_at_s, 600.0);
    EXPECT_TRUE(r.servo.history().empty());
    EXPECT_EQ(notice_texts(r.cloud.notices), std::vector<std::string>{"Not delivered"});
    EXPECT_EQ(r.log.of_kind("face_sample").size(), 2u);
}

TEST(Authenticate, ThresholdIsInclusive) {
    EXPECT_EQ(auth({{10.0, 0.8}}).result.outcome, AuthOutcome::Delivered);
}

TEST(Authenticate, TimeoutCheckedBeforeMatch) {
    const auto r = auth({{600.0, 0.99}});
    EXPECT_EQ(r.result.outcome, AuthOutcome::NotDelivered);
    EXPECT_TRUE(r.servo.history().empty());
}

TEST(Authenticate, ServoRetriedOnce) {
    const auto ok = auth({{5.0, 0.9}}, {1});
    EXPECT_EQ(ok.result.outcome, AuthOutcome::Delivered);
    EXPECT_EQ(ok.log.of_kind(event_kind::kServoFault).size(), 1u);

    const auto bad = auth({{5.0, 0.9}}, {1, 2});
    EXPECT_EQ(bad.result.outcome, AuthOutcome::NotDelivered);
    EXPECT_EQ(bad.log.of_kind(event_kind::kServoFault).size(), 2u);
    EXPECT_TRUE(servo_events(bad.log, "open").empty());
}

TEST(Authenticate, NoReferenceImageFails) {
    const auto r = auth({{5.0, 0.99}}, {}, false);
    EXPECT_EQ(r.result.outcome, AuthOutcome::NotDelivered);
    EXPECT_TRUE(r.servo.history().empty());
}

TEST(Launch, HappyPathDeliversAndComesHome) {
    const auto doc = scenario_doc("happy_path");
    const auto out = run_doc(doc);
    EXPECT_EQ(out.report.outcome, Outcome::Delivered);
    EXPECT_EQ(out.report.notifications, (std::vector<std::string>{"Accept Delivery", "Delivered"}));
    EXPECT_EQ(out.report.disposition, "AwaitDispatch");
    const auto opens = servo_events(out.log, "open"), closes = servo_events(out.log, "close");
    ASSERT_EQ(opens.size(), 1u);
    ASSERT_EQ(closes.size(), 1u);
    EXPECT_NEAR(closes[0]->sim_time_s - opens[0]->sim_time_s, 30.0, 1e-9);

    const auto& closed = out.log.events().back();
    ASSERT_EQ(closed.kind, event_kind::kMissionClosed);
    const auto& fp = closed.payload.at("final_position");
    const GeoPoint home(fp.at("lat").get<double>(), fp.at("lon").get<double>());
    EXPECT_LT(geo::haversine_distance(home, GeoPoint(doc["depot"]["lat"].get<double>(), doc["depot"]["lon"].get<double>())),
              0.1);
    EXPECT_EQ(fp.at("alt").get<double>(), 0.0);
    EXPECT_NO_THROW(replay_transitions(out.log));
}

TEST(Launch, SameSeedSameLog) {
    const auto doc = scenario_doc("obstacle_rich");
    EXPECT_EQ(run_doc(doc).log.to_ndjson(), run_doc(doc).log.to_ndjson());
    EXPECT_NE(run_doc(doc, {}, 1).log.to_ndjson(), run_doc(doc, {}, 2).log.to_ndjson());
}

TEST(Launch, NoMatchingDoorIsMissed) {
    const auto out = run_doc(scenario_doc("no_match"));
    EXPECT_EQ(out.report.outcome, Outcome::MissedDelivery);
    EXPECT_TRUE(servo_events(out.log, "open").empty());
    EXPECT_TRUE(servo_events(out.log, "close").empty());
    EXPECT_EQ(out.report.notifications, std::vector<std::string>{"Missed delivery"});
}

TEST(Launch, LowBatteryNeverLeaves) {
    const auto out = run_doc(scenario_doc("happy_path"), {"drone.initial_battery_fraction=0.15"});
    EXPECT_FALSE(out.report.launched);
    EXPECT_FALSE(out.report.outcome);
    EXPECT_EQ(out.log.of_kind(event_kind::kStateTransition).size(), 0u);
    const auto pre = out.log.of_kind(event_kind::kPreflightFailed);
    ASSERT_EQ(pre.size(), 1u);
    EXPECT_EQ(pre[0]->payload.at("reason"), "insufficient_battery");
}

TEST(Launch, LockFailureReturnsToAwaitDispatch) {
    const auto out = run_doc(scenario_doc("happy_path"), {"drone.servo_failures=[1,2]"});
    EXPECT_FALSE(out.report.launched);
    const auto seq = replay_transitions(out.log);
    ASSERT_EQ(seq.size(), 3u);
    EXPECT_EQ(seq.back().phase, Phase::AwaitDispatch);
}

TEST(Launch, ReserveCrossingAbortsAndCharges) {
    const auto out = run_doc(scenario_doc("obstacle_rich"), {"drone.initial_battery_fraction=0.205"});
    EXPECT_TRUE(out.report.launched);
    EXPECT_EQ(out.report.outcome, Outcome::Aborted);
    EXPECT_EQ(out.report.disposition, "Charging");
    bool reserve = false;
    for (const auto* e : out.log.of_kind(event_kind::kStateTransition)) reserve |= e->payload.at("trigger") == "ReserveReached";
    EXPECT_TRUE(reserve);
    EXPECT_EQ(out.report.notifications, std::vector<std::string>{"Not delivered"});
}

TEST(Launch, ArrivalAboveReserveAwaitsDispatch) {
    const auto out = run_doc(scenario_doc("happy_path"), {"drone.initial_battery_fraction=0.5"});
    EXPECT_EQ(out.report.outcome, Outcome::Delivered);
    EXPECT_EQ(out.report.disposition, "AwaitDispatch");
    const auto arrival = out.log.of_kind(event_kind::kDepotArrival);
    ASSERT_EQ(arrival.size(), 1u);
    EXPECT_GE(arrival[0]->payload.at("battery_fraction").get<double>(), 0.2);
}

TEST(Launch, MissingImageMeansNotDelivered) {
    const auto out = run_doc(scenario_doc("happy_path"), {"cloud.image_missing=true"});
    EXPECT_EQ(out.report.outcome, Outcome::NotDelivered);
    EXPECT_TRUE(servo_events(out.log, "open").empty());
}

TEST(Launch, OverpassHoldsOnBothLegs) {
    // Every tick spent inside a hold footprint keeps the margin over the estimate.
    int inside_ticks = 0;
    bool returning_inside = false;
    const TickObserver check = [&](const TickSnapshot& snap) {
        for (const auto& [id, hold] : snap.holds) {
            if (geo::haversine_distance(snap.drone.position, hold.center) > hold.radius_m) continue;
            ++inside_ticks;
            returning_inside |= snap.state.phase == Phase::ReturningToDepot;
            EXPECT_GE(snap.drone.position.alt(), hold.estimated_height_m + 5.0 - 1e-9) << id << " tick " << snap.tick;
        }
    };
    const auto out = run_doc(scenario_doc("obstacle_rich"), {}, 42, check);
    EXPECT_EQ(out.report.outcome, Outcome::Delivered);
    EXPECT_GT(inside_ticks, 0);
    EXPECT_TRUE(returning_inside);
}

TEST(Launch, DescentOnlyInsideGeofence) {
    const auto doc = scenario_doc("geofence");
    const auto out = run_doc(doc);
    const auto& dest = out.log.of_kind(event_kind::kMissionStarted).at(0)->payload.at("destination");
    const GeoPoint target(dest.at("lat").get<double>(), dest.at("lon").get<double>());
    int descents = 0;
    for (const auto* e : out.log.of_kind(event_kind::kStateTransition)) {
        if (e->payload.at("to") != "Descending") continue;
        ++descents;
        const auto& p = e->payload.at("position");
        EXPECT_TRUE(geo::within_radius({p.at("lat").get<double>(), p.at("lon").get<double>()}, target, 6.0));
    }
    EXPECT_EQ(descents, 1);
}

TEST(Launch, TelemetryAtConfiguredPeriod) {
    const auto out = run_doc(scenario_doc("happy_path"));
    const auto t = out.log.of_kind(event_kind::kTelemetrySent);
    ASSERT_GT(t.size(), 10u);
    for (std::size_t i = 1; i < t.size(); ++i) EXPECT_EQ((t[i]->tick - t[0]->tick) % 10, 0);
}
