#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "dronedelivery/error.hpp"
#include "dronedelivery/run.hpp"
#include "dronedelivery/scenario.hpp"

using namespace dd;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scenario_path(const std::string& name) { return fs::path(DD_SOURCE_DIR) / "scenarios" / (name + ".json"); }

run::RunOutput run_named(const std::string& name, std::uint64_t seed = 42) {
    return run::run_scenario(scenario::load_scenario(scenario_path(name)), seed);
}

}  // namespace

TEST(Scenario, BundledScenariosLoad) {
    for (const auto& entry : fs::directory_iterator(fs::path(DD_SOURCE_DIR) / "scenarios")) {
        if (entry.path().extension() != ".json") continue;
        EXPECT_NO_THROW(scenario::load_scenario(entry.path())) << entry.path();
    }
}

TEST(Scenario, SetOverridesNestedValues) {
    json doc = {{"mission", {{"auth_timeout", 600}}}, {"doors", json::array({{{"id", "a"}}})}};
    scenario::apply_set(doc, "mission.auth_timeout=120");
    scenario::apply_set(doc, "mission.door_order=nearest_first");
    scenario::apply_set(doc, "doors.0.id=\"b\"");
    scenario::apply_set(doc, "face_stream=[[1, 0.9]]");
    EXPECT_EQ(doc["mission"]["auth_timeout"], 120);
    EXPECT_EQ(doc["mission"]["door_order"], "nearest_first");
    EXPECT_EQ(doc["doors"][0]["id"], "b");
    EXPECT_EQ(doc["face_stream"][0][1], 0.9);
    EXPECT_THROW(scenario::apply_set(doc, "no-equals-sign"), Error);
}

TEST(Scenario, ConfigMergePatch) {
    json doc = {{"mission", {{"auth_timeout", 600}, {"unlock_dwell", 30}}}};
    scenario::apply_config(doc, {{"mission", {{"unlock_dwell", 10}}}});
    EXPECT_EQ(doc["mission"]["auth_timeout"], 600);
    EXPECT_EQ(doc["mission"]["unlock_dwell"], 10);
}

TEST(Scenario, ErrorsNameFileAndField) {
    try {
        scenario::load_scenario(scenario_path("happy_path"), {std::nullopt, {"mission.face_threshold=1.5"}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Validation);
        EXPECT_NE(e.detail().find("happy_path.json"), std::string::npos) << e.detail();
        EXPECT_NE(std::string(e.what()).find("/mission: face_threshold"), std::string::npos) << e.what();
    }
    EXPECT_THROW(scenario::load_scenario(scenario_path("does_not_exist")), Error);
}

TEST(Scenario, ProfilesByNameOrObject) {
    EXPECT_EQ(scenario::parse_detector_profile(json("mobilenet")).label, "mobilenet");
    const auto p = scenario::parse_detector_profile({{"label", "tp-1"}, {"true_positive_prob", 1.0}});
    EXPECT_EQ(p.true_positive_prob, 1.0);
    EXPECT_EQ(scenario::parse_gps_profile(json("m8n")).label, "m8n");
    EXPECT_THROW(scenario::parse_gps_profile(json("galileo-x")), Error);
    EXPECT_THROW(scenario::parse_face_stream(json::array({json::array({1, 2, 3})})), Error);
}

TEST(Run, ExitCodesPerOutcome) {
    EXPECT_EQ(run::exit_code_for(mission::Outcome::Delivered), 0);
    EXPECT_EQ(run::exit_code_for(mission::Outcome::NotDelivered), 10);
    EXPECT_EQ(run::exit_code_for(mission::Outcome::MissedDelivery), 11);
    EXPECT_EQ(run::exit_code_for(mission::Outcome::Aborted), 12);
    EXPECT_EQ(run::exit_code_for(std::nullopt), 13);
}

TEST(Run, BundledOutcomes) {
    EXPECT_EQ(run_named("happy_path").report.exit_status, 0);
    EXPECT_EQ(run_named("below_threshold").report.exit_status, 10);
    EXPECT_EQ(run_named("no_match").report.exit_status, 11);
    EXPECT_EQ(run_named("boundary_face").report.exit_status, 0);
}

TEST(Run, ReportRecomputableFromLog) {
    for (const char* name : {"happy_path", "below_threshold", "no_match", "obstacle_rich"}) {
        const auto out = run_named(name);
        const auto reparsed = mission::MissionLog::from_ndjson(out.log.to_ndjson());
        EXPECT_EQ(run::to_json(run::report_from_log(reparsed, name, 42)).dump(), run::to_json(out.report).dump());
    }
}

TEST(Run, UnresolvableAddressNeverLaunches) {
    auto s = scenario::load_scenario(scenario_path("happy_path"), {std::nullopt, {"order.address=Atlantis"}});
    const auto out = run::run_scenario(s, 42);
    EXPECT_FALSE(out.report.launched);
    EXPECT_EQ(out.report.exit_status, run::exit_code::kNotLaunched);
    ASSERT_EQ(out.log.size(), 1u);
    EXPECT_EQ(out.log.events()[0].kind, "preflight_failed");
}

TEST(Run, DeliveryDurationCountsToDecision) {
    const auto out = run_named("below_threshold");
    double matched = -1;
    for (const auto* e : out.log.of_kind("state_transition")) {
        if (e->payload.at("trigger") == "DoorMatched") matched = e->sim_time_s;
    }
    ASSERT_GE(matched, 0.0);
    EXPECT_NEAR(out.report.delivery_duration_s - matched, 600.0, 1e-9);
}

TEST(Sweep, GridParsing) {
    const auto g = run::parse_grid({{"detector_profiles", {"mobilenet"}}, {"seed_count", 3}, {"seed_start", 5}});
    EXPECT_EQ(g.seeds, (std::vector<std::uint64_t>{5, 6, 7}));
    EXPECT_THROW(run::parse_grid(json::object()), Error);
    EXPECT_THROW(run::parse_grid({{"detector_profiles", json::array()}}), Error);
    EXPECT_THROW(run::parse_grid({{"gps_profiles", {"neo6m"}}, {"seeds", json::array()}}), Error);
}

TEST(Sweep, SixtyRowsForThreeByTwoByTen) {
    const auto doc = scenario::read_document(scenario_path("campus"));
    std::ifstream in(fs::path(DD_SOURCE_DIR) / "scenarios/grids/models_gps.json");
    const auto result = run::sweep(doc, "campus", run::parse_grid(json::parse(in)));
    EXPECT_EQ(result.rows.size(), 60u);
    ASSERT_EQ(result.summary.size(), 6u);
    for (const auto& s : result.summary) {
        EXPECT_EQ(s.runs, 10);
        EXPECT_DOUBLE_EQ(s.success_rate, s.delivered / 10.0);
    }
}

TEST(Sweep, SingleCellEqualsRun) {
    const auto doc = scenario::read_document(scenario_path("happy_path"));
    const auto result = run::sweep(doc, "happy_path", run::parse_grid({{"detector_profiles", {"yolov4-tiny"}}, {"seeds", {42}}}));
    ASSERT_EQ(result.rows.size(), 1u);
    const auto direct = run_named("happy_path");
    EXPECT_EQ(run::to_json(result.rows[0].report).dump(), run::to_json(direct.report).dump());
    ASSERT_TRUE(result.summary[0].mean_delivery_time_s);
    EXPECT_EQ(*result.summary[0].mean_delivery_time_s, direct.report.delivery_duration_s);
    EXPECT_EQ(result.summary[0].mean_energy_j, direct.report.energy_used_j);
}

TEST(Sweep, PerfectDetectorBeatsBlindOne) {
    const auto doc = scenario::read_document(scenario_path("obstacle_rich"));
    std::ifstream in(fs::path(DD_SOURCE_DIR) / "scenarios/grids/detector_tp.json");
    const auto result = run::sweep(doc, "obstacle_rich", run::parse_grid(json::parse(in)));
    ASSERT_EQ(result.summary.size(), 2u);
    EXPECT_GT(result.summary[0].success_rate, result.summary[1].success_rate);
}

TEST(Sweep, TableHasOneLinePerCell) {
    std::vector<run::SweepSummary> s(3);
    const auto table = run::format_table(s);
    EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 4);
}
