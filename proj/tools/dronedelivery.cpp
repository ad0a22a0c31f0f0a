// dronedelivery: run scenarios, sweep profiles, serve the cloud API, and
// talk to a running service from the depot or as a recipient.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "dronedelivery/cloud.hpp"
#include "dronedelivery/error.hpp"
#include "dronedelivery/http_api.hpp"
#include "dronedelivery/run.hpp"
#include "dronedelivery/scenario.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
namespace ec = dd::run::exit_code;

namespace {

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) dd::fail(dd::ErrorCode::Unavailable, "cannot write " + path.string());
    out << content;
}

struct ScenarioArgs {
    std::string scenario;
    std::string config;
    std::vector<std::string> sets;

    dd::scenario::Overrides overrides() const {
        dd::scenario::Overrides o;
        if (!config.empty()) o.config = config;
        o.sets = sets;
        return o;
    }
};

void add_scenario_flags(CLI::App* cmd, ScenarioArgs& a) {
    cmd->add_option("--scenario", a.scenario, "scenario file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--config", a.config, "JSON merge patch applied to the scenario")->check(CLI::ExistingFile);
    cmd->add_option("--set", a.sets, "override, e.g. mission.face_threshold=0.9")->take_all();
}

int cmd_run(const ScenarioArgs& a, std::uint64_t seed, const std::string& out_dir) {
    const auto scenario = dd::scenario::load_scenario(a.scenario, a.overrides());
    const auto out = dd::run::run_scenario(scenario, seed);
    const auto report = dd::run::to_json(out.report);
    if (!out_dir.empty()) {
        write_file(fs::path(out_dir) / "mission_log.ndjson", out.log.to_ndjson());
        write_file(fs::path(out_dir) / "run_report.json", report.dump(2) + "\n");
    }
    std::cout << report.dump(2) << "\n";
    return out.report.exit_status;
}

int cmd_sweep(const ScenarioArgs& a, const std::string& grid_path, const std::string& out_dir) {
    json doc = dd::scenario::read_document(a.scenario);
    const auto ov = a.overrides();
    if (ov.config) dd::scenario::apply_config(doc, dd::scenario::read_document(*ov.config));
    for (const auto& s : ov.sets) dd::scenario::apply_set(doc, s);
    const auto grid = dd::run::parse_grid(dd::scenario::read_document(grid_path));
    const auto result = dd::run::sweep(doc, doc.value("name", fs::path(a.scenario).stem().string()), grid);

    std::cout << dd::run::format_table(result.summary);
    if (!out_dir.empty()) {
        std::string rows;
        for (const auto& r : result.rows) rows += dd::run::to_json(r).dump() + "\n";
        write_file(fs::path(out_dir) / "sweep_rows.ndjson", rows);
        nlohmann::ordered_json summary = nlohmann::ordered_json::array();
        for (const auto& s : result.summary) summary.push_back(dd::run::to_json(s));
        write_file(fs::path(out_dir) / "sweep_summary.json", summary.dump(2) + "\n");
    }
    return 0;
}

struct ServeArgs {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string data_dir = "data";
    std::string geocode_mode = "fixture";
    std::string fixtures;
    std::string scenario;
    std::uint64_t seed = 42;
    double time_scale = 1.0;
    double rate_limit = 1.0;
    std::string nominatim_url = "https://nominatim.openstreetmap.org";
    std::string port_file;
};

int cmd_serve(const ServeArgs& a) {
    // Signals are taken synchronously by a watcher thread.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    std::optional<dd::scenario::Scenario> scenario;
    if (!a.scenario.empty()) scenario = dd::scenario::load_scenario(a.scenario);

    dd::geo::FixtureTable fixtures;
    if (scenario) fixtures = scenario->geocode_fixtures;
    if (!a.fixtures.empty()) {
        for (auto& [k, v] : dd::geo::load_fixture_table(a.fixtures)) fixtures.insert_or_assign(k, v);
    }
    auto geocoder = dd::geo::parse_geocode_mode(a.geocode_mode) == dd::geo::GeocodeMode::Live
                        ? dd::geo::GeocodeProvider::live(
                              std::make_shared<dd::geo::NominatimBackend>(dd::geo::NominatimOptions{a.nominatim_url}),
                              dd::geo::RateLimit{a.rate_limit})
                        : dd::geo::GeocodeProvider::fixture(std::move(fixtures));

    dd::cloud::ServiceOptions opts;
    opts.data_dir = fs::path(a.data_dir);
    if (scenario) {
        for (const auto& b : scenario->world.buildings) opts.buildings.insert(b.id);
    }
    dd::cloud::Service service(opts, std::move(geocoder));

    std::unique_ptr<dd::api::MissionDriver> driver;
    if (scenario) driver = std::make_unique<dd::api::MissionDriver>(service, *scenario, a.seed, a.time_scale);
    dd::api::Server server(service, driver.get());
    const int port = server.bind(a.host, a.port);
    if (!a.port_file.empty()) write_file(a.port_file, std::to_string(port) + "\n");
    std::fprintf(stderr, "listening on %s:%d (data dir %s)\n", a.host.c_str(), port, a.data_dir.c_str());

    std::thread watcher([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        std::fprintf(stderr, "signal %d, shutting down\n", sig);
        server.stop();
    });
    server.listen();
    if (driver) driver->shutdown();
    // Wake the watcher if listen() returned for another reason.
    pthread_kill(watcher.native_handle(), SIGTERM);
    watcher.join();
    return 0;
}

// Prints the response body; API errors come back as the envelope, verbatim.
int client_call(const std::string& server, const std::string& path, const json& body,
                const std::function<void(const json&)>& on_ok) {
    httplib::Client client(server);
    client.set_connection_timeout(5);
    client.set_read_timeout(30);
    auto res = client.Post(path, body.dump(), "application/json");
    if (!res) {
        std::cerr << "cannot reach " << server << ": " << httplib::to_string(res.error()) << "\n";
        return ec::kFailure;
    }
    if (res->status >= 300) {
        std::cerr << res->body << "\n";
        return ec::kApiError;
    }
    on_ok(json::parse(res->body));
    return 0;
}

std::string rgb_hex(const json& rgb) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02X%02X%02X", rgb[0].get<int>(), rgb[1].get<int>(), rgb[2].get<int>());
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Drone last-mile delivery simulator and coordination service"};
    app.require_subcommand(1);

    ScenarioArgs run_args;
    std::uint64_t run_seed = 42;
    std::string run_out;
    auto* run = app.add_subcommand("run", "fly one scenario deterministically");
    add_scenario_flags(run, run_args);
    run->add_option("--seed", run_seed, "random seed");
    run->add_option("--out", run_out, "directory for mission_log.ndjson and run_report.json");

    ScenarioArgs sweep_args;
    std::string grid;
    std::string sweep_out;
    auto* sweep = app.add_subcommand("sweep", "run a detector/GPS profile grid");
    add_scenario_flags(sweep, sweep_args);
    sweep->add_option("--grid", grid, "grid file")->required()->check(CLI::ExistingFile);
    sweep->add_option("--out", sweep_out, "directory for sweep_rows.ndjson and sweep_summary.json");

    ServeArgs serve_args;
    auto* serve = app.add_subcommand("serve", "run the cloud HTTP API and the mission driver");
    serve->add_option("--host", serve_args.host, "listen address");
    serve->add_option("--port", serve_args.port, "listen port (0 picks one)");
    serve->add_option("--data-dir", serve_args.data_dir, "event log directory");
    serve->add_option("--geocode-mode", serve_args.geocode_mode, "live or fixture")
        ->check(CLI::IsMember({"live", "fixture"}));
    serve->add_option("--fixtures", serve_args.fixtures, "geocode fixture table")->check(CLI::ExistingFile);
    serve->add_option("--scenario", serve_args.scenario, "world and equipment for dispatched missions")
        ->check(CLI::ExistingFile);
    serve->add_option("--seed", serve_args.seed, "random seed for dispatched missions");
    serve->add_option("--time-scale", serve_args.time_scale, "simulated seconds per wall second (0 = unpaced)");
    serve->add_option("--rate-limit", serve_args.rate_limit, "live geocoder requests per second");
    serve->add_option("--nominatim-url", serve_args.nominatim_url, "live geocoder base URL");
    serve->add_option("--port-file", serve_args.port_file, "write the bound port here");

    std::string server = "http://127.0.0.1:8080";
    std::string delivery_id;
    std::string operator_id = "depot";
    auto* depot = app.add_subcommand("depot", "dispatch a delivery by id");
    depot->add_option("delivery_id", delivery_id, "delivery id")->required();
    depot->add_option("--server", server, "service URL");
    depot->add_option("--operator", operator_id, "operator id");

    std::string user_id;
    std::string address;
    auto* order = app.add_subcommand("order", "place an order for a registered user");
    order->add_option("--user", user_id, "user id")->required();
    order->add_option("--address", address, "delivery address")->required();
    order->add_option("--server", server, "service URL");

    std::string name;
    std::string building;
    std::string face;
    auto* reg = app.add_subcommand("register", "create a recipient account");
    reg->add_option("--name", name, "display name")->required();
    reg->add_option("--building", building, "building id")->required();
    reg->add_option("--face", face, "reference face image")->required()->check(CLI::ExistingFile);
    reg->add_option("--server", server, "service URL");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : ec::kUsage;
    }

    try {
        if (*run) return cmd_run(run_args, run_seed, run_out);
        if (*sweep) return cmd_sweep(sweep_args, grid, sweep_out);
        if (*serve) return cmd_serve(serve_args);
        if (*depot) {
            return client_call(server, "/dispatch", {{"delivery_id", delivery_id}, {"operator_id", operator_id}},
                               [](const json& p) {
                                   std::cout << "dispatched " << p.at("delivery_id").get<std::string>() << " to building "
                                             << p.at("building_id").get<std::string>() << " (color code "
                                             << p.at("color_code").at("index") << ")\n";
                               });
        }
        if (*order) {
            return client_call(server, "/orders", {{"user_id", user_id}, {"address", address}}, [](const json& o) {
                std::cout << "delivery id: " << o.at("delivery_id").get<std::string>() << "\n"
                          << "status: " << o.at("status").get<std::string>() << "\n"
                          << "color code: " << o.at("color_code").at("index") << " "
                          << rgb_hex(o.at("color_code").at("rgb")) << "\n";
            });
        }
        if (*reg) {
            std::ifstream in(face, std::ios::binary);
            const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
            return client_call(server, "/users",
                               {{"name", name}, {"building_id", building}, {"face_image", dd::cloud::base64_encode(bytes)}},
                               [](const json& u) {
                                   std::cout << "user id: " << u.at("user_id").get<std::string>() << "\n"
                                             << "color code: " << u.at("color_code").at("index") << " "
                                             << rgb_hex(u.at("color_code").at("rgb")) << "\n";
                               });
        }
    } catch (const dd::Error& e) {
        std::cerr << "error (" << dd::error_code_name(e.code()) << "): " << e.what();
        if (!e.detail().empty()) std::cerr << " [" << e.detail() << "]";
        std::cerr << "\n";
        return ec::kFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return ec::kFailure;
    }
    return ec::kUsage;
}
