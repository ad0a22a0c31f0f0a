#include "dronedelivery/http_api.hpp"

#include <chrono>
#include <cstdio>

#include <httplib.h>

namespace dd::api {

using nlohmann::json;

int http_status(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::Validation: return 400;
        case ErrorCode::NotFound: return 404;
        case ErrorCode::Conflict:
        case ErrorCode::Capacity: return 409;
        case ErrorCode::UnresolvableAddress: return 422;
        case ErrorCode::Unavailable: return 503;
        case ErrorCode::Internal: return 500;
    }
    return 500;
}

json error_envelope(const Error& e) {
    return {{"error", error_code_name(e.code())}, {"message", e.what()}, {"detail", e.detail()}};
}

json params_to_json(const mission::MissionParams& p) {
    const auto& rgb = p.expected_code.rgb;
    return {{"delivery_id", p.delivery_id},
            {"destination", {{"lat", p.destination.lat()}, {"lon", p.destination.lon()}, {"alt", p.destination.alt()}}},
            {"color_code", {{"index", p.expected_code.index}, {"rgb", {rgb[0], rgb[1], rgb[2]}}}},
            {"face_image_ref", p.face_image_ref},
            {"building_id", p.building_id}};
}

// ---- MissionDriver -------------------------------------------------------------

MissionDriver::MissionDriver(cloud::Service& service, scenario::Scenario scenario, std::uint64_t seed,
                             double time_scale)
    : service_(service), scenario_(std::move(scenario)), seed_(seed), time_scale_(time_scale) {}

MissionDriver::~MissionDriver() { shutdown(); }

void MissionDriver::start(const mission::MissionParams& params) {
    std::lock_guard lock(mu_);
    if (stopping_) fail(ErrorCode::Unavailable, "mission driver is shutting down");
    ++active_;
    threads_.emplace_back([this, params] { fly(params); });
}

namespace {
struct Cancelled {};
}  // namespace

void MissionDriver::fly(mission::MissionParams params) {
    const auto started = std::chrono::steady_clock::now();
    const mission::TickObserver pace = [&](const mission::TickSnapshot& snap) {
        if (stopping_) throw Cancelled{};
        if (time_scale_ <= 0.0) return;
        std::this_thread::sleep_until(started + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                                    std::chrono::duration<double>(snap.sim_time_s / time_scale_)));
    };
    try {
        cloud::ServiceLink link(service_, true, scenario_.faults.image_unreachable_attempts);
        mission::SimServo servo(scenario_.faults.servo_failures);
        const auto& s = scenario_;
        auto result = mission::launch({params, s.config, s.world, s.equipment, s.faces, seed_}, link, servo, pace);
        link.flush();
        std::fprintf(stderr, "mission %s finished: %s\n", params.delivery_id.c_str(),
                     mission::state_label(result.final_state).c_str());
    } catch (const Cancelled&) {
        std::fprintf(stderr, "mission %s cancelled by shutdown\n", params.delivery_id.c_str());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "mission %s failed: %s\n", params.delivery_id.c_str(), e.what());
        try {
            service_.record_error(params.delivery_id, e.what());
        } catch (const std::exception&) {
        }
    }
    --active_;
}

void MissionDriver::wait_idle() {
    while (active_ > 0) std::this_thread::sleep_for(std::chrono::milliseconds(10));
}

void MissionDriver::shutdown() {
    std::vector<std::thread> threads;
    {
        std::lock_guard lock(mu_);
        stopping_ = true;
        threads.swap(threads_);
    }
    for (auto& t : threads) {
        if (t.joinable()) t.join();
    }
}

// ---- Server -------------------------------------------------------------------------

namespace {

json parse_body(const httplib::Request& req) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) fail(ErrorCode::Validation, "request body must be a JSON object");
    return body;
}

std::string required_string(const json& body, const char* key) {
    if (!body.contains(key) || !body.at(key).is_string() || body.at(key).get<std::string>().empty()) {
        fail(ErrorCode::Validation, std::string("\"") + key + "\" is required", key);
    }
    return body.at(key).get<std::string>();
}

double required_number(const json& body, const char* key) {
    if (!body.contains(key) || !body.at(key).is_number()) {
        fail(ErrorCode::Validation, std::string("\"") + key + "\" must be a number", key);
    }
    return body.at(key).get<double>();
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

json order_view(const cloud::Order& o, const cloud::UserAccount& u) {
    json j = cloud::to_json(o);
    j["color_code"] = cloud::to_json(u).at("color_code");
    return j;
}

}  // namespace

Server::Server(cloud::Service& service, MissionDriver* driver)
    : service_(service), driver_(driver), http_(std::make_unique<httplib::Server>()) {
    routes();
}

Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port) {
    if (port == 0) {
        const int p = http_->bind_to_any_port(host);
        if (p < 0) fail(ErrorCode::Unavailable, "cannot bind " + host);
        return p;
    }
    if (!http_->bind_to_port(host, port)) {
        fail(ErrorCode::Unavailable, "cannot bind " + host + ":" + std::to_string(port) + " (port in use?)");
    }
    return port;
}

void Server::listen() { http_->listen_after_bind(); }

void Server::stop() {
    stopping_ = true;
    if (http_ && http_->is_running()) http_->stop();
}

void Server::routes() {
    auto& s = *http_;
    s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const Error& e) {
            send_json(res, error_envelope(e), http_status(e.code()));
        } catch (const json::exception& e) {
            send_json(res, error_envelope(Error(ErrorCode::Validation, e.what())), 400);
        } catch (const std::exception& e) {
            send_json(res, error_envelope(Error(ErrorCode::Internal, e.what())), 500);
        }
    });

    s.Get("/health", [](const httplib::Request&, httplib::Response& res) { send_json(res, {{"ok", true}}); });

    s.Post("/users", [this](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        const std::string image = cloud::base64_decode(required_string(body, "face_image"));
        const auto user = service_.register_user(required_string(body, "name"), image,
                                                 required_string(body, "building_id"));
        send_json(res, cloud::to_json(user), 201);
    });
    s.Get(R"(/users/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, cloud::to_json(service_.get_user(req.matches[1])));
    });
    s.Delete(R"(/users/([^/]+)/face)", [this](const httplib::Request& req, httplib::Response& res) {
        service_.delete_face_image(req.matches[1]);
        res.status = 204;
    });
    s.Delete(R"(/users/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        service_.delete_user(req.matches[1]);
        res.status = 204;
    });

    s.Post("/orders", [this](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        const std::string user_id = required_string(body, "user_id");
        if (!body.contains("address")) fail(ErrorCode::Validation, "\"address\" is required", "address");
        const auto order = service_.place_order(user_id, cloud::address_from_json(body.at("address")));
        send_json(res, order_view(order, service_.get_user(user_id)), 201);
    });
    s.Get(R"(/orders/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        const auto order = service_.get_order(req.matches[1]);
        send_json(res, cloud::to_json(order));
    });

    s.Post("/dispatch", [this](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        const auto params = service_.dispatch(required_string(body, "delivery_id"), required_string(body, "operator_id"));
        json out = params_to_json(params);
        out["status"] = "Dispatched";
        out["mission_started"] = false;
        if (driver_) {
            driver_->start(params);
            out["mission_started"] = true;
        }
        send_json(res, out);
    });

    s.Post("/telemetry", [this](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        cloud::TelemetrySample sample;
        sample.delivery_id = required_string(body, "delivery_id");
        sample.t_s = required_number(body, "t");
        try {
            sample.position =
                geo::GeoPoint(required_number(body, "lat"), required_number(body, "lon"), body.value("alt", 0.0));
        } catch (const Error& e) {
            fail(ErrorCode::Validation, e.what(), "position");
        }
        sample.battery_fraction = required_number(body, "battery");
        sample.state = body.value("state", "");
        const bool stored = service_.ingest_telemetry(sample);
        res.set_header("X-Telemetry-Stored", stored ? "true" : "false");
        res.status = 204;
    });

    s.Get(R"(/track/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        std::optional<double> after;
        if (req.has_param("after")) {
            try {
                after = std::stod(req.get_param_value("after"));
            } catch (const std::exception&) {
                fail(ErrorCode::Validation, "after must be a number", "after");
            }
        }
        const auto track = service_.get_track(req.matches[1], after);
        json samples = json::array();
        for (const auto& smp : track.samples) samples.push_back(cloud::to_json(smp));
        send_json(res, {{"status", cloud::status_name(track.status)}, {"samples", samples}});
    });

    s.Get(R"(/notifications/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string user_id = req.matches[1];
        long long after = 0;
        if (req.has_param("after")) {
            try {
                after = std::stoll(req.get_param_value("after"));
            } catch (const std::exception&) {
                fail(ErrorCode::Validation, "after must be an integer", "after");
            }
        }
        const bool stream = req.get_header_value("Accept").find("text/event-stream") != std::string::npos;
        if (!stream) {
            json list = json::array();
            for (const auto& n : service_.notifications(user_id, after)) list.push_back(cloud::to_json(n));
            send_json(res, {{"notifications", list}});
            return;
        }
        service_.get_user(user_id);  // 404 before the stream starts
        auto cursor = std::make_shared<long long>(after);
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider("text/event-stream", [this, user_id, cursor](std::size_t, httplib::DataSink& sink) {
            while (!stopping_) {
                const auto batch = service_.wait_notifications(user_id, *cursor, std::chrono::milliseconds(500));
                if (batch.empty()) {
                    if (!sink.is_writable()) return false;
                    continue;
                }
                for (const auto& n : batch) {
                    const std::string frame =
                        "id: " + std::to_string(n.seq) + "\nevent: notification\ndata: " + cloud::to_json(n).dump() + "\n\n";
                    if (!sink.write(frame.data(), frame.size())) return false;
                    *cursor = n.seq;
                }
                return true;
            }
            sink.done();
            return true;
        });
    });

    s.Get(R"(/face/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        const auto img = service_.fetch_face_image(req.matches[1]);
        res.set_header("X-Content-Digest", "sha256=" + img.digest);
        res.set_content(img.bytes, "application/octet-stream");
    });

    s.Post("/status", [this](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        const auto outcome = mission::parse_outcome(required_string(body, "outcome"));
        if (!outcome) fail(ErrorCode::Validation, "unknown outcome", "outcome");
        send_json(res, cloud::to_json(service_.set_status(required_string(body, "delivery_id"), *outcome)));
    });
}

}  // namespace dd::api
