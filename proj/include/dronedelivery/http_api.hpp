#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dronedelivery/cloud.hpp"
#include "dronedelivery/error.hpp"
#include "dronedelivery/scenario.hpp"

namespace httplib {
class Server;
}

namespace dd::api {

int http_status(ErrorCode code) noexcept;
// {error, message, detail}
nlohmann::json error_envelope(const Error& e);

nlohmann::json params_to_json(const mission::MissionParams& p);

// Flies dispatched missions against the service, one thread per delivery.
// Simulated time runs `time_scale` times faster than wall time (0 = unpaced).
class MissionDriver {
public:
    MissionDriver(cloud::Service& service, scenario::Scenario scenario, std::uint64_t seed, double time_scale);
    ~MissionDriver();

    void start(const mission::MissionParams& params);
    // Cancels in-flight missions and joins their threads.
    void shutdown();
    void wait_idle();
    const scenario::Scenario& scenario() const noexcept { return scenario_; }

private:
    void fly(mission::MissionParams params);

    cloud::Service& service_;
    scenario::Scenario scenario_;
    std::uint64_t seed_;
    double time_scale_;
    std::atomic<bool> stopping_{false};
    std::mutex mu_;
    std::vector<std::thread> threads_;
    std::atomic<int> active_{0};
};

class Server {
public:
    Server(cloud::Service& service, MissionDriver* driver);
    ~Server();

    // Returns the bound port; port 0 picks a free one.
    int bind(const std::string& host, int port);
    // Blocks until stop().
    void listen();
    void stop();

private:
    void routes();

    cloud::Service& service_;
    MissionDriver* driver_;
    std::unique_ptr<httplib::Server> http_;
    std::atomic<bool> stopping_{false};
};

}  // namespace dd::api
