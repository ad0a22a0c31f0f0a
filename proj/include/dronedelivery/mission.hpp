#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dronedelivery/mission_log.hpp"
#include "dronedelivery/mission_state.hpp"
#include "dronedelivery/perception.hpp"
#include "dronedelivery/world.hpp"

namespace dd::mission {

using geo::GeoPoint;

enum class DoorOrder { Stored, NearestFirst };

struct MissionConfig {
    double locality_radius_m = 6.0;
    double scan_altitude_m = 2.0;
    double overpass_margin_m = 5.0;
    double cruise_altitude_m = 30.0;
    double auth_timeout_s = 600.0;
    double face_threshold = 0.8;
    double unlock_dwell_s = 30.0;
    double battery_reserve_fraction = 0.2;
    double telemetry_period_s = 1.0;

    // Controller tuning outside the delivery contract.
    double approach_speed_mps = 2.0;
    double arrival_tolerance_m = 0.05;
    DoorOrder door_order = DoorOrder::Stored;
    int image_request_attempts = 3;
    double image_retry_interval_s = 5.0;
    double max_mission_s = 6.0 * 3600.0;
};

void validate(const MissionConfig& config);

struct MissionParams {
    std::string delivery_id;
    GeoPoint destination;
    perception::ColorCode expected_code;
    std::string face_image_ref;
    std::string building_id;
};

// Hardware and sensor models carried by the drone.
struct Equipment {
    sim::DroneLimits limits;
    sim::PowerProfile power = sim::default_power_profile();
    sim::GpsProfile gps;
    perception::DetectorProfile detector;
    double baro_sigma_m = 0.3;
    std::optional<double> initial_battery_j;  // defaults to full capacity
};

// Wording of the user-facing messages.
enum class NoticeKind { AcceptDelivery, MissedDelivery, Delivered, NotDelivered };
std::string_view notice_text(NoticeKind kind) noexcept;
std::optional<NoticeKind> parse_notice(std::string_view text) noexcept;

struct ImageFetch {
    enum class Status { Ok, Unreachable, Missing };
    Status status = Status::Ok;
    std::string digest;
    std::size_t bytes = 0;
};

struct TelemetryReport {
    std::string delivery_id;
    double t_s = 0.0;
    GeoPoint position;
    double battery_fraction = 0.0;
    std::string state;
};

// The drone's view of the coordination service.
class CloudLink {
public:
    virtual ~CloudLink() = default;
    virtual void mission_launched(const std::string& delivery_id) = 0;
    virtual void notify(const std::string& delivery_id, NoticeKind kind) = 0;
    virtual ImageFetch request_face_image(const std::string& delivery_id) = 0;
    // Fire-and-forget; must not block the control tick.
    virtual void send_telemetry(const TelemetryReport& report) = 0;
    virtual void report_outcome(const std::string& delivery_id, Outcome outcome) = 0;
    virtual void report_error(const std::string& delivery_id, const std::string& reason) = 0;
};

// In-memory link for tests and offline runs. Image requests fail with
// Unreachable for the first `unreachable_attempts` calls.
class RecordingCloudLink final : public CloudLink {
public:
    void mission_launched(const std::string& delivery_id) override;
    void notify(const std::string& delivery_id, NoticeKind kind) override;
    ImageFetch request_face_image(const std::string& delivery_id) override;
    void send_telemetry(const TelemetryReport& report) override;
    void report_outcome(const std::string& delivery_id, Outcome outcome) override;
    void report_error(const std::string& delivery_id, const std::string& reason) override;

    int unreachable_attempts = 0;
    bool image_missing = false;
    std::string image_digest = "stub-digest";

    std::vector<NoticeKind> notices;
    int image_requests = 0;
    std::vector<TelemetryReport> telemetry;
    std::vector<Outcome> outcomes;
    std::vector<std::string> errors;
    int launches = 0;
};

enum class ServoCommand { Lock, Open, Close };
std::string_view servo_command_name(ServoCommand c) noexcept;

class ServoLink {
public:
    virtual ~ServoLink() = default;
    // False when the actuator did not acknowledge.
    virtual bool command(ServoCommand c) = 0;
};

// Simulated servo. Fails the listed 1-based command attempts.
class SimServo final : public ServoLink {
public:
    SimServo() = default;
    explicit SimServo(std::set<int> failing_attempts) : failing_(std::move(failing_attempts)) {}
    bool command(ServoCommand c) override;
    const std::vector<ServoCommand>& history() const noexcept { return history_; }

private:
    std::set<int> failing_;
    std::vector<ServoCommand> history_;
    int attempts_ = 0;
};

// Target altitude for clearing a detected obstacle: max(current, estimate + margin).
double plan_overpass(const perception::Detection& detection, double current_altitude_m, const MissionConfig& config);

// ---- Door scanning ---------------------------------------------------------

struct ScanOutcome {
    bool found = false;
    std::optional<std::string> door_id;
    bool image_available = false;  // found and the reference image arrived
    bool image_missing = false;    // found but the server holds no image
    bool image_unreachable = false;  // retries exhausted; reported as not found
    int scans = 0;
};

// Tick-driven door search: visits doors in order, scans each once, and on a
// match pushes "Accept Delivery" and requests the reference image.
class DoorScanner {
public:
    DoorScanner(const sim::Building& building, perception::ColorCode expected, const MissionConfig& config,
                perception::DetectorProfile profile, const GeoPoint& start);

    struct Step {
        sim::FlightCommand command;
        std::optional<ScanOutcome> done;
    };

    Step tick(const sim::DroneState& drone, Rng& rng, CloudLink& cloud, const std::string& delivery_id,
              Recorder& rec);

    const std::vector<std::string>& visit_order() const noexcept { return order_; }
    int scans() const noexcept { return scans_; }

private:
    Step finish(ScanOutcome outcome);

    const sim::Building& building_;
    perception::ColorCode expected_;
    MissionConfig config_;
    perception::DetectorProfile profile_;
    std::vector<std::string> order_;
    std::size_t next_ = 0;
    int scans_ = 0;
    std::optional<std::string> matched_door_;
    int image_attempts_ = 0;
    long long next_attempt_tick_ = 0;
};

struct ScanContext {
    const sim::World& world;
    const MissionConfig& config;
    const Equipment& equipment;
    Rng& rng;
};

// Runs a DoorScanner to completion against the simulated drone.
ScanOutcome execute_door_scan(const sim::Building& building, const perception::ColorCode& expected,
                              sim::DroneState& drone, const ScanContext& ctx, CloudLink& cloud,
                              const std::string& delivery_id, Recorder& rec);

// ---- Recipient authentication ---------------------------------------------

enum class AuthOutcome { Delivered, NotDelivered };

// Tick-driven ConfirmDelivery: timeout is checked before the face match on
// every tick, whether or not a face is present.
class Authenticator {
public:
    Authenticator(perception::FaceStream stream, const MissionConfig& config, double dt_s, long long start_tick,
                  bool reference_available);

    enum class Event { None, Unlocked, Timeout, Failed, DwellElapsed };

    Event tick(long long tick, ServoLink& servo, Recorder& rec);

    bool unlocked() const noexcept { return open_tick_.has_value(); }
    std::optional<long long> open_tick() const noexcept { return open_tick_; }

private:
    perception::FaceStream stream_;
    MissionConfig config_;
    double dt_s_;
    long long start_tick_;
    bool reference_available_;
    long long timeout_ticks_;
    long long dwell_ticks_;
    std::optional<long long> open_tick_;
};

struct AuthResult {
    AuthOutcome outcome = AuthOutcome::NotDelivered;
    double decided_at_s = 0.0;  // elapsed since the window opened
    std::optional<double> opened_at_s;
    std::optional<double> closed_at_s;
};

// Runs ConfirmDelivery on a bare clock, pushing the terminal message.
AuthResult authenticate_recipient(perception::FaceStream stream, const MissionConfig& config, double dt_s,
                                  ServoLink& servo, CloudLink& cloud, const std::string& delivery_id, Recorder& rec,
                                  bool reference_available = true);

// ---- Mission runner ---------------------------------------------------------

struct OverpassHold {
    double target_altitude_m = 0.0;
    double estimated_height_m = 0.0;
    GeoPoint center;
    double radius_m = 0.0;
};

struct TickSnapshot {
    long long tick = 0;
    double sim_time_s = 0.0;
    MissionState state;
    sim::DroneState drone;
    std::map<std::string, OverpassHold> holds;
};

using TickObserver = std::function<void(const TickSnapshot&)>;

enum class Disposition { AwaitDispatch, Charging };
std::string_view disposition_name(Disposition d) noexcept;

struct MissionResult {
    MissionLog log;
    MissionState final_state;
    bool launched = false;
    std::optional<Outcome> outcome;
    sim::DroneState final_drone;
    std::optional<Disposition> disposition;
    double delivery_duration_s = 0.0;
    double distance_flown_m = 0.0;
    double energy_used_j = 0.0;
};

struct LaunchInputs {
    const MissionParams& params;
    const MissionConfig& config;
    const sim::World& world;
    const Equipment& equipment;
    const perception::FaceStream& faces;
    std::uint64_t seed = 0;
};

// Runs the whole delivery from dispatch to a terminal state.
MissionResult launch(const LaunchInputs& inputs, CloudLink& cloud, ServoLink& servo, const TickObserver& observer = {});

}  // namespace dd::mission
