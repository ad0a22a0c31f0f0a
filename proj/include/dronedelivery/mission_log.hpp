#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dronedelivery/mission_state.hpp"

namespace dd::mission {

using ojson = nlohmann::ordered_json;

namespace event_kind {
inline constexpr std::string_view kStateTransition = "state_transition";
inline constexpr std::string_view kNotificationPushed = "notification_pushed";
inline constexpr std::string_view kServoCommand = "servo_command";
inline constexpr std::string_view kServoFault = "servo_fault";
inline constexpr std::string_view kTelemetrySent = "telemetry_sent";
inline constexpr std::string_view kDetectionHandled = "detection_handled";
inline constexpr std::string_view kDoorScanned = "door_scanned";
inline constexpr std::string_view kImageRequested = "image_requested";
inline constexpr std::string_view kImageRequestFailed = "image_request_failed";
inline constexpr std::string_view kPreflightFailed = "preflight_failed";
inline constexpr std::string_view kMissionStarted = "mission_started";
inline constexpr std::string_view kCollision = "collision";
inline constexpr std::string_view kDepotArrival = "depot_arrival";
inline constexpr std::string_view kMissionClosed = "mission_closed";
}  // namespace event_kind

struct MissionEvent {
    long long tick = 0;
    double sim_time_s = 0.0;
    std::string state;
    std::string kind;
    ojson payload = ojson::object();
};

// Append-only, ordered by tick then by position in the log.
class MissionLog {
public:
    void append(MissionEvent event);

    const std::vector<MissionEvent>& events() const noexcept { return events_; }
    std::size_t size() const noexcept { return events_.size(); }
    bool empty() const noexcept { return events_.empty(); }

    std::vector<const MissionEvent*> of_kind(std::string_view kind) const;

    // One {tick, sim_time_s, state, event_kind, payload} record per line.
    std::string to_ndjson() const;
    static MissionLog from_ndjson(const std::string& text);

private:
    std::vector<MissionEvent> events_;
};

// Stamps events with the current tick and state.
class Recorder {
public:
    Recorder(MissionLog& log, double dt_s) : log_(log), dt_s_(dt_s) {}

    void set_tick(long long tick) noexcept { tick_ = tick; }
    void set_state(const MissionState& state) { state_ = state_label(state); }
    long long tick() const noexcept { return tick_; }
    double now_s() const noexcept;
    double dt_s() const noexcept { return dt_s_; }

    void emit(std::string_view kind, ojson payload = ojson::object());

private:
    MissionLog& log_;
    double dt_s_;
    long long tick_ = 0;
    std::string state_ = "AwaitDispatch";
};

// Replays every state_transition record through transition(), starting from
// AwaitDispatch. Returns the visited sequence; throws on any mismatch.
std::vector<MissionState> replay_transitions(const MissionLog& log);

}  // namespace dd::mission
