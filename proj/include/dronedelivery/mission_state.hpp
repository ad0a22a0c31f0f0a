#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace dd::mission {

enum class Phase {
    AwaitDispatch,
    ContainerLocking,
    FetchingParams,
    EnRoute,
    ObstacleOverpass,
    LocalityReached,
    Descending,
    DoorScanning,
    AwaitingAuthentication,
    Unlocked,
    ReturningToDepot,
    Charging,
    Completed,
};

enum class Outcome { Delivered, NotDelivered, MissedDelivery, Aborted };

inline constexpr std::array kAllOutcomes{Outcome::Delivered, Outcome::NotDelivered, Outcome::MissedDelivery,
                                         Outcome::Aborted};

// Completed carries its outcome; every other phase has none.
struct MissionState {
    Phase phase = Phase::AwaitDispatch;
    std::optional<Outcome> outcome;

    static MissionState completed(Outcome o) { return {Phase::Completed, o}; }
    bool terminal() const noexcept { return phase == Phase::Completed; }
    friend bool operator==(const MissionState&, const MissionState&) = default;
};

enum class Trigger {
    Dispatch,
    ContainerLocked,
    LockFailed,
    ParamsReady,
    ParamsUnavailable,
    ObstacleDetected,
    ObstacleCleared,
    GeofenceEntered,
    DescentStarted,
    ScanAltitudeReached,
    DoorMatched,
    DoorsExhausted,
    FaceMatched,
    AuthTimeout,
    AuthFailed,
    DwellElapsed,
    ReserveReached,
    LandedNeedsCharge,
    MissionClosed,
    BatteryExhausted,
    Collision,
};

inline constexpr std::array kAllTriggers{
    Trigger::Dispatch,        Trigger::ContainerLocked,     Trigger::LockFailed,     Trigger::ParamsReady,
    Trigger::ParamsUnavailable,
    Trigger::ObstacleDetected, Trigger::ObstacleCleared,    Trigger::GeofenceEntered, Trigger::DescentStarted,
    Trigger::ScanAltitudeReached, Trigger::DoorMatched,     Trigger::DoorsExhausted, Trigger::FaceMatched,
    Trigger::AuthTimeout,     Trigger::AuthFailed,          Trigger::DwellElapsed,   Trigger::ReserveReached,
    Trigger::LandedNeedsCharge, Trigger::MissionClosed,     Trigger::BatteryExhausted, Trigger::Collision,
};

// MissionClosed carries the outcome the mission completes with.
struct MissionInput {
    Trigger trigger = Trigger::Dispatch;
    std::optional<Outcome> outcome;

    static MissionInput closed(Outcome o) { return {Trigger::MissionClosed, o}; }
};

// Pure transition function. Throws dd::Error(Conflict) naming the state and
// input for any pair outside the legal table.
MissionState transition(const MissionState& state, const MissionInput& input);

std::string_view phase_name(Phase p) noexcept;
std::string_view outcome_name(Outcome o) noexcept;
std::string_view trigger_name(Trigger t) noexcept;
// "Completed(Delivered)" style label.
std::string state_label(const MissionState& s);

std::optional<Outcome> parse_outcome(std::string_view text) noexcept;
std::optional<MissionState> parse_state_label(std::string_view text) noexcept;
std::optional<Trigger> parse_trigger(std::string_view text) noexcept;

bool is_airborne(Phase p) noexcept;

}  // namespace dd::mission
