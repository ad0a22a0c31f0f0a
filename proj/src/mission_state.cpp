#include "dronedelivery/mission_state.hpp"

#include "dronedelivery/error.hpp"

namespace dd::mission {

namespace {

std::optional<MissionState> next_state(const MissionState& s, const MissionInput& in) {
    using P = Phase;
    using T = Trigger;
    const auto go = [](P p) { return std::optional<MissionState>(MissionState{p, std::nullopt}); };
    const auto aborted = std::optional<MissionState>(MissionState::completed(Outcome::Aborted));

    if (in.outcome.has_value() != (in.trigger == T::MissionClosed)) return std::nullopt;
    if (s.outcome.has_value() != (s.phase == P::Completed)) return std::nullopt;

    // Failure edges shared by every airborne phase.
    if (is_airborne(s.phase) && (in.trigger == T::BatteryExhausted || in.trigger == T::Collision)) return aborted;

    switch (s.phase) {
        case P::AwaitDispatch:
            if (in.trigger == T::Dispatch) return go(P::ContainerLocking);
            break;
        case P::ContainerLocking:
            if (in.trigger == T::ContainerLocked) return go(P::FetchingParams);
            if (in.trigger == T::LockFailed) return go(P::AwaitDispatch);
            break;
        case P::FetchingParams:
            if (in.trigger == T::ParamsReady) return go(P::EnRoute);
            if (in.trigger == T::ParamsUnavailable) return go(P::AwaitDispatch);
            break;
        case P::EnRoute:
            if (in.trigger == T::ObstacleDetected) return go(P::ObstacleOverpass);
            if (in.trigger == T::GeofenceEntered) return go(P::LocalityReached);
            if (in.trigger == T::ReserveReached) return go(P::ReturningToDepot);
            break;
        case P::ObstacleOverpass:
            if (in.trigger == T::ObstacleDetected) return go(P::ObstacleOverpass);
            if (in.trigger == T::ObstacleCleared) return go(P::EnRoute);
            if (in.trigger == T::ReserveReached) return go(P::ReturningToDepot);
            break;
        case P::LocalityReached:
            if (in.trigger == T::DescentStarted) return go(P::Descending);
            if (in.trigger == T::ReserveReached) return go(P::ReturningToDepot);
            break;
        case P::Descending:
            if (in.trigger == T::ScanAltitudeReached) return go(P::DoorScanning);
            if (in.trigger == T::ReserveReached) return go(P::ReturningToDepot);
            break;
        case P::DoorScanning:
            if (in.trigger == T::DoorMatched) return go(P::AwaitingAuthentication);
            if (in.trigger == T::DoorsExhausted) return go(P::ReturningToDepot);
            if (in.trigger == T::ReserveReached) return go(P::ReturningToDepot);
            break;
        case P::AwaitingAuthentication:
            if (in.trigger == T::FaceMatched) return go(P::Unlocked);
            if (in.trigger == T::AuthTimeout || in.trigger == T::AuthFailed) return go(P::ReturningToDepot);
            if (in.trigger == T::ReserveReached) return go(P::ReturningToDepot);
            break;
        case P::Unlocked:
            if (in.trigger == T::DwellElapsed) return go(P::ReturningToDepot);
            break;
        case P::ReturningToDepot:
            if (in.trigger == T::ObstacleDetected) return go(P::ReturningToDepot);
            if (in.trigger == T::LandedNeedsCharge) return go(P::Charging);
            if (in.trigger == T::MissionClosed) return MissionState::completed(*in.outcome);
            break;
        case P::Charging:
            if (in.trigger == T::MissionClosed) return MissionState::completed(*in.outcome);
            break;
        case P::Completed:
            break;
    }
    return std::nullopt;
}

}  // namespace

MissionState transition(const MissionState& state, const MissionInput& input) {
    if (auto next = next_state(state, input)) return *next;
    std::string event(trigger_name(input.trigger));
    if (input.outcome) event += "(" + std::string(outcome_name(*input.outcome)) + ")";
    fail(ErrorCode::Conflict, "illegal transition: " + state_label(state) + " on " + event,
         state_label(state) + " x " + event);
}

bool is_airborne(Phase p) noexcept {
    switch (p) {
        case Phase::EnRoute:
        case Phase::ObstacleOverpass:
        case Phase::LocalityReached:
        case Phase::Descending:
        case Phase::DoorScanning:
        case Phase::AwaitingAuthentication:
        case Phase::Unlocked:
        case Phase::ReturningToDepot:
            return true;
        default:
            return false;
    }
}

std::string_view phase_name(Phase p) noexcept {
    switch (p) {
        case Phase::AwaitDispatch: return "AwaitDispatch";
        case Phase::ContainerLocking: return "ContainerLocking";
        case Phase::FetchingParams: return "FetchingParams";
        case Phase::EnRoute: return "EnRoute";
        case Phase::ObstacleOverpass: return "ObstacleOverpass";
        case Phase::LocalityReached: return "LocalityReached";
        case Phase::Descending: return "Descending";
        case Phase::DoorScanning: return "DoorScanning";
        case Phase::AwaitingAuthentication: return "AwaitingAuthentication";
        case Phase::Unlocked: return "Unlocked";
        case Phase::ReturningToDepot: return "ReturningToDepot";
        case Phase::Charging: return "Charging";
        case Phase::Completed: return "Completed";
    }
    return "?";
}

std::string_view outcome_name(Outcome o) noexcept {
    switch (o) {
        case Outcome::Delivered: return "Delivered";
        case Outcome::NotDelivered: return "NotDelivered";
        case Outcome::MissedDelivery: return "MissedDelivery";
        case Outcome::Aborted: return "Aborted";
    }
    return "?";
}

std::string_view trigger_name(Trigger t) noexcept {
    switch (t) {
        case Trigger::Dispatch: return "Dispatch";
        case Trigger::ContainerLocked: return "ContainerLocked";
        case Trigger::LockFailed: return "LockFailed";
        case Trigger::ParamsReady: return "ParamsReady";
        case Trigger::ParamsUnavailable: return "ParamsUnavailable";
        case Trigger::ObstacleDetected: return "ObstacleDetected";
        case Trigger::ObstacleCleared: return "ObstacleCleared";
        case Trigger::GeofenceEntered: return "GeofenceEntered";
        case Trigger::DescentStarted: return "DescentStarted";
        case Trigger::ScanAltitudeReached: return "ScanAltitudeReached";
        case Trigger::DoorMatched: return "DoorMatched";
        case Trigger::DoorsExhausted: return "DoorsExhausted";
        case Trigger::FaceMatched: return "FaceMatched";
        case Trigger::AuthTimeout: return "AuthTimeout";
        case Trigger::AuthFailed: return "AuthFailed";
        case Trigger::DwellElapsed: return "DwellElapsed";
        case Trigger::ReserveReached: return "ReserveReached";
        case Trigger::LandedNeedsCharge: return "LandedNeedsCharge";
        case Trigger::MissionClosed: return "MissionClosed";
        case Trigger::BatteryExhausted: return "BatteryExhausted";
        case Trigger::Collision: return "Collision";
    }
    return "?";
}

std::string state_label(const MissionState& s) {
    std::string label(phase_name(s.phase));
    if (s.outcome) label += "(" + std::string(outcome_name(*s.outcome)) + ")";
    return label;
}

std::optional<Outcome> parse_outcome(std::string_view text) noexcept {
    for (auto o : kAllOutcomes) {
        if (outcome_name(o) == text) return o;
    }
    return std::nullopt;
}

std::optional<Trigger> parse_trigger(std::string_view text) noexcept {
    for (auto t : kAllTriggers) {
        if (trigger_name(t) == text) return t;
    }
    return std::nullopt;
}

std::optional<MissionState> parse_state_label(std::string_view text) noexcept {
    constexpr std::string_view prefix = "Completed(";
    if (text.starts_with(prefix) && text.ends_with(")")) {
        auto o = parse_outcome(text.substr(prefix.size(), text.size() - prefix.size() - 1));
        if (!o) return std::nullopt;
        return MissionState::completed(*o);
    }
    for (int i = 0; i <= static_cast<int>(Phase::Charging); ++i) {
        const auto p = static_cast<Phase>(i);
        if (phase_name(p) == text) return MissionState{p, std::nullopt};
    }
    return std::nullopt;
}

}  // namespace dd::mission
