#include "dronedelivery/mission.hpp"

#include <algorithm>
#include <cmath>

#include "dronedelivery/error.hpp"

namespace dd::mission {

namespace {

constexpr double kAltitudeEpsilon = 1e-6;

long long to_ticks(double seconds, double dt_s) { return std::llround(seconds / dt_s); }

double angle_between_deg(double a, double b) {
    double d = std::fmod(std::abs(a - b), 360.0);
    return d > 180.0 ? 360.0 - d : d;
}

sim::FlightCommand hover(const sim::DroneState& drone) { return {0.0, drone.heading_deg, 0.0}; }

// Horizontal move toward `target` capped at `speed`, holding altitude.
sim::FlightCommand approach(const GeoPoint& from, const GeoPoint& target,
                            double speed, double dt_s) {
    const double d = geo::haversine_distance(from, target);
    return {std::min(speed, d / dt_s), geo::initial_bearing_deg(from, target), 0.0};
}

double vertical_toward(double alt, double target, double dt_s) { return (target - alt) / dt_s; }

void push_notice(CloudLink& cloud, const std::string& delivery_id, NoticeKind kind, Recorder& rec) {
    cloud.notify(delivery_id, kind);
    ojson p;
    p["kind"] = notice_text(kind);
    p["delivery_id"] = delivery_id;
    rec.emit(event_kind::kNotificationPushed, std::move(p));
}

// One retry on a missing acknowledgement.
bool servo_with_retry(ServoCommand c, ServoLink& servo, Recorder& rec) {
    for (int attempt = 1; attempt <= 2; ++attempt) {
        ojson p;
        p["command"] = servo_command_name(c);
        p["attempt"] = attempt;
        if (servo.command(c)) {
            rec.emit(event_kind::kServoCommand, std::move(p));
            return true;
        }
        rec.emit(event_kind::kServoFault, std::move(p));
    }
    return false;
}

}  // namespace

void validate(const MissionConfig& c) {
    auto positive = [](double v, const char* name) {
        if (!std::isfinite(v) || v <= 0.0) fail(ErrorCode::Validation, std::string(name) + " must be > 0");
    };
    positive(c.locality_radius_m, "locality_radius_m");
    positive(c.scan_altitude_m, "scan_altitude_m");
    positive(c.overpass_margin_m, "overpass_margin_m");
    positive(c.cruise_altitude_m, "cruise_altitude_m");
    positive(c.auth_timeout_s, "auth_timeout_s");
    positive(c.unlock_dwell_s, "unlock_dwell_s");
    positive(c.telemetry_period_s, "telemetry_period_s");
    positive(c.approach_speed_mps, "approach_speed_mps");
    positive(c.arrival_tolerance_m, "arrival_tolerance_m");
    positive(c.image_retry_interval_s, "image_retry_interval_s");
    positive(c.max_mission_s, "max_mission_s");
    if (!(c.face_threshold > 0.0 && c.face_threshold <= 1.0)) {
        fail(ErrorCode::Validation, "face_threshold must be in (0, 1]");
    }
    if (!(c.battery_reserve_fraction >= 0.0 && c.battery_reserve_fraction < 1.0)) {
        fail(ErrorCode::Validation, "battery_reserve_fraction must be in [0, 1)");
    }
    if (c.image_request_attempts < 1) fail(ErrorCode::Validation, "image_request_attempts must be >= 1");
}

std::string_view notice_text(NoticeKind kind) noexcept {
    switch (kind) {
        case NoticeKind::AcceptDelivery: return "Accept Delivery";
        case NoticeKind::MissedDelivery: return "Missed delivery";
        case NoticeKind::Delivered: return "Delivered";
        case NoticeKind::NotDelivered: return "Not delivered";
    }
    return "?";
}

std::optional<NoticeKind> parse_notice(std::string_view text) noexcept {
    for (auto k : {NoticeKind::AcceptDelivery, NoticeKind::MissedDelivery, NoticeKind::Delivered,
                   NoticeKind::NotDelivered}) {
        if (notice_text(k) == text) return k;
    }
    return std::nullopt;
}

std::string_view servo_command_name(ServoCommand c) noexcept {
    switch (c) {
        case ServoCommand::Lock: return "lock";
        case ServoCommand::Open: return "open";
        case ServoCommand::Close: return "close";
    }
    return "?";
}

std::string_view disposition_name(Disposition d) noexcept {
    return d == Disposition::Charging ? "Charging" : "AwaitDispatch";
}

bool SimServo::command(ServoCommand c) {
    ++attempts_;
    if (failing_.contains(attempts_)) return false;
    history_.push_back(c);
    return true;
}

void RecordingCloudLink::mission_launched(const std::string&) { ++launches; }
void RecordingCloudLink::notify(const std::string&, NoticeKind kind) { notices.push_back(kind); }

ImageFetch RecordingCloudLink::request_face_image(const std::string&) {
    ++image_requests;
    if (image_requests <= unreachable_attempts) return {ImageFetch::Status::Unreachable, {}, 0};
    if (image_missing) return {ImageFetch::Status::Missing, {}, 0};
    return {ImageFetch::Status::Ok, image_digest, 1024};
}

void RecordingCloudLink::send_telemetry(const TelemetryReport& report) { telemetry.push_back(report); }
void RecordingCloudLink::report_outcome(const std::string&, Outcome outcome) { outcomes.push_back(outcome); }
void RecordingCloudLink::report_error(const std::string&, const std::string& reason) { errors.push_back(reason); }

double plan_overpass(const perception::Detection& detection, double current_altitude_m, const MissionConfig& config) {
    return std::max(current_altitude_m, detection.estimated_height_m + config.overpass_margin_m);
}

// ---- DoorScanner -------------------------------------------------------------

DoorScanner::DoorScanner(const sim::Building& building, perception::ColorCode expected, const MissionConfig& config,
                         perception::DetectorProfile profile, const GeoPoint& start)
    : building_(building), expected_(expected), config_(config), profile_(std::move(profile)) {
    if (config_.door_order == DoorOrder::Stored) {
        for (const auto& d : building_.doors) order_.push_back(d.id);
        return;
    }
    // Greedy nearest-neighbour tour from the start point.
    std::vector<const sim::Door*> left;
    for (const auto& d : building_.doors) left.push_back(&d);
    GeoPoint at = start;
    while (!left.empty()) {
        auto it = std::min_element(left.begin(), left.end(), [&](const sim::Door* a, const sim::Door* b) {
            return geo::haversine_distance(at, a->position) < geo::haversine_distance(at, b->position);
        });
        order_.push_back((*it)->id);
        at = (*it)->position;
        left.erase(it);
    }
}

DoorScanner::Step DoorScanner::finish(ScanOutcome outcome) {
    outcome.scans = scans_;
    Step s;
    s.done = std::move(outcome);
    return s;
}

DoorScanner::Step DoorScanner::tick(const sim::DroneState& drone, Rng& rng, CloudLink& cloud,
                                    const std::string& delivery_id, Recorder& rec) {
    const double dt = rec.dt_s();
    if (!matched_door_) {
        if (next_ >= order_.size()) {
            push_notice(cloud, delivery_id, NoticeKind::MissedDelivery, rec);
            return finish({});
        }
        const auto& door = *std::find_if(building_.doors.begin(), building_.doors.end(),
                                         [&](const sim::Door& d) { return d.id == order_[next_]; });
        const double d = geo::haversine_distance(drone.position, door.position);
        if (d > config_.arrival_tolerance_m) {
            auto cmd = approach(drone.position, door.position, config_.approach_speed_mps, dt);
            cmd.vertical_speed_mps = vertical_toward(drone.position.alt(), config_.scan_altitude_m, dt);
            return {cmd, std::nullopt};
        }

        const auto observed = perception::scan_door(drone, door, profile_, rng,
                                                    {config_.scan_altitude_m, 0.25});
        ++scans_;
        ++next_;
        const bool match = observed && perception::match_color(*observed, expected_);
        ojson p;
        p["door_id"] = door.id;
        p["observed"] = observed ? ojson(observed->index) : ojson(nullptr);
        p["match"] = match;
        rec.emit(event_kind::kDoorScanned, std::move(p));

        if (!match) {
            if (next_ >= order_.size()) {
                push_notice(cloud, delivery_id, NoticeKind::MissedDelivery, rec);
                return finish({});
            }
            return {hover(drone), std::nullopt};
        }
        push_notice(cloud, delivery_id, NoticeKind::AcceptDelivery, rec);
        matched_door_ = door.id;
        next_attempt_tick_ = rec.tick();
    }

    if (rec.tick() < next_attempt_tick_) return {hover(drone), std::nullopt};

    ++image_attempts_;
    const ImageFetch fetch = cloud.request_face_image(delivery_id);
    ojson p;
    p["attempt"] = image_attempts_;
    switch (fetch.status) {
        case ImageFetch::Status::Ok: p["status"] = "ok"; p["digest"] = fetch.digest; break;
        case ImageFetch::Status::Missing: p["status"] = "missing"; break;
        case ImageFetch::Status::Unreachable: p["status"] = "unreachable"; break;
    }
    rec.emit(event_kind::kImageRequested, std::move(p));

    if (fetch.status == ImageFetch::Status::Ok) {
        ScanOutcome o;
        o.found = true;
        o.door_id = matched_door_;
        o.image_available = true;
        return finish(std::move(o));
    }
    if (fetch.status == ImageFetch::Status::Missing) {
        ScanOutcome o;
        o.found = true;
        o.door_id = matched_door_;
        o.image_missing = true;
        return finish(std::move(o));
    }
    if (image_attempts_ >= config_.image_request_attempts) {
        ojson f;
        f["door_id"] = *matched_door_;
        f["attempts"] = image_attempts_;
        rec.emit(event_kind::kImageRequestFailed, std::move(f));
        push_notice(cloud, delivery_id, NoticeKind::MissedDelivery, rec);
        ScanOutcome o;
        o.image_unreachable = true;
        return finish(std::move(o));
    }
    next_attempt_tick_ = rec.tick() + to_ticks(config_.image_retry_interval_s, dt);
    return {hover(drone), std::nullopt};
}

ScanOutcome execute_door_scan(const sim::Building& building, const perception::ColorCode& expected,
                              sim::DroneState& drone, const ScanContext& ctx, CloudLink& cloud,
                              const std::string& delivery_id, Recorder& rec) {
    DoorScanner scanner(building, expected, ctx.config, ctx.equipment.detector, drone.position);
    const long long budget = rec.tick() + to_ticks(ctx.config.max_mission_s, ctx.world.dt_s);
    while (rec.tick() < budget) {
        auto step = scanner.tick(drone, ctx.rng, cloud, delivery_id, rec);
        if (step.done) return *step.done;
        drone = sim::step_drone(drone, step.command, ctx.world, ctx.equipment.limits, ctx.equipment.power);
        rec.set_tick(rec.tick() + 1);
    }
    fail(ErrorCode::Internal, "door scan exceeded its tick budget");
}

// ---- Authenticator -----------------------------------------------------------

Authenticator::Authenticator(perception::FaceStream stream, const MissionConfig& config, double dt_s,
                             long long start_tick, bool reference_available)
    : stream_(std::move(stream)),
      config_(config),
      dt_s_(dt_s),
      start_tick_(start_tick),
      reference_available_(reference_available),
      timeout_ticks_(to_ticks(config.auth_timeout_s, dt_s)),
      dwell_ticks_(to_ticks(config.unlock_dwell_s, dt_s)) {}

Authenticator::Event Authenticator::tick(long long tick, ServoLink& servo, Recorder& rec) {
    if (open_tick_) {
        if (tick - *open_tick_ < dwell_ticks_) return Event::None;
        servo_with_retry(ServoCommand::Close, servo, rec);
        return Event::DwellElapsed;
    }

    const long long elapsed = tick - start_tick_;
    const auto sample = stream_.next(static_cast<double>(elapsed) * dt_s_);
    if (elapsed >= timeout_ticks_) return Event::Timeout;
    if (!reference_available_) return Event::Failed;
    if (!sample) return Event::None;

    const bool matched = *sample >= config_.face_threshold;
    ojson p;
    p["confidence"] = *sample;
    p["matched"] = matched;
    rec.emit("face_sample", std::move(p));
    if (!matched) return Event::None;
    if (!servo_with_retry(ServoCommand::Open, servo, rec)) return Event::Failed;
    open_tick_ = tick;
    return Event::Unlocked;
}

AuthResult authenticate_recipient(perception::FaceStream stream, const MissionConfig& config, double dt_s,
                                  ServoLink& servo, CloudLink& cloud, const std::string& delivery_id, Recorder& rec,
                                  bool reference_available) {
    const long long start = rec.tick();
    Authenticator auth(std::move(stream), config, dt_s, start, reference_available);
    AuthResult result;
    const auto elapsed = [&] { return std::round(static_cast<double>(rec.tick() - start) * dt_s * 1e6) / 1e6; };
    for (long long t = start + 1;; ++t) {
        rec.set_tick(t);
        switch (auth.tick(t, servo, rec)) {
            case Authenticator::Event::None:
                break;
            case Authenticator::Event::Unlocked:
                result.opened_at_s = elapsed();
                result.decided_at_s = elapsed();
                break;
            case Authenticator::Event::DwellElapsed:
                result.closed_at_s = elapsed();
                result.outcome = AuthOutcome::Delivered;
                push_notice(cloud, delivery_id, NoticeKind::Delivered, rec);
                return result;
            case Authenticator::Event::Timeout:
            case Authenticator::Event::Failed:
                result.decided_at_s = elapsed();
                result.outcome = AuthOutcome::NotDelivered;
                push_notice(cloud, delivery_id, NoticeKind::NotDelivered, rec);
                return result;
        }
    }
}

// ---- Mission runner ----------------------------------------------------------

namespace {

enum class ReturnStage { Cruise, Approach, Landing };

class Runner {
public:
    Runner(const LaunchInputs& in, CloudLink& cloud, ServoLink& servo, const TickObserver& observer)
        : in_(in),
          cloud_(cloud),
          servo_(servo),
          observer_(observer),
          dt_(in.world.dt_s),
          rec_(result_.log, in.world.dt_s),
          gps_(in.equipment.gps, in.world.earth_radius_m),
          gps_rng_(Rng::stream(in.seed, "gps")),
          baro_rng_(Rng::stream(in.seed, "baro")),
          scan_rng_(Rng::stream(in.seed, "door-scan")),
          detector_(in.equipment.detector, Rng::stream(in.seed, "detector"), in.world.dt_s) {}

    MissionResult run();

private:
    const std::string& id() const { return in_.params.delivery_id; }
    Phase phase() const { return state_.phase; }
    double capacity() const { return in_.equipment.power.battery_capacity_j; }
    double battery_fraction() const { return drone_.battery_j / capacity(); }

    void transit(Trigger trigger, std::optional<Outcome> outcome = std::nullopt);
    void decide(Outcome outcome);
    void close(Outcome outcome);
    void abort_with(Trigger trigger);
    bool reserve_reached();

    sim::FlightCommand plan(const GeoPoint& estimate, const std::vector<perception::Detection>& detections);
    sim::FlightCommand plan_return(const GeoPoint& estimate, const std::vector<perception::Detection>& detections);
    sim::FlightCommand cruise(const GeoPoint& estimate, const GeoPoint& target) const;
    double required_altitude() const;
    void handle_detections(const std::vector<perception::Detection>& detections);
    void release_holds(const GeoPoint& target);
    const sim::Obstacle* collided(double now) const;
    void send_telemetry(const GeoPoint& fix, double baro_alt);

    const LaunchInputs& in_;
    CloudLink& cloud_;
    ServoLink& servo_;
    const TickObserver& observer_;
    double dt_;

    MissionResult result_;
    Recorder rec_;
    MissionState state_;
    sim::DroneState drone_;
    long long tick_ = 0;

    sim::GpsReceiver gps_;
    Rng gps_rng_;
    Rng baro_rng_;
    Rng scan_rng_;
    perception::ObstacleDetector detector_;

    std::map<std::string, OverpassHold> holds_;
    std::optional<DoorScanner> scanner_;
    std::optional<Authenticator> auth_;
    ReturnStage return_stage_ = ReturnStage::Cruise;

    std::optional<Outcome> decided_;
    bool terminal_notice_sent_ = false;
    long long decided_tick_ = 0;
    double odometer_m_ = 0.0;
    double initial_battery_j_ = 0.0;
};

void Runner::transit(Trigger trigger, std::optional<Outcome> outcome) {
    const MissionState from = state_;
    state_ = transition(state_, {trigger, outcome});
    rec_.set_state(state_);
    ojson p;
    p["from"] = state_label(from);
    p["to"] = state_label(state_);
    p["trigger"] = trigger_name(trigger);
    if (outcome) p["outcome"] = outcome_name(*outcome);
    p["position"] = {{"lat", drone_.position.lat()}, {"lon", drone_.position.lon()}, {"alt", drone_.position.alt()}};
    rec_.emit(event_kind::kStateTransition, std::move(p));
}

// Records the delivery outcome once and pushes the matching terminal message.
void Runner::decide(Outcome outcome) {
    if (decided_) return;
    decided_ = outcome;
    decided_tick_ = tick_;
    if (!terminal_notice_sent_) {
        switch (outcome) {
            case Outcome::Delivered: push_notice(cloud_, id(), NoticeKind::Delivered, rec_); break;
            case Outcome::NotDelivered:
            case Outcome::Aborted: push_notice(cloud_, id(), NoticeKind::NotDelivered, rec_); break;
            case Outcome::MissedDelivery: break;  // pushed by the door scanner
        }
        terminal_notice_sent_ = true;
    }
    cloud_.report_outcome(id(), outcome);
}

void Runner::close(Outcome outcome) {
    result_.outcome = outcome;
    result_.final_state = state_;
    result_.final_drone = drone_;
    result_.distance_flown_m = odometer_m_;
    result_.energy_used_j = initial_battery_j_ - drone_.battery_j;
    result_.delivery_duration_s = std::round(static_cast<double>(decided_tick_) * dt_ * 1e6) / 1e6;
    ojson p;
    p["outcome"] = outcome_name(outcome);
    p["delivery_duration_s"] = result_.delivery_duration_s;
    p["distance_flown_m"] = result_.distance_flown_m;
    p["energy_used_j"] = result_.energy_used_j;
    p["disposition"] = result_.disposition ? ojson(disposition_name(*result_.disposition)) : ojson(nullptr);
    p["final_position"] = {{"lat", drone_.position.lat()}, {"lon", drone_.position.lon()},
                           {"alt", drone_.position.alt()}};
    rec_.emit(event_kind::kMissionClosed, std::move(p));
}

void Runner::abort_with(Trigger trigger) {
    decide(Outcome::Aborted);
    transit(trigger);
    close(Outcome::Aborted);
}

bool Runner::reserve_reached() {
    if (battery_fraction() >= in_.config.battery_reserve_fraction) return false;
    decide(Outcome::Aborted);
    transit(Trigger::ReserveReached);
    return true;
}

double Runner::required_altitude() const {
    double req = in_.config.cruise_altitude_m;
    for (const auto& [_, h] : holds_) req = std::max(req, h.target_altitude_m);
    return req;
}

sim::FlightCommand Runner::cruise(const GeoPoint& estimate, const GeoPoint& target) const {
    const double req = required_altitude();
    const double alt = drone_.position.alt();
    sim::FlightCommand cmd;
    cmd.heading_deg = geo::initial_bearing_deg(estimate, target);
    cmd.vertical_speed_mps = vertical_toward(alt, req, dt_);
    // Climb in place until clear, then translate.
    if (alt >= req - kAltitudeEpsilon) {
        const double d = geo::haversine_distance(estimate, target);
        cmd.horizontal_speed_mps = std::min(in_.equipment.limits.max_horizontal_speed_mps, d / dt_);
    }
    return cmd;
}

void Runner::handle_detections(const std::vector<perception::Detection>& detections) {
    for (const auto& det : detections) {
        auto [it, inserted] = holds_.try_emplace(det.obstacle_id);
        OverpassHold& hold = it->second;
        // Re-detections only raise the clearance; the current altitude counts once.
        const double target = inserted ? plan_overpass(det, drone_.position.alt(), in_.config)
                                       : det.estimated_height_m + in_.config.overpass_margin_m;
        const bool raised = inserted || target > hold.target_altitude_m;
        hold.target_altitude_m = std::max(hold.target_altitude_m, target);
        hold.estimated_height_m = std::max(hold.estimated_height_m, det.estimated_height_m);
        hold.center = det.footprint_center;
        hold.radius_m = det.footprint_radius_m;
        if (raised) {
            ojson p;
            p["obstacle_id"] = det.obstacle_id;
            p["estimated_height_m"] = det.estimated_height_m;
            p["target_altitude_m"] = hold.target_altitude_m;
            p["footprint"] = {{"lat", det.footprint_center.lat()}, {"lon", det.footprint_center.lon()},
                              {"radius_m", det.footprint_radius_m}};
            p["observed_tick"] = det.detected_at;
            p["false_positive"] = det.false_positive;
            rec_.emit(event_kind::kDetectionHandled, std::move(p));
        }
        if (inserted && phase() == Phase::EnRoute) transit(Trigger::ObstacleDetected);
    }
}

void Runner::release_holds(const GeoPoint& target) {
    const double to_target = geo::haversine_distance(drone_.position, target);
    const double course = geo::initial_bearing_deg(drone_.position, target);
    std::erase_if(holds_, [&](const auto& entry) {
        const OverpassHold& h = entry.second;
        const double d = geo::haversine_distance(drone_.position, h.center);
        if (d <= h.radius_m) return false;
        if (d - h.radius_m > to_target) return true;  // beyond the target, never crossed
        return angle_between_deg(geo::initial_bearing_deg(drone_.position, h.center), course) > 90.0;
    });
}

const sim::Obstacle* Runner::collided(double now) const {
    for (const auto& o : in_.world.obstacles) {
        if (drone_.position.alt() >= o.height_m) continue;
        if (sim::inside_footprint(drone_.position, o.center_at(now), o.radius_m, in_.world.earth_radius_m)) return &o;
    }
    return nullptr;
}

void Runner::send_telemetry(const GeoPoint& fix, double baro_alt) {
    const double alt = std::max(0.0, baro_alt);
    ojson p;
    p["lat"] = fix.lat();
    p["lon"] = fix.lon();
    p["alt"] = alt;
    p["battery_fraction"] = battery_fraction();
    p["odometer_m"] = odometer_m_;
    rec_.emit(event_kind::kTelemetrySent, std::move(p));
    cloud_.send_telemetry({id(), rec_.now_s(), fix.with_alt(alt), battery_fraction(), state_label(state_)});
}

sim::FlightCommand Runner::plan(const GeoPoint& estimate, const std::vector<perception::Detection>& detections) {
    const auto& cfg = in_.config;
    const GeoPoint& dest = in_.params.destination;
    switch (phase()) {
        case Phase::EnRoute:
        case Phase::ObstacleOverpass: {
            if (reserve_reached()) return hover(drone_);
            handle_detections(detections);
            release_holds(dest);
            if (phase() == Phase::ObstacleOverpass && holds_.empty()) transit(Trigger::ObstacleCleared);
            if (phase() == Phase::EnRoute && geo::within_radius(estimate, dest, cfg.locality_radius_m)) {
                transit(Trigger::GeofenceEntered);
                return hover(drone_);
            }
            return cruise(estimate, dest);
        }
        case Phase::LocalityReached: {
            if (reserve_reached()) return hover(drone_);
            // Final positioning uses the stabilised local estimate rather than raw GPS.
            if (geo::within_radius(drone_.position, dest, cfg.locality_radius_m)) {
                transit(Trigger::DescentStarted);
                return hover(drone_);
            }
            return approach(drone_.position, dest, cfg.approach_speed_mps, dt_);
        }
        case Phase::Descending: {
            if (reserve_reached()) return hover(drone_);
            if (std::abs(drone_.position.alt() - cfg.scan_altitude_m) <= kAltitudeEpsilon) {
                transit(Trigger::ScanAltitudeReached);
                const auto* building = in_.world.find_building(in_.params.building_id);
                scanner_.emplace(*building, in_.params.expected_code, cfg, in_.equipment.detector, drone_.position);
                return hover(drone_);
            }
            auto cmd = hover(drone_);
            cmd.vertical_speed_mps = vertical_toward(drone_.position.alt(), cfg.scan_altitude_m, dt_);
            return cmd;
        }
        case Phase::DoorScanning: {
            if (reserve_reached()) return hover(drone_);
            auto step = scanner_->tick(drone_, scan_rng_, cloud_, id(), rec_);
            if (!step.done) return step.command;
            const ScanOutcome& o = *step.done;
            if (o.found) {
                transit(Trigger::DoorMatched);
                auth_.emplace(in_.faces, cfg, dt_, tick_, o.image_available);
                if (o.image_missing) {
                    decide(Outcome::NotDelivered);
                    transit(Trigger::AuthFailed);
                }
            } else {
                terminal_notice_sent_ = true;
                decide(Outcome::MissedDelivery);
                transit(Trigger::DoorsExhausted);
            }
            return hover(drone_);
        }
        case Phase::AwaitingAuthentication: {
            if (reserve_reached()) return hover(drone_);
            switch (auth_->tick(tick_, servo_, rec_)) {
                case Authenticator::Event::Unlocked: transit(Trigger::FaceMatched); break;
                case Authenticator::Event::Timeout:
                    decide(Outcome::NotDelivered);
                    transit(Trigger::AuthTimeout);
                    break;
                case Authenticator::Event::Failed:
                    decide(Outcome::NotDelivered);
                    transit(Trigger::AuthFailed);
                    break;
                default: break;
            }
            return hover(drone_);
        }
        case Phase::Unlocked: {
            if (auth_->tick(tick_, servo_, rec_) == Authenticator::Event::DwellElapsed) {
                decide(Outcome::Delivered);
                transit(Trigger::DwellElapsed);
            }
            return hover(drone_);
        }
        case Phase::ReturningToDepot:
            return plan_return(estimate, detections);
        default:
            fail(ErrorCode::Internal, "no flight plan for state " + state_label(state_));
    }
}

sim::FlightCommand Runner::plan_return(const GeoPoint& estimate,
                                       const std::vector<perception::Detection>& detections) {
    const auto& cfg = in_.config;
    const GeoPoint& depot = in_.world.depot;
    handle_detections(detections);
    release_holds(depot);

    if (return_stage_ == ReturnStage::Cruise) {
        if (!geo::within_radius(estimate, depot, cfg.locality_radius_m)) return cruise(estimate, depot);
        return_stage_ = ReturnStage::Approach;
    }
    if (return_stage_ == ReturnStage::Approach) {
        if (geo::haversine_distance(drone_.position, depot) > cfg.arrival_tolerance_m) {
            return approach(drone_.position, depot, cfg.approach_speed_mps, dt_);
        }
        return_stage_ = ReturnStage::Landing;
    }
    if (drone_.position.alt() > 0.0) {
        auto cmd = hover(drone_);
        cmd.vertical_speed_mps = vertical_toward(drone_.position.alt(), 0.0, dt_);
        return cmd;
    }

    const Outcome outcome = decided_.value_or(Outcome::Aborted);
    const bool needs_charge = battery_fraction() < cfg.battery_reserve_fraction;
    result_.disposition = needs_charge ? Disposition::Charging : Disposition::AwaitDispatch;
    ojson p;
    p["battery_fraction"] = battery_fraction();
    p["next"] = disposition_name(*result_.disposition);
    rec_.emit(event_kind::kDepotArrival, std::move(p));
    if (needs_charge) transit(Trigger::LandedNeedsCharge);
    transit(Trigger::MissionClosed, outcome);
    close(outcome);
    return hover(drone_);
}

MissionResult Runner::run() {
    const auto& cfg = in_.config;
    validate(cfg);
    sim::validate(in_.world);
    sim::validate(in_.equipment.power);
    sim::validate(in_.equipment.gps);

    rec_.set_tick(0);
    rec_.set_state(state_);
    initial_battery_j_ = std::min(in_.equipment.initial_battery_j.value_or(capacity()), capacity());
    drone_.position = in_.world.depot.with_alt(0.0);
    drone_.battery_j = initial_battery_j_;
    drone_.heading_deg = geo::initial_bearing_deg(in_.world.depot, in_.params.destination);

    {
        ojson p;
        p["delivery_id"] = id();
        p["seed"] = in_.seed;
        p["destination"] = {{"lat", in_.params.destination.lat()}, {"lon", in_.params.destination.lon()}};
        p["building_id"] = in_.params.building_id;
        p["expected_color_index"] = in_.params.expected_code.index;
        p["battery_j"] = initial_battery_j_;
        p["gps_profile"] = in_.equipment.gps.label;
        p["detector_profile"] = in_.equipment.detector.label;
        rec_.emit(event_kind::kMissionStarted, std::move(p));
    }

    auto not_launched = [&](const std::string& reason) {
        ojson p;
        p["reason"] = reason;
        p["battery_fraction"] = battery_fraction();
        rec_.emit(event_kind::kPreflightFailed, std::move(p));
        cloud_.report_error(id(), reason);
        result_.final_state = state_;
        result_.final_drone = drone_;
        return std::move(result_);
    };

    if (battery_fraction() <= cfg.battery_reserve_fraction) return not_launched("insufficient_battery");
    transit(Trigger::Dispatch);
    if (!servo_with_retry(ServoCommand::Lock, servo_, rec_)) {
        transit(Trigger::LockFailed);
        return not_launched("container_lock_failed");
    }
    drone_.container_locked = true;
    transit(Trigger::ContainerLocked);
    const auto* building = in_.world.find_building(in_.params.building_id);
    if (id().empty() || in_.params.face_image_ref.empty() || building == nullptr ||
        !perception::Palette::default16().contains(in_.params.expected_code)) {
        transit(Trigger::ParamsUnavailable);
        return not_launched("params_unavailable");
    }
    transit(Trigger::ParamsReady);
    cloud_.mission_launched(id());
    result_.launched = true;

    const long long period = std::max<long long>(1, to_ticks(cfg.telemetry_period_s, dt_));
    const long long budget = to_ticks(cfg.max_mission_s, dt_);
    while (!state_.terminal()) {
        if (tick_ > budget) fail(ErrorCode::Internal, "mission exceeded its simulated time budget");
        rec_.set_tick(tick_);
        const double now = static_cast<double>(tick_) * dt_;

        // sense
        if (drone_.exhausted) {
            abort_with(Trigger::BatteryExhausted);
            break;
        }
        if (const auto* hit = collided(now)) {
            ojson p;
            p["obstacle_id"] = hit->id;
            p["altitude_m"] = drone_.position.alt();
            p["obstacle_height_m"] = hit->height_m;
            rec_.emit(event_kind::kCollision, std::move(p));
            abort_with(Trigger::Collision);
            break;
        }
        const GeoPoint fix = gps_.sample(drone_, gps_rng_, now);
        const auto err = gps_.current_error();
        const GeoPoint estimate = geo::offset_ne(drone_.position, err.north, err.east, in_.world.earth_radius_m);
        const double baro_alt = sim::sample_altitude(drone_, in_.equipment.baro_sigma_m, baro_rng_);
        std::vector<perception::Detection> detections;
        if (phase() == Phase::EnRoute || phase() == Phase::ObstacleOverpass || phase() == Phase::ReturningToDepot) {
            const auto truth = sim::obstacles_ahead(in_.world, drone_, in_.equipment.detector.max_range_m, now);
            detections = detector_.detect(truth, drone_, tick_);
        }
        if (observer_) observer_({tick_, rec_.now_s(), state_, drone_, holds_});

        // plan
        const sim::FlightCommand command = plan(estimate, detections);
        if (state_.terminal()) break;

        // act
        const sim::DroneState before = drone_;
        drone_ = sim::step_drone(drone_, command, in_.world, in_.equipment.limits, in_.equipment.power);
        odometer_m_ += geo::haversine_distance(before.position, drone_.position, in_.world.earth_radius_m);

        // report, from the pre-tick snapshot
        if (is_airborne(phase()) && tick_ % period == 0) send_telemetry(fix, baro_alt);
        ++tick_;
    }
    return std::move(result_);
}

}  // namespace

MissionResult launch(const LaunchInputs& inputs, CloudLink& cloud, ServoLink& servo, const TickObserver& observer) {
    Runner runner(inputs, cloud, servo, observer);
    return runner.run();
}

}  // namespace dd::mission
