#include "dronedelivery/mission_log.hpp"

#include <cmath>
#include <sstream>

#include "dronedelivery/error.hpp"

namespace dd::mission {

void MissionLog::append(MissionEvent event) {
    if (!events_.empty() && event.tick < events_.back().tick) {
        fail(ErrorCode::Internal, "mission log is append-only in tick order");
    }
    events_.push_back(std::move(event));
}

std::vector<const MissionEvent*> MissionLog::of_kind(std::string_view kind) const {
    std::vector<const MissionEvent*> out;
    for (const auto& e : events_) {
        if (e.kind == kind) out.push_back(&e);
    }
    return out;
}

std::string MissionLog::to_ndjson() const {
    std::string out;
    for (const auto& e : events_) {
        ojson rec;
        rec["tick"] = e.tick;
        rec["sim_time_s"] = e.sim_time_s;
        rec["state"] = e.state;
        rec["event_kind"] = e.kind;
        rec["payload"] = e.payload;
        out += rec.dump();
        out += '\n';
    }
    return out;
}

MissionLog MissionLog::from_ndjson(const std::string& text) {
    MissionLog log;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const ojson rec = ojson::parse(line);
        log.append({rec.at("tick").get<long long>(), rec.at("sim_time_s").get<double>(),
                    rec.at("state").get<std::string>(), rec.at("event_kind").get<std::string>(), rec.at("payload")});
    }
    return log;
}

double Recorder::now_s() const noexcept {
    // Rounded to microseconds so that 200 * 0.1 prints as 20.
    return std::round(static_cast<double>(tick_) * dt_s_ * 1e6) / 1e6;
}

void Recorder::emit(std::string_view kind, ojson payload) {
    log_.append({tick_, now_s(), state_, std::string(kind), std::move(payload)});
}

std::vector<MissionState> replay_transitions(const MissionLog& log) {
    std::vector<MissionState> seq{MissionState{}};
    for (const auto& e : log.events()) {
        if (e.kind != event_kind::kStateTransition) continue;
        const auto from = parse_state_label(e.payload.at("from").get<std::string>());
        const auto to = parse_state_label(e.payload.at("to").get<std::string>());
        const auto trigger = parse_trigger(e.payload.at("trigger").get<std::string>());
        if (!from || !to || !trigger) fail(ErrorCode::Validation, "unparseable transition record", e.payload.dump());
        if (!(*from == seq.back())) {
            fail(ErrorCode::Validation, "transition does not start from the replayed state", e.payload.dump());
        }
        MissionInput input{*trigger, std::nullopt};
        if (e.payload.contains("outcome")) input.outcome = parse_outcome(e.payload.at("outcome").get<std::string>());
        const MissionState next = transition(*from, input);
        if (!(next == *to)) fail(ErrorCode::Validation, "logged transition target disagrees", e.payload.dump());
        if (e.state != state_label(next)) fail(ErrorCode::Validation, "record state disagrees with transition");
        seq.push_back(next);
    }
    return seq;
}

}  // namespace dd::mission
