#include "dronedelivery/perception.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "dronedelivery/error.hpp"

namespace dd::perception {

Palette::Palette(std::vector<Rgb> colors) : colors_(std::move(colors)) {
    if (colors_.empty()) fail(ErrorCode::Validation, "palette must not be empty");
    std::set<Rgb> seen(colors_.begin(), colors_.end());
    if (seen.size() != colors_.size()) fail(ErrorCode::Validation, "palette colors must be distinct");
}

Palette Palette::farthest_point(std::size_t size) {
    std::vector<Rgb> candidates;
    for (int r = 0; r < 6; ++r)
        for (int g = 0; g < 6; ++g)
            for (int b = 0; b < 6; ++b)
                candidates.push_back({static_cast<std::uint8_t>(r * 51), static_cast<std::uint8_t>(g * 51),
                                      static_cast<std::uint8_t>(b * 51)});
    if (size == 0 || size > candidates.size()) fail(ErrorCode::Validation, "palette size out of range");

    auto dist2 = [](const Rgb& a, const Rgb& b) {
        int s = 0;
        for (int i = 0; i < 3; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        return s;
    };
    std::vector<Rgb> chosen{candidates.front()};
    std::vector<int> nearest(candidates.size(), std::numeric_limits<int>::max());
    while (chosen.size() < size) {
        std::size_t best = 0;
        int best_d = -1;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            nearest[i] = std::min(nearest[i], dist2(candidates[i], chosen.back()));
            if (nearest[i] > best_d) {
                best_d = nearest[i];
                best = i;
            }
        }
        chosen.push_back(candidates[best]);
    }
    return Palette(std::move(chosen));
}

const Palette& Palette::default16() {
    static const Palette palette = farthest_point(16);
    return palette;
}

ColorCode Palette::code(int index) const {
    if (index < 0 || static_cast<std::size_t>(index) >= colors_.size()) {
        fail(ErrorCode::Validation, "palette index out of range", std::to_string(index));
    }
    return {index, colors_[static_cast<std::size_t>(index)]};
}

bool Palette::contains(const ColorCode& code) const noexcept {
    return code.index >= 0 && static_cast<std::size_t>(code.index) < colors_.size() &&
           colors_[static_cast<std::size_t>(code.index)] == code.rgb;
}

bool match_color(const ColorCode& observed, const ColorCode& expected, const Palette& palette) {
    if (!palette.contains(observed) || !palette.contains(expected)) {
        fail(ErrorCode::Validation, "color codes are not from the same palette");
    }
    return observed.index == expected.index;
}

DetectorProfile detector_profile_by_name(const std::string& name) {
    DetectorProfile p;
    p.label = name;
    if (name == "yolov4-tiny") {
        p.true_positive_prob = 0.95;
        p.latency_ticks = 1;
        p.height_sigma_m = 1.0;
    } else if (name == "mobilenet") {
        p.true_positive_prob = 0.90;
        p.latency_ticks = 2;
        p.height_sigma_m = 1.5;
    } else if (name == "efficientdet") {
        p.true_positive_prob = 0.97;
        p.latency_ticks = 4;
        p.height_sigma_m = 0.8;
    } else {
        fail(ErrorCode::Validation, "unknown detector profile", name);
    }
    return p;
}

void validate(const DetectorProfile& p) {
    auto prob = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
    if (!prob(p.true_positive_prob)) fail(ErrorCode::Validation, "true-positive probability must be in [0, 1]", p.label);
    if (!prob(p.misread_rate)) fail(ErrorCode::Validation, "misread rate must be in [0, 1]", p.label);
    if (p.true_positive_prob + p.misread_rate > 1.0 + 1e-12) {
        fail(ErrorCode::Validation, "true-positive probability plus misread rate exceeds 1", p.label);
    }
    if (!std::isfinite(p.false_positive_per_min) || p.false_positive_per_min < 0.0) {
        fail(ErrorCode::Validation, "false-positive rate must be >= 0", p.label);
    }
    if (!(p.max_range_m > 0.0)) fail(ErrorCode::Validation, "max detection range must be > 0", p.label);
    if (!(p.height_sigma_m >= 0.0)) fail(ErrorCode::Validation, "height sigma must be >= 0", p.label);
    if (p.latency_ticks < 0) fail(ErrorCode::Validation, "latency must be >= 0 ticks", p.label);
    if (!(p.scan_range_m > 0.0)) fail(ErrorCode::Validation, "scan range must be > 0", p.label);
}

ObstacleDetector::ObstacleDetector(DetectorProfile profile, Rng rng, double dt_s)
    : profile_(std::move(profile)), rng_(std::move(rng)), dt_s_(dt_s) {
    validate(profile_);
}

std::vector<Detection> ObstacleDetector::detect(const std::vector<sim::ObstacleAhead>& truth,
                                                const sim::DroneState& drone, long long tick) {
    const long long ready = tick + profile_.latency_ticks;
    for (const auto& seen : truth) {
        if (seen.distance_m > profile_.max_range_m) continue;
        if (!rng_.bernoulli(profile_.true_positive_prob)) continue;
        double h = seen.obstacle.height_m;
        if (profile_.height_sigma_m > 0.0) h = std::max(0.0, h + rng_.normal(0.0, profile_.height_sigma_m));
        pending_.push_back({seen.obstacle.id, h, tick, ready, seen.obstacle.center, seen.obstacle.radius_m, false});
    }

    const double mean = profile_.false_positive_per_min / 60.0 * dt_s_;
    const std::uint32_t phantoms = rng_.poisson(mean);
    for (std::uint32_t k = 0; k < phantoms; ++k) {
        const double h = rng_.uniform(1.0, 20.0);
        const double range = rng_.uniform(0.0, profile_.max_range_m);
        const auto center = geo::destination_point(drone.position, drone.heading_deg, range).with_alt(0.0);
        pending_.push_back({"fp-" + std::to_string(tick) + "-" + std::to_string(k), h, tick, ready, center, 2.0, true});
    }

    std::vector<Detection> out;
    while (!pending_.empty() && pending_.front().available_at <= tick) {
        out.push_back(std::move(pending_.front()));
        pending_.pop_front();
    }
    return out;
}

std::optional<ColorCode> scan_door(const sim::DroneState& drone, const sim::Door& door, const DetectorProfile& profile,
                                   Rng& rng, const ScanConditions& conditions, const Palette& palette) {
    if (!door.color_index) return std::nullopt;
    if (*door.color_index < 0 || static_cast<std::size_t>(*door.color_index) >= palette.size()) return std::nullopt;
    if (geo::haversine_distance(drone.position, door.position) > profile.scan_range_m) return std::nullopt;
    if (std::abs(drone.position.alt() - conditions.scan_altitude_m) > conditions.altitude_tolerance_m) {
        return std::nullopt;
    }

    const double u = rng.uniform();
    if (u < profile.true_positive_prob) return palette.code(*door.color_index);
    if (u < profile.true_positive_prob + profile.misread_rate && palette.size() > 1) {
        auto other = static_cast<int>(rng.below(palette.size() - 1));
        if (other >= *door.color_index) ++other;
        return palette.code(other);
    }
    return std::nullopt;
}

FaceStream::FaceStream(std::vector<FaceSample> samples) : samples_(std::move(samples)) {
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        const auto& s = samples_[i];
        if (!std::isfinite(s.t_s) || s.t_s < 0.0) fail(ErrorCode::Validation, "face sample time must be >= 0");
        if (!(s.confidence >= 0.0 && s.confidence <= 1.0)) {
            fail(ErrorCode::Validation, "face confidence must be in [0, 1]");
        }
        if (i > 0 && !(s.t_s > samples_[i - 1].t_s)) {
            fail(ErrorCode::Validation, "face sample times must strictly increase");
        }
    }
}

std::optional<double> FaceStream::next(double now_s) {
    std::optional<double> latest;
    while (cursor_ < samples_.size() && samples_[cursor_].t_s <= now_s + 1e-9) {
        latest = samples_[cursor_].confidence;
        ++cursor_;
    }
    return latest;
}

}  // namespace dd::perception
