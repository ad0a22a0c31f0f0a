#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dronedelivery/rng.hpp"
#include "dronedelivery/world.hpp"

namespace dd::perception {

using Rgb = std::array<std::uint8_t, 3>;

struct ColorCode {
    int index = 0;
    Rgb rgb{};

    friend bool operator==(const ColorCode&, const ColorCode&) = default;
};

// Fixed set of door colors. The default is chosen by greedy farthest-point
// selection over the 6x6x6 web-safe cube, starting from black.
class Palette {
public:
    explicit Palette(std::vector<Rgb> colors);
    static const Palette& default16();
    static Palette farthest_point(std::size_t size);

    std::size_t size() const noexcept { return colors_.size(); }
    ColorCode code(int index) const;
    bool contains(const ColorCode& code) const noexcept;
    const std::vector<Rgb>& colors() const noexcept { return colors_; }

private:
    std::vector<Rgb> colors_;
};

// Exact palette-index comparison. Throws if either code is not from `palette`.
bool match_color(const ColorCode& observed, const ColorCode& expected, const Palette& palette = Palette::default16());

// Stochastic stand-in for an onboard vision model. Values for the named
// models are illustrative configuration, not measurements.
struct DetectorProfile {
    std::string label = "yolov4-tiny";
    double true_positive_prob = 0.95;
    double false_positive_per_min = 0.5;
    double max_range_m = 40.0;
    double height_sigma_m = 1.0;
    int latency_ticks = 1;
    double misread_rate = 0.0;
    double scan_range_m = 3.0;
};

DetectorProfile detector_profile_by_name(const std::string& name);
void validate(const DetectorProfile& profile);

struct Detection {
    std::string obstacle_id;
    double estimated_height_m = 0.0;
    long long detected_at = 0;     // tick the obstacle was observed
    long long available_at = 0;    // detected_at + latency
    geo::GeoPoint footprint_center;
    double footprint_radius_m = 0.0;
    bool false_positive = false;
};

// Owns the detector's RNG position and its in-flight inference queue.
class ObstacleDetector {
public:
    ObstacleDetector(DetectorProfile profile, Rng rng, double dt_s);

    // Observes `truth` at `tick` and returns every detection whose inference
    // finishes at this tick.
    std::vector<Detection> detect(const std::vector<sim::ObstacleAhead>& truth, const sim::DroneState& drone,
                                  long long tick);

    const DetectorProfile& profile() const noexcept { return profile_; }

private:
    DetectorProfile profile_;
    Rng rng_;
    double dt_s_;
    std::deque<Detection> pending_;
};

struct ScanConditions {
    double scan_altitude_m = 2.0;
    double altitude_tolerance_m = 0.25;
};

std::optional<ColorCode> scan_door(const sim::DroneState& drone, const sim::Door& door, const DetectorProfile& profile,
                                   Rng& rng, const ScanConditions& conditions = {},
                                   const Palette& palette = Palette::default16());

struct FaceSample {
    double t_s = 0.0;
    double confidence = 0.0;
};

// Recipient face-confidence samples, offsets relative to the start of the
// authentication window. Each sample is delivered at most once.
class FaceStream {
public:
    FaceStream() = default;
    explicit FaceStream(std::vector<FaceSample> samples);

    // Latest unconsumed sample with t <= now; earlier unconsumed ones are
    // consumed with it.
    std::optional<double> next(double now_s);

    const std::vector<FaceSample>& samples() const noexcept { return samples_; }
    std::size_t consumed() const noexcept { return cursor_; }

private:
    std::vector<FaceSample> samples_;
    std::size_t cursor_ = 0;
};

inline std::optional<double> next_face_sample(FaceStream& stream, double now_s) { return stream.next(now_s); }

}  // namespace dd::perception
