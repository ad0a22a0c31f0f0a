#pragma once

#include <optional>
#include <string>
#include <vector>

namespace dd::geo {

inline constexpr double kDefaultEarthRadiusM = 6'371'000.0;

// Latitude/longitude in decimal degrees, altitude in meters above the ground
// reference. Construction validates ranges; an invalid GeoPoint cannot exist.
class GeoPoint {
public:
    GeoPoint() = default;
    GeoPoint(double lat, double lon, double alt = 0.0);

    double lat() const noexcept { return lat_; }
    double lon() const noexcept { return lon_; }
    double alt() const noexcept { return alt_; }

    GeoPoint with_alt(double alt) const { return {lat_, lon_, alt}; }

    friend bool operator==(const GeoPoint&, const GeoPoint&) = default;

private:
    double lat_ = 0.0;
    double lon_ = 0.0;
    double alt_ = 0.0;
};

// Great-circle distance in meters; altitude is ignored.
double haversine_distance(const GeoPoint& a, const GeoPoint& b,
                          double earth_radius_m = kDefaultEarthRadiusM) noexcept;

// Horizontal geofence test: haversine_distance(a, b) <= r. Throws on r < 0.
bool within_radius(const GeoPoint& a, const GeoPoint& b, double r_m,
                   double earth_radius_m = kDefaultEarthRadiusM);

// Initial great-circle bearing from a to b, degrees in [0, 360).
double initial_bearing_deg(const GeoPoint& a, const GeoPoint& b) noexcept;

// Point reached from `origin` after `distance_m` along the great circle with
// initial bearing `bearing_deg`. Altitude carried over; longitude wrapped.
GeoPoint destination_point(const GeoPoint& origin, double bearing_deg, double distance_m,
                           double earth_radius_m = kDefaultEarthRadiusM);

// Shift by a local north/east offset (small-distance tangent-plane approximation).
GeoPoint offset_ne(const GeoPoint& origin, double north_m, double east_m,
                   double earth_radius_m = kDefaultEarthRadiusM);

// Local tangent-plane coordinates of `p` relative to `origin`, meters.
struct LocalNE {
    double north = 0.0;
    double east = 0.0;
};
LocalNE to_local_ne(const GeoPoint& origin, const GeoPoint& p,
                    double earth_radius_m = kDefaultEarthRadiusM) noexcept;

double wrap_lon_deg(double lon) noexcept;
double wrap_heading_deg(double heading) noexcept;

struct Address {
    std::vector<std::string> lines;
    std::string locality;
    std::optional<std::string> postal_code;

    // Single-line free text; becomes one address line.
    static Address from_text(const std::string& text);

    // Comma-joined human-readable form.
    std::string text() const;
    // Key used by fixture tables and the geocode cache.
    std::string normalized() const;

    void validate() const;
};

// Trim, collapse internal whitespace, lowercase.
std::string normalize_address_text(const std::string& text);

}  // namespace dd::geo
