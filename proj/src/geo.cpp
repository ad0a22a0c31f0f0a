#include "dronedelivery/geo.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>

#include "dronedelivery/error.hpp"

namespace dd::geo {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

}  // namespace

GeoPoint::GeoPoint(double lat, double lon, double alt) : lat_(lat), lon_(lon), alt_(alt) {
    if (!std::isfinite(lat) || lat < -90.0 || lat > 90.0) {
        fail(ErrorCode::Validation, "latitude out of range [-90, 90]", std::to_string(lat));
    }
    if (!std::isfinite(lon) || lon < -180.0 || lon > 180.0) {
        fail(ErrorCode::Validation, "longitude out of range [-180, 180]", std::to_string(lon));
    }
    if (!std::isfinite(alt) || alt < 0.0) {
        fail(ErrorCode::Validation, "altitude must be finite and non-negative", std::to_string(alt));
    }
}

double haversine_distance(const GeoPoint& a, const GeoPoint& b, double earth_radius_m) noexcept {
    const double phi1 = a.lat() * kDegToRad;
    const double phi2 = b.lat() * kDegToRad;
    const double dphi = phi2 - phi1;
    const double dlambda = (b.lon() - a.lon()) * kDegToRad;
    const double s_phi = std::sin(dphi / 2.0);
    const double s_lambda = std::sin(dlambda / 2.0);
    // The product cos(phi1)*cos(phi2) commutes exactly, so d(a,b) == d(b,a)
    // bit for bit; sin^2 is even in its argument.
    double h = s_phi * s_phi + std::cos(phi1) * std::cos(phi2) * s_lambda * s_lambda;
    h = std::clamp(h, 0.0, 1.0);
    return 2.0 * earth_radius_m * std::asin(std::sqrt(h));
}

bool within_radius(const GeoPoint& a, const GeoPoint& b, double r_m, double earth_radius_m) {
    if (!(r_m >= 0.0)) fail(ErrorCode::Validation, "radius must be non-negative", std::to_string(r_m));
    return haversine_distance(a, b, earth_radius_m) <= r_m;
}

double initial_bearing_deg(const GeoPoint& a, const GeoPoint& b) noexcept {
    const double phi1 = a.lat() * kDegToRad;
    const double phi2 = b.lat() * kDegToRad;
    const double dlambda = (b.lon() - a.lon()) * kDegToRad;
    const double y = std::sin(dlambda) * std::cos(phi2);
    const double x = std::cos(phi1) * std::sin(phi2) - std::sin(phi1) * std::cos(phi2) * std::cos(dlambda);
    return wrap_heading_deg(std::atan2(y, x) * kRadToDeg);
}

GeoPoint destination_point(const GeoPoint& origin, double bearing_deg, double distance_m,
                           double earth_radius_m) {
    if (distance_m == 0.0) return origin;
    const double delta = distance_m / earth_radius_m;
    const double theta = bearing_deg * kDegToRad;
    const double phi1 = origin.lat() * kDegToRad;
    const double lambda1 = origin.lon() * kDegToRad;
    const double sin_phi2 = std::sin(phi1) * std::cos(delta) + std::cos(phi1) * std::sin(delta) * std::cos(theta);
    const double phi2 = std::asin(std::clamp(sin_phi2, -1.0, 1.0));
    const double lambda2 = lambda1 + std::atan2(std::sin(theta) * std::sin(delta) * std::cos(phi1),
                                                std::cos(delta) - std::sin(phi1) * sin_phi2);
    return {std::clamp(phi2 * kRadToDeg, -90.0, 90.0), wrap_lon_deg(lambda2 * kRadToDeg), origin.alt()};
}

GeoPoint offset_ne(const GeoPoint& origin, double north_m, double east_m, double earth_radius_m) {
    const double lat = origin.lat() + north_m / earth_radius_m * kRadToDeg;
    const double cos_lat = std::max(std::cos(origin.lat() * kDegToRad), 1e-12);
    const double lon = origin.lon() + east_m / (earth_radius_m * cos_lat) * kRadToDeg;
    return {std::clamp(lat, -90.0, 90.0), wrap_lon_deg(lon), origin.alt()};
}

LocalNE to_local_ne(const GeoPoint& origin, const GeoPoint& p, double earth_radius_m) noexcept {
    double dlon = p.lon() - origin.lon();
    if (dlon > 180.0) dlon -= 360.0;
    if (dlon < -180.0) dlon += 360.0;
    const double cos_lat = std::cos(origin.lat() * kDegToRad);
    return {(p.lat() - origin.lat()) * kDegToRad * earth_radius_m,
            dlon * kDegToRad * earth_radius_m * cos_lat};
}

double wrap_lon_deg(double lon) noexcept {
    if (lon >= -180.0 && lon <= 180.0) return lon;
    double w = std::fmod(lon + 180.0, 360.0);
    if (w < 0.0) w += 360.0;
    return w - 180.0;
}

double wrap_heading_deg(double heading) noexcept {
    double w = std::fmod(heading, 360.0);
    if (w < 0.0) w += 360.0;
    if (w >= 360.0) w = 0.0;
    return w;
}

std::string normalize_address_text(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

Address Address::from_text(const std::string& text) {
    Address a;
    a.lines.push_back(text);
    return a;
}

std::string Address::text() const {
    std::ostringstream os;
    bool first = true;
    auto put = [&](const std::string& part) {
        if (normalize_address_text(part).empty()) return;
        if (!first) os << ", ";
        os << part;
        first = false;
    };
    for (const auto& line : lines) put(line);
    put(locality);
    if (postal_code) put(*postal_code);
    return os.str();
}

std::string Address::normalized() const { return normalize_address_text(text()); }

void Address::validate() const {
    const bool any = std::any_of(lines.begin(), lines.end(),
                                 [](const std::string& l) { return !normalize_address_text(l).empty(); });
    if (!any) fail(ErrorCode::Validation, "address needs at least one non-empty line");
}

}  // namespace dd::geo
