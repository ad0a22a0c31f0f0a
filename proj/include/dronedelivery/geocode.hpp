#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "dronedelivery/geo.hpp"

namespace dd::geo {

enum class GeocodeMode { Live, Fixture };

GeocodeMode parse_geocode_mode(const std::string& text);

// Backend behind live mode. Returns nullopt when the service knows no match;
// throws dd::Error(Unavailable) on transport failure.
class GeocodeBackend {
public:
    virtual ~GeocodeBackend() = default;
    virtual std::optional<GeoPoint> lookup(const Address& address) = 0;
};

struct NominatimOptions {
    std::string base_url = "https://nominatim.openstreetmap.org";
    std::string user_agent = "dronedelivery/0.1";
    std::chrono::milliseconds timeout{10'000};
};

// Nominatim /search client.
class NominatimBackend final : public GeocodeBackend {
public:
    explicit NominatimBackend(NominatimOptions options = {});
    std::optional<GeoPoint> lookup(const Address& address) override;

private:
    NominatimOptions options_;
};

struct RateLimit {
    double requests_per_second = 1.0;
};

using FixtureTable = std::map<std::string, GeoPoint>;  // normalized address -> point

// Accepts a JSON array of {address, lat, lon} or newline-delimited records.
FixtureTable load_fixture_table(const std::filesystem::path& path);
FixtureTable parse_fixture_table(const std::string& text);

// Resolves addresses to points. Fixture mode never touches a backend; live
// mode consults the cache, then the rate-limited backend. Safe for concurrent use.
class GeocodeProvider {
public:
    static GeocodeProvider fixture(FixtureTable table);
    static GeocodeProvider live(std::shared_ptr<GeocodeBackend> backend, RateLimit limit = {});

    GeocodeMode mode() const noexcept { return mode_; }

    // Throws dd::Error(UnresolvableAddress) when nothing matches.
    GeoPoint geocode(const Address& address);

    std::size_t cache_size() const;

    GeocodeProvider(GeocodeProvider&&) noexcept;
    GeocodeProvider& operator=(GeocodeProvider&&) noexcept;
    ~GeocodeProvider();

private:
    GeocodeProvider() = default;
    void wait_for_slot();

    GeocodeMode mode_ = GeocodeMode::Fixture;
    FixtureTable fixtures_;
    std::shared_ptr<GeocodeBackend> backend_;
    RateLimit limit_;

    mutable std::unique_ptr<std::mutex> cache_mutex_ = std::make_unique<std::mutex>();
    std::map<std::string, GeoPoint> cache_;
    std::unique_ptr<std::mutex> rate_mutex_ = std::make_unique<std::mutex>();
    std::optional<std::chrono::steady_clock::time_point> last_request_;
};

// Convenience wrapper for the free-function form.
inline GeoPoint geocode(const Address& address, GeocodeProvider& provider) { return provider.geocode(address); }

}  // namespace dd::geo
