#include "dronedelivery/geocode.hpp"

#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "dronedelivery/error.hpp"

namespace dd::geo {

using json = nlohmann::json;

GeocodeMode parse_geocode_mode(const std::string& text) {
    if (text == "live") return GeocodeMode::Live;
    if (text == "fixture") return GeocodeMode::Fixture;
    fail(ErrorCode::Validation, "geocode mode must be 'live' or 'fixture'", text);
}

NominatimBackend::NominatimBackend(NominatimOptions options) : options_(std::move(options)) {}

std::optional<GeoPoint> NominatimBackend::lookup(const Address& address) {
    httplib::Client client(options_.base_url);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_follow_location(true);

    httplib::Params params{{"q", address.text()}, {"format", "json"}, {"limit", "1"}};
    httplib::Headers headers{{"User-Agent", options_.user_agent}};
    auto res = client.Get("/search", params, headers);
    if (!res) {
        fail(ErrorCode::Unavailable, "geocoder unreachable", httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        fail(ErrorCode::Unavailable, "geocoder returned HTTP " + std::to_string(res->status));
    }
    const json body = json::parse(res->body, nullptr, false);
    if (!body.is_array()) fail(ErrorCode::Unavailable, "geocoder returned malformed body");
    if (body.empty()) return std::nullopt;

    // Nominatim encodes coordinates as strings.
    auto number = [](const json& v) {
        return v.is_string() ? std::stod(v.get<std::string>()) : v.get<double>();
    };
    const json& hit = body.front();
    return GeoPoint(number(hit.at("lat")), number(hit.at("lon")), 0.0);
}

FixtureTable parse_fixture_table(const std::string& text) {
    FixtureTable table;
    auto add = [&](const json& entry) {
        if (!entry.is_object() || !entry.contains("address") || !entry.contains("lat") || !entry.contains("lon")) {
            fail(ErrorCode::Validation, "fixture entry needs \"address\", \"lat\" and \"lon\"", entry.dump());
        }
        const auto key = normalize_address_text(entry.at("address").get<std::string>());
        if (key.empty()) fail(ErrorCode::Validation, "fixture entry has an empty address");
        table.insert_or_assign(key, GeoPoint(entry.at("lat").get<double>(), entry.at("lon").get<double>(), 0.0));
    };

    const json doc = json::parse(text, nullptr, false);
    if (!doc.is_discarded()) {
        if (doc.is_array()) {
            for (const auto& e : doc) add(e);
        } else if (doc.is_object() && doc.contains("entries")) {
            for (const auto& e : doc.at("entries")) add(e);
        } else {
            add(doc);
        }
        return table;
    }

    std::istringstream lines(text);
    std::string line;
    int lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        if (normalize_address_text(line).empty()) continue;
        const json entry = json::parse(line, nullptr, false);
        if (entry.is_discarded()) {
            fail(ErrorCode::Validation, "fixture table parse error", "line " + std::to_string(lineno));
        }
        add(entry);
    }
    return table;
}

FixtureTable load_fixture_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Validation, "cannot open fixture table", path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_fixture_table(buf.str());
    } catch (const Error& e) {
        fail(e.code(), e.what(), path.string() + ": " + e.detail());
    }
}

GeocodeProvider GeocodeProvider::fixture(FixtureTable table) {
    GeocodeProvider p;
    p.mode_ = GeocodeMode::Fixture;
    p.fixtures_ = std::move(table);
    return p;
}

GeocodeProvider GeocodeProvider::live(std::shared_ptr<GeocodeBackend> backend, RateLimit limit) {
    if (!backend) fail(ErrorCode::Validation, "live geocoding needs a backend");
    if (!(limit.requests_per_second > 0.0)) fail(ErrorCode::Validation, "rate limit must be positive");
    GeocodeProvider p;
    p.mode_ = GeocodeMode::Live;
    p.backend_ = std::move(backend);
    p.limit_ = limit;
    return p;
}

GeocodeProvider::GeocodeProvider(GeocodeProvider&&) noexcept = default;
GeocodeProvider& GeocodeProvider::operator=(GeocodeProvider&&) noexcept = default;
GeocodeProvider::~GeocodeProvider() = default;

std::size_t GeocodeProvider::cache_size() const {
    std::lock_guard lock(*cache_mutex_);
    return cache_.size();
}

void GeocodeProvider::wait_for_slot() {
    std::lock_guard lock(*rate_mutex_);
    const auto spacing = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / limit_.requests_per_second));
    if (last_request_) {
        const auto next = *last_request_ + spacing;
        const auto now = std::chrono::steady_clock::now();
        if (now < next) std::this_thread::sleep_for(next - now);
    }
    last_request_ = std::chrono::steady_clock::now();
}

GeoPoint GeocodeProvider::geocode(const Address& address) {
    address.validate();
    const std::string key = address.normalized();
    {
        std::lock_guard lock(*cache_mutex_);
        if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }

    std::optional<GeoPoint> resolved;
    if (mode_ == GeocodeMode::Fixture) {
        if (auto it = fixtures_.find(key); it != fixtures_.end()) resolved = it->second;
    } else {
        wait_for_slot();
        resolved = backend_->lookup(address);
    }
    if (!resolved) fail(ErrorCode::UnresolvableAddress, "address could not be resolved", address.text());

    const GeoPoint point = resolved->with_alt(0.0);
    std::lock_guard lock(*cache_mutex_);
    cache_.insert_or_assign(key, point);
    return point;
}

}  // namespace dd::geo
