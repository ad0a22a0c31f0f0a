#include <atomic>
#include <cmath>
#include <cstring>
#include <numbers>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "dronedelivery/error.hpp"
#include "dronedelivery/geo.hpp"
#include "dronedelivery/geocode.hpp"
#include "oracles.hpp"

using namespace dd;
using geo::GeoPoint;

TEST(Haversine, IdentityIsZero) {
    const GeoPoint a(48.8566, 2.3522, 35.0);
    EXPECT_EQ(geo::haversine_distance(a, a), 0.0);
}

TEST(Haversine, EquatorialAntipode) {
    const double d = geo::haversine_distance({0, 0}, {0, 180});
    EXPECT_NEAR(d, std::numbers::pi * geo::kDefaultEarthRadiusM, 1e-6);
}

TEST(Haversine, ParisLondonAgainstCosineLaw) {
    const GeoPoint paris(48.8566, 2.3522), london(51.5074, -0.1278);
    const double expected = oracle::cosine_law_distance(48.8566, 2.3522, 51.5074, -0.1278);
    EXPECT_NEAR(geo::haversine_distance(paris, london) / expected, 1.0, 1e-6);
}

TEST(Haversine, AltitudeIgnored) {
    EXPECT_EQ(geo::haversine_distance({10, 20, 0}, {10.001, 20, 0}),
              geo::haversine_distance({10, 20, 500}, {10.001, 20, 3}));
}

TEST(Haversine, SymmetryAndTriangleInequality) {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> lat(-85, 85), lon(-180, 180);
    for (int i = 0; i < 500; ++i) {
        const GeoPoint a(lat(gen), lon(gen)), b(lat(gen), lon(gen)), c(lat(gen), lon(gen));
        const double ab = geo::haversine_distance(a, b);
        EXPECT_DOUBLE_EQ(ab, geo::haversine_distance(b, a));
        EXPECT_LE(ab, geo::haversine_distance(a, c) + geo::haversine_distance(c, b) + 1e-6);
        EXPECT_GE(ab, 0.0);
    }
}

TEST(Haversine, SmallSeparationsWithinOneMillimetre) {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> lat(-70, 70), lon(-180, 180), off(-0.0006, 0.0006);
    for (int i = 0; i < 1000; ++i) {
        const double la = lat(gen), lo = lon(gen);
        const double lb = la + off(gen), lob = lo + off(gen);
        const double expected = oracle::cosine_law_distance(la, lo, lb, lob);
        if (expected < 0.5 || expected >= 100.0) continue;
        EXPECT_NEAR(geo::haversine_distance({la, lo}, {lb, lob}), expected, 1e-3);
    }
}

TEST(GeoPoint, RejectsOutOfRange) {
    EXPECT_THROW(GeoPoint(91, 0), Error);
    EXPECT_THROW(GeoPoint(0, 181), Error);
    EXPECT_THROW(GeoPoint(std::nan(""), 0), Error);
}

TEST(WithinRadius, Basics) {
    EXPECT_TRUE(geo::within_radius({1, 1}, {1, 1}, 0.0));
    EXPECT_FALSE(geo::within_radius({0, 0}, {0, 180}, 6.0));
    EXPECT_THROW(geo::within_radius({0, 0}, {0, 0}, -1.0), Error);
}

TEST(WithinRadius, MeridianInversionAroundSixMetres) {
    for (double lat0 : {-60.0, 0.0, 10.0, 45.0}) {
        const GeoPoint a(lat0, 20.0);
        const GeoPoint inside(oracle::lat_after_meridian_move(lat0, 5.99), 20.0);
        const GeoPoint outside(oracle::lat_after_meridian_move(lat0, 6.01), 20.0);
        EXPECT_TRUE(geo::within_radius(a, inside, 6.0)) << lat0;
        EXPECT_FALSE(geo::within_radius(a, outside, 6.0)) << lat0;
    }
}

TEST(Bearing, CardinalDirections) {
    EXPECT_NEAR(geo::initial_bearing_deg({0, 0}, {1, 0}), 0.0, 1e-9);
    EXPECT_NEAR(geo::initial_bearing_deg({0, 0}, {0, 1}), 90.0, 1e-9);
    EXPECT_NEAR(geo::initial_bearing_deg({0, 0}, {-1, 0}), 180.0, 1e-9);
    EXPECT_NEAR(geo::initial_bearing_deg({0, 0}, {0, -1}), 270.0, 1e-9);
}

TEST(DestinationPoint, RoundTripsThroughDistanceAndBearing) {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> lat(-60, 60), lon(-179, 179), brg(0, 360), dist(1, 5000);
    for (int i = 0; i < 200; ++i) {
        const GeoPoint o(lat(gen), lon(gen));
        const double b = brg(gen), d = dist(gen);
        const GeoPoint p = geo::destination_point(o, b, d);
        EXPECT_NEAR(geo::haversine_distance(o, p), d, 1e-6 * d);
        const double back = geo::initial_bearing_deg(o, p);
        EXPECT_LT(std::abs(std::remainder(back - b, 360.0)), 1e-6);
    }
}

TEST(LocalFrame, OffsetAndBack) {
    const GeoPoint o(10, 20);
    const auto p = geo::offset_ne(o, 30.0, -40.0);
    const auto ne = geo::to_local_ne(o, p);
    EXPECT_NEAR(ne.north, 30.0, 1e-3);
    EXPECT_NEAR(ne.east, -40.0, 1e-3);
    EXPECT_NEAR(geo::haversine_distance(o, p), 50.0, 1e-2);
}

TEST(Address, Normalization) {
    EXPECT_EQ(geo::normalize_address_text("  1   Depot\tLane "), "1 depot lane");
    EXPECT_EQ(geo::Address::from_text("1 Depot Lane").normalized(),
              geo::Address::from_text("1  DEPOT lane").normalized());
}

TEST(Geocode, FixtureRoundTrip) {
    auto provider = geo::GeocodeProvider::fixture({{geo::normalize_address_text("1 Depot Lane"), GeoPoint(10, 20, 0)}});
    EXPECT_EQ(geo::geocode(geo::Address::from_text("1 Depot Lane"), provider), GeoPoint(10.0, 20.0, 0.0));
}

TEST(Geocode, FixtureMissIsUnresolvable) {
    auto provider = geo::GeocodeProvider::fixture({});
    try {
        provider.geocode(geo::Address::from_text("nowhere"));
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnresolvableAddress);
    }
}

namespace {
class CountingBackend : public geo::GeocodeBackend {
public:
    std::optional<GeoPoint> lookup(const geo::Address& address) override {
        ++calls;
        if (address.normalized().find("unknown") != std::string::npos) return std::nullopt;
        return GeoPoint(1.25, 2.5, 0.0);
    }
    std::atomic<int> calls{0};
};
}  // namespace

TEST(Geocode, LiveQueriesAreCachedPerNormalizedAddress) {
    auto backend = std::make_shared<CountingBackend>();
    auto provider = geo::GeocodeProvider::live(backend, {1000.0});
    const auto a = provider.geocode(geo::Address::from_text("5 Main St"));
    const auto b = provider.geocode(geo::Address::from_text("  5 main   ST"));
    EXPECT_EQ(backend->calls, 1);
    EXPECT_EQ(std::memcmp(&a, &b, sizeof a), 0);
    EXPECT_EQ(provider.cache_size(), 1u);
}

TEST(Geocode, LiveMissIsNotCached) {
    auto backend = std::make_shared<CountingBackend>();
    auto provider = geo::GeocodeProvider::live(backend, {1000.0});
    EXPECT_THROW(provider.geocode(geo::Address::from_text("unknown road")), Error);
    EXPECT_THROW(provider.geocode(geo::Address::from_text("unknown road")), Error);
    EXPECT_EQ(backend->calls, 2);
}

TEST(Geocode, LiveConcurrentCallers) {
    auto backend = std::make_shared<CountingBackend>();
    auto provider = geo::GeocodeProvider::live(backend, {1000.0});
    std::vector<std::thread> threads;
    for (int i = 0; i < 4; ++i) {
        threads.emplace_back([&] {
            for (int j = 0; j < 20; ++j) provider.geocode(geo::Address::from_text("9 Side Rd"));
        });
    }
    for (auto& t : threads) t.join();
    EXPECT_EQ(provider.cache_size(), 1u);
    EXPECT_GE(backend->calls, 1);
}

TEST(Geocode, FixtureTableParsesJsonAndLines) {
    const auto j = geo::parse_fixture_table(R"([{"address": "A St", "lat": 1, "lon": 2}])");
    ASSERT_EQ(j.size(), 1u);
    EXPECT_EQ(j.begin()->second, GeoPoint(1, 2));
    const auto l = geo::parse_fixture_table("{\"address\": \"B St\", \"lat\": 3, \"lon\": 4}\n");
    ASSERT_EQ(l.size(), 1u);
}
