#pragma once

#include <array>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dronedelivery/geocode.hpp"
#include "dronedelivery/mission.hpp"
#include "dronedelivery/rng.hpp"

namespace dd::cloud {

using geo::GeoPoint;

enum class OrderStatus { Placed, Dispatched, InFlight, PackageReceived, NotDelivered, MissedDelivery };

inline constexpr std::array kAllStatuses{OrderStatus::Placed,          OrderStatus::Dispatched,
                                         OrderStatus::InFlight,        OrderStatus::PackageReceived,
                                         OrderStatus::NotDelivered,    OrderStatus::MissedDelivery};

std::string_view status_name(OrderStatus s) noexcept;
std::optional<OrderStatus> parse_status(std::string_view text) noexcept;
bool is_terminal(OrderStatus s) noexcept;
// Placed -> Dispatched -> InFlight -> {PackageReceived | NotDelivered | MissedDelivery}.
bool status_step_legal(OrderStatus from, OrderStatus to) noexcept;
// Aborted missions end as NotDelivered.
OrderStatus status_for_outcome(mission::Outcome outcome) noexcept;

inline constexpr std::string_view kDeliveryIdAlphabet = "ABCDEFGHJKLMNPQRSTUVWXYZ23456789";
inline constexpr std::size_t kDeliveryIdLength = 10;
inline constexpr int kDeliveryIdAttempts = 100;

// Draws ids until `taken` rejects none; gives up after 100 collisions.
std::string generate_delivery_id(Rng& rng, const std::function<bool(const std::string&)>& taken);

std::string sha256_hex(const std::string& bytes);
std::string base64_encode(const std::string& bytes);
// Throws dd::Error(Validation) on malformed input.
std::string base64_decode(const std::string& text);

nlohmann::json address_to_json(const geo::Address& a);
// Accepts free text or {lines, locality, postal_code}.
geo::Address address_from_json(const nlohmann::json& j);

struct UserAccount {
    std::string user_id;
    std::string name;
    std::string building_id;
    perception::ColorCode color;
    std::string face_digest;  // empty once the image is deleted
    double created_at = 0.0;
};

struct Order {
    std::string delivery_id;
    std::string user_id;
    geo::Address address;
    GeoPoint destination;
    std::string building_id;
    OrderStatus status = OrderStatus::Placed;
    double created_at = 0.0;
    double updated_at = 0.0;
    std::optional<std::string> operator_id;
    std::optional<std::string> last_error;
};

struct TelemetrySample {
    std::string delivery_id;
    double t_s = 0.0;
    GeoPoint position;
    double battery_fraction = 0.0;
    std::string state;
};

struct Notification {
    long long seq = 0;
    std::string user_id;
    mission::NoticeKind kind = mission::NoticeKind::AcceptDelivery;
    std::string delivery_id;
    double timestamp = 0.0;
    int delivery_count = 1;
};

struct Track {
    OrderStatus status = OrderStatus::Placed;
    std::vector<TelemetrySample> samples;
};

struct FaceImage {
    std::string digest;
    std::string bytes;
};

nlohmann::json to_json(const UserAccount& u);
nlohmann::json to_json(const Order& o);
nlohmann::json to_json(const TelemetrySample& s);
nlohmann::json to_json(const Notification& n);

// Append-only newline-delimited event file. Every append is flushed and
// fsync'd before it returns; a torn last line is ignored on replay.
class EventStore {
public:
    explicit EventStore(std::filesystem::path file);
    ~EventStore();
    EventStore(const EventStore&) = delete;
    EventStore& operator=(const EventStore&) = delete;

    std::vector<nlohmann::json> replay() const;
    void append(const nlohmann::json& event);
    const std::filesystem::path& path() const noexcept { return file_; }

private:
    std::filesystem::path file_;
    int fd_ = -1;
};

struct ServiceOptions {
    std::optional<std::filesystem::path> data_dir;  // in-memory when absent
    std::optional<std::uint64_t> id_seed;          // random when absent
    std::function<double()> clock;                 // wall seconds by default
    std::set<std::string> buildings;               // any building accepted when empty
};

// The coordination service. All mutations are validated, persisted, then
// applied, under one lock; readers see the last acknowledged write.
class Service {
public:
    Service(ServiceOptions options, geo::GeocodeProvider geocoder);
    ~Service();

    UserAccount register_user(const std::string& name, const std::string& face_image, const std::string& building_id);
    void delete_user(const std::string& user_id);
    void delete_face_image(const std::string& user_id);
    UserAccount get_user(const std::string& user_id) const;
    std::size_t user_count() const;

    Order place_order(const std::string& user_id, const geo::Address& address);
    Order get_order(const std::string& delivery_id) const;
    std::size_t order_count() const;
    mission::MissionParams dispatch(const std::string& delivery_id, const std::string& operator_id);
    Order mark_in_flight(const std::string& delivery_id);
    Order set_status(const std::string& delivery_id, mission::Outcome outcome);
    void record_error(const std::string& delivery_id, const std::string& reason);

    // False when the sample was dropped as out of order.
    bool ingest_telemetry(const TelemetrySample& sample);
    Track get_track(const std::string& delivery_id, std::optional<double> after = std::nullopt) const;
    std::uint64_t dropped_telemetry() const;

    Notification notify(const std::string& user_id, mission::NoticeKind kind, const std::string& delivery_id);
    Notification notify_delivery(const std::string& delivery_id, mission::NoticeKind kind);
    std::vector<Notification> notifications(const std::string& user_id, long long after_seq = 0) const;
    // Blocks until a notification newer than `after_seq` exists or the timeout passes.
    std::vector<Notification> wait_notifications(const std::string& user_id, long long after_seq,
                                                 std::chrono::milliseconds timeout) const;

    FaceImage fetch_face_image(const std::string& delivery_id) const;

    // Audit trail of one order's status changes, oldest first.
    std::vector<OrderStatus> status_history(const std::string& delivery_id) const;

private:
    void persist_and_apply(nlohmann::json event);
    void apply(const nlohmann::json& event);
    double now() const;
    const Order& order_ref(const std::string& delivery_id) const;
    const UserAccount& user_ref(const std::string& user_id) const;

    ServiceOptions options_;
    geo::GeocodeProvider geocoder_;
    std::unique_ptr<EventStore> store_;
    Rng id_rng_;

    mutable std::mutex mu_;
    mutable std::condition_variable notified_;
    std::map<std::string, UserAccount> users_;
    std::map<std::string, std::string> images_;  // digest -> bytes
    std::map<std::string, Order> orders_;
    std::map<std::string, std::vector<OrderStatus>> history_;
    std::map<std::string, std::vector<TelemetrySample>> tracks_;
    std::vector<Notification> notifications_;
    std::uint64_t dropped_ = 0;
    std::uint64_t user_counter_ = 0;
};

// Mission-side adapter onto a Service. Telemetry goes through a background
// queue when `async_telemetry` is set so uploads never block a tick.
class ServiceLink final : public mission::CloudLink {
public:
    explicit ServiceLink(Service& service, bool async_telemetry = false, int image_unreachable_attempts = 0);
    ~ServiceLink() override;

    void mission_launched(const std::string& delivery_id) override;
    void notify(const std::string& delivery_id, mission::NoticeKind kind) override;
    mission::ImageFetch request_face_image(const std::string& delivery_id) override;
    void send_telemetry(const mission::TelemetryReport& report) override;
    void report_outcome(const std::string& delivery_id, mission::Outcome outcome) override;
    void report_error(const std::string& delivery_id, const std::string& reason) override;

    // Waits until queued telemetry has been ingested.
    void flush();

private:
    void drain();

    Service& service_;
    bool async_;
    int unreachable_left_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<mission::TelemetryReport> queue_;
    bool stop_ = false;
    bool busy_ = false;
    std::thread worker_;
};

}  // namespace dd::cloud
