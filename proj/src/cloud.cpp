#include "dronedelivery/cloud.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include <openssl/evp.h>
#include <openssl/sha.h>

#include "dronedelivery/error.hpp"

namespace dd::cloud {

using nlohmann::json;
using mission::NoticeKind;
using mission::Outcome;

std::string_view status_name(OrderStatus s) noexcept {
    switch (s) {
        case OrderStatus::Placed: return "Placed";
        case OrderStatus::Dispatched: return "Dispatched";
        case OrderStatus::InFlight: return "InFlight";
        case OrderStatus::PackageReceived: return "PackageReceived";
        case OrderStatus::NotDelivered: return "NotDelivered";
        case OrderStatus::MissedDelivery: return "MissedDelivery";
    }
    return "?";
}

std::optional<OrderStatus> parse_status(std::string_view text) noexcept {
    for (auto s : kAllStatuses) {
        if (status_name(s) == text) return s;
    }
    return std::nullopt;
}

bool is_terminal(OrderStatus s) noexcept {
    return s == OrderStatus::PackageReceived || s == OrderStatus::NotDelivered || s == OrderStatus::MissedDelivery;
}

bool status_step_legal(OrderStatus from, OrderStatus to) noexcept {
    switch (from) {
        case OrderStatus::Placed: return to == OrderStatus::Dispatched;
        case OrderStatus::Dispatched: return to == OrderStatus::InFlight;
        case OrderStatus::InFlight: return is_terminal(to);
        default: return false;
    }
}

OrderStatus status_for_outcome(Outcome outcome) noexcept {
    switch (outcome) {
        case Outcome::Delivered: return OrderStatus::PackageReceived;
        case Outcome::MissedDelivery: return OrderStatus::MissedDelivery;
        case Outcome::NotDelivered:
        case Outcome::Aborted: return OrderStatus::NotDelivered;
    }
    return OrderStatus::NotDelivered;
}

std::string generate_delivery_id(Rng& rng, const std::function<bool(const std::string&)>& taken) {
    for (int attempt = 0; attempt < kDeliveryIdAttempts; ++attempt) {
        std::string id(kDeliveryIdLength, ' ');
        for (auto& c : id) c = kDeliveryIdAlphabet[rng.below(kDeliveryIdAlphabet.size())];
        if (!taken(id)) return id;
    }
    fail(ErrorCode::Internal, "delivery id generation failed after 100 collisions");
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[SHA256_DIGEST_LENGTH];
    SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), digest);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * SHA256_DIGEST_LENGTH);
    for (unsigned char b : digest) {
        out += hex[b >> 4];
        out += hex[b & 0xF];
    }
    return out;
}

std::string base64_encode(const std::string& bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::string base64_decode(const std::string& text) {
    std::string clean;
    for (char c : text) {
        if (!std::isspace(static_cast<unsigned char>(c))) clean += c;
    }
    if (clean.size() % 4 != 0) fail(ErrorCode::Validation, "malformed base64");
    std::string out(3 * clean.size() / 4, '\0');
    const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(clean.data()), static_cast<int>(clean.size()));
    if (n < 0) fail(ErrorCode::Validation, "malformed base64");
    std::size_t len = static_cast<std::size_t>(n);
    // EVP_DecodeBlock counts padding as zero bytes.
    if (!clean.empty() && clean.back() == '=') --len;
    if (clean.size() >= 2 && clean[clean.size() - 2] == '=') --len;
    out.resize(len);
    return out;
}

json address_to_json(const geo::Address& a) {
    json j;
    j["lines"] = a.lines;
    j["locality"] = a.locality;
    j["postal_code"] = a.postal_code ? json(*a.postal_code) : json(nullptr);
    j["text"] = a.text();
    return j;
}

geo::Address address_from_json(const json& j) {
    geo::Address a;
    if (j.is_string()) {
        a = geo::Address::from_text(j.get<std::string>());
    } else if (j.is_object()) {
        if (j.contains("lines")) {
            if (!j.at("lines").is_array()) fail(ErrorCode::Validation, "address lines must be a list", "/address/lines");
            for (const auto& l : j.at("lines")) {
                if (!l.is_string()) fail(ErrorCode::Validation, "address lines must be strings", "/address/lines");
                a.lines.push_back(l.get<std::string>());
            }
        }
        if (j.contains("locality") && j.at("locality").is_string()) a.locality = j.at("locality").get<std::string>();
        if (j.contains("postal_code") && j.at("postal_code").is_string()) {
            a.postal_code = j.at("postal_code").get<std::string>();
        }
    } else {
        fail(ErrorCode::Validation, "address must be text or an object", "/address");
    }
    a.validate();
    return a;
}

json to_json(const UserAccount& u) {
    const auto& rgb = u.color.rgb;
    json j;
    j["user_id"] = u.user_id;
    j["name"] = u.name;
    j["building_id"] = u.building_id;
    j["color_code"] = {{"index", u.color.index}, {"rgb", {rgb[0], rgb[1], rgb[2]}}};
    j["face_image_ref"] = u.face_digest.empty() ? json(nullptr) : json(u.face_digest);
    j["created_at"] = u.created_at;
    return j;
}

json to_json(const Order& o) {
    json j;
    j["delivery_id"] = o.delivery_id;
    j["user_id"] = o.user_id;
    j["address"] = address_to_json(o.address);
    j["destination"] = {{"lat", o.destination.lat()}, {"lon", o.destination.lon()}, {"alt", o.destination.alt()}};
    j["building_id"] = o.building_id;
    j["status"] = status_name(o.status);
    j["created_at"] = o.created_at;
    j["updated_at"] = o.updated_at;
    j["operator_id"] = o.operator_id ? json(*o.operator_id) : json(nullptr);
    if (o.last_error) j["last_error"] = *o.last_error;
    return j;
}

json to_json(const TelemetrySample& s) {
    json j;
    j["delivery_id"] = s.delivery_id;
    j["t"] = s.t_s;
    j["lat"] = s.position.lat();
    j["lon"] = s.position.lon();
    j["alt"] = s.position.alt();
    j["battery"] = s.battery_fraction;
    j["state"] = s.state;
    return j;
}

json to_json(const Notification& n) {
    json j;
    j["seq"] = n.seq;
    j["user_id"] = n.user_id;
    j["kind"] = mission::notice_text(n.kind);
    j["delivery_id"] = n.delivery_id;
    j["timestamp"] = n.timestamp;
    j["delivery_count"] = n.delivery_count;
    return j;
}

// ---- EventStore ----------------------------------------------------------------

EventStore::EventStore(std::filesystem::path file) : file_(std::move(file)) {
    if (file_.has_parent_path()) std::filesystem::create_directories(file_.parent_path());
    fd_ = ::open(file_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) {
        fail(ErrorCode::Unavailable, "cannot open event log " + file_.string() + ": " + std::strerror(errno),
             file_.string());
    }
}

EventStore::~EventStore() {
    if (fd_ >= 0) {
        ::fsync(fd_);
        ::close(fd_);
    }
}

std::vector<json> EventStore::replay() const {
    std::vector<json> events;
    std::ifstream in(file_);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json e = json::parse(line, nullptr, false);
        // A write torn by a crash can only be the last line; it was never acknowledged.
        if (e.is_discarded()) {
            if (in.peek() == EOF) break;
            fail(ErrorCode::Internal, "corrupt event log record", file_.string());
        }
        events.push_back(std::move(e));
    }
    return events;
}

void EventStore::append(const json& event) {
    std::string line = event.dump();
    line += '\n';
    const char* p = line.data();
    std::size_t left = line.size();
    while (left > 0) {
        const ssize_t n = ::write(fd_, p, left);
        if (n < 0) {
            if (errno == EINTR) continue;
            fail(ErrorCode::Unavailable, std::string("event log write failed: ") + std::strerror(errno));
        }
        p += n;
        left -= static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) fail(ErrorCode::Unavailable, std::string("event log fsync failed: ") + std::strerror(errno));
}

// ---- Service ---------------------------------------------------------------------

namespace {

std::uint64_t seed_from(const std::optional<std::uint64_t>& seed) {
    if (seed) return *seed;
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

double wall_seconds() {
    using namespace std::chrono;
    return duration<double>(system_clock::now().time_since_epoch()).count();
}

}  // namespace

Service::Service(ServiceOptions options, geo::GeocodeProvider geocoder)
    : options_(std::move(options)), geocoder_(std::move(geocoder)), id_rng_(seed_from(options_.id_seed)) {
    if (options_.data_dir) {
        store_ = std::make_unique<EventStore>(*options_.data_dir / "events.ndjson");
        for (const auto& e : store_->replay()) apply(e);
    }
}

Service::~Service() = default;

double Service::now() const { return options_.clock ? options_.clock() : wall_seconds(); }

void Service::persist_and_apply(json event) {
    if (store_) store_->append(event);
    apply(event);
}

void Service::apply(const json& e) {
    const std::string type = e.at("type").get<std::string>();
    if (type == "image_stored") {
        images_[e.at("digest").get<std::string>()] = base64_decode(e.at("data").get<std::string>());
    } else if (type == "user_registered") {
        UserAccount u;
        u.user_id = e.at("user_id").get<std::string>();
        u.name = e.at("name").get<std::string>();
        u.building_id = e.at("building_id").get<std::string>();
        u.color = perception::Palette::default16().code(e.at("color_index").get<int>());
        u.face_digest = e.at("digest").get<std::string>();
        u.created_at = e.at("at").get<double>();
        ++user_counter_;
        users_[u.user_id] = std::move(u);
    } else if (type == "user_deleted") {
        users_.erase(e.at("user_id").get<std::string>());
    } else if (type == "image_deleted") {
        auto it = users_.find(e.at("user_id").get<std::string>());
        if (it != users_.end()) it->second.face_digest.clear();
    } else if (type == "order_placed") {
        Order o;
        o.delivery_id = e.at("delivery_id").get<std::string>();
        o.user_id = e.at("user_id").get<std::string>();
        o.address = address_from_json(e.at("address"));
        o.destination = GeoPoint(e.at("lat").get<double>(), e.at("lon").get<double>(), 0.0);
        o.building_id = e.at("building_id").get<std::string>();
        o.created_at = o.updated_at = e.at("at").get<double>();
        history_[o.delivery_id] = {OrderStatus::Placed};
        orders_[o.delivery_id] = std::move(o);
    } else if (type == "order_status") {
        Order& o = orders_.at(e.at("delivery_id").get<std::string>());
        o.status = *parse_status(e.at("status").get<std::string>());
        o.updated_at = e.at("at").get<double>();
        if (e.contains("operator_id")) o.operator_id = e.at("operator_id").get<std::string>();
        history_[o.delivery_id].push_back(o.status);
    } else if (type == "order_error") {
        Order& o = orders_.at(e.at("delivery_id").get<std::string>());
        o.last_error = e.at("reason").get<std::string>();
        o.updated_at = e.at("at").get<double>();
    } else if (type == "telemetry") {
        TelemetrySample s;
        s.delivery_id = e.at("delivery_id").get<std::string>();
        s.t_s = e.at("t").get<double>();
        s.position = GeoPoint(e.at("lat").get<double>(), e.at("lon").get<double>(), e.at("alt").get<double>());
        s.battery_fraction = e.at("battery").get<double>();
        s.state = e.at("state").get<std::string>();
        tracks_[s.delivery_id].push_back(std::move(s));
    } else if (type == "notification") {
        Notification n;
        n.seq = e.at("seq").get<long long>();
        n.user_id = e.at("user_id").get<std::string>();
        n.kind = *mission::parse_notice(e.at("kind").get<std::string>());
        n.delivery_id = e.at("delivery_id").get<std::string>();
        n.timestamp = e.at("at").get<double>();
        notifications_.push_back(std::move(n));
        notified_.notify_all();
    } else if (type == "notification_repeat") {
        const long long seq = e.at("seq").get<long long>();
        for (auto& n : notifications_) {
            if (n.seq == seq) ++n.delivery_count;
        }
    } else {
        fail(ErrorCode::Internal, "unknown event type " + type);
    }
}

const Order& Service::order_ref(const std::string& delivery_id) const {
    auto it = orders_.find(delivery_id);
    if (it == orders_.end()) fail(ErrorCode::NotFound, "no order with delivery id " + delivery_id, delivery_id);
    return it->second;
}

const UserAccount& Service::user_ref(const std::string& user_id) const {
    auto it = users_.find(user_id);
    if (it == users_.end()) fail(ErrorCode::NotFound, "no user " + user_id, user_id);
    return it->second;
}

UserAccount Service::register_user(const std::string& name, const std::string& face_image,
                                   const std::string& building_id) {
    if (name.empty()) fail(ErrorCode::Validation, "name is required", "name");
    if (face_image.empty()) fail(ErrorCode::Validation, "face image is empty", "face_image");
    if (building_id.empty()) fail(ErrorCode::Validation, "building id is required", "building_id");
    std::lock_guard lock(mu_);
    if (!options_.buildings.empty() && !options_.buildings.contains(building_id)) {
        fail(ErrorCode::NotFound, "unknown building " + building_id, building_id);
    }
    std::set<int> used;
    for (const auto& [_, u] : users_) {
        if (u.building_id == building_id) used.insert(u.color.index);
    }
    const int palette = static_cast<int>(perception::Palette::default16().size());
    int index = 0;
    while (used.contains(index)) ++index;
    if (index >= palette) {
        fail(ErrorCode::Capacity, "color palette exhausted for building " + building_id,
             std::to_string(palette) + " codes in use");
    }

    const std::string digest = sha256_hex(face_image);
    if (!images_.contains(digest)) {
        persist_and_apply({{"type", "image_stored"}, {"digest", digest}, {"data", base64_encode(face_image)}});
    }
    char id[32];
    std::snprintf(id, sizeof id, "u-%06llu", static_cast<unsigned long long>(user_counter_ + 1));
    persist_and_apply({{"type", "user_registered"},
                       {"user_id", id},
                       {"name", name},
                       {"building_id", building_id},
                       {"color_index", index},
                       {"digest", digest},
                       {"at", now()}});
    return users_.at(id);
}

void Service::delete_user(const std::string& user_id) {
    std::lock_guard lock(mu_);
    user_ref(user_id);
    persist_and_apply({{"type", "user_deleted"}, {"user_id", user_id}, {"at", now()}});
}

void Service::delete_face_image(const std::string& user_id) {
    std::lock_guard lock(mu_);
    user_ref(user_id);
    persist_and_apply({{"type", "image_deleted"}, {"user_id", user_id}, {"at", now()}});
}

UserAccount Service::get_user(const std::string& user_id) const {
    std::lock_guard lock(mu_);
    return user_ref(user_id);
}

std::size_t Service::user_count() const {
    std::lock_guard lock(mu_);
    return users_.size();
}

Order Service::place_order(const std::string& user_id, const geo::Address& address) {
    address.validate();
    std::string building;
    {
        std::lock_guard lock(mu_);
        building = user_ref(user_id).building_id;
    }
    // Geocode outside the lock; a live lookup may wait on the rate limit.
    const GeoPoint destination = geocoder_.geocode(address);

    std::lock_guard lock(mu_);
    user_ref(user_id);
    const std::string id = generate_delivery_id(id_rng_, [&](const std::string& c) { return orders_.contains(c); });
    persist_and_apply({{"type", "order_placed"},
                       {"delivery_id", id},
                       {"user_id", user_id},
                       {"address", address_to_json(address)},
                       {"lat", destination.lat()},
                       {"lon", destination.lon()},
                       {"building_id", building},
                       {"at", now()}});
    return orders_.at(id);
}

Order Service::get_order(const std::string& delivery_id) const {
    std::lock_guard lock(mu_);
    return order_ref(delivery_id);
}

std::size_t Service::order_count() const {
    std::lock_guard lock(mu_);
    return orders_.size();
}

mission::MissionParams Service::dispatch(const std::string& delivery_id, const std::string& operator_id) {
    if (operator_id.empty()) fail(ErrorCode::Validation, "operator id is required", "operator_id");
    std::lock_guard lock(mu_);
    const Order& o = order_ref(delivery_id);
    if (o.status != OrderStatus::Placed) {
        fail(ErrorCode::Conflict, "order " + delivery_id + " is " + std::string(status_name(o.status)),
             std::string(status_name(o.status)));
    }
    const UserAccount& u = user_ref(o.user_id);
    persist_and_apply({{"type", "order_status"},
                       {"delivery_id", delivery_id},
                       {"status", status_name(OrderStatus::Dispatched)},
                       {"operator_id", operator_id},
                       {"at", now()}});
    mission::MissionParams p;
    p.delivery_id = delivery_id;
    p.destination = o.destination;
    p.expected_code = u.color;
    p.face_image_ref = "/face/" + delivery_id;
    p.building_id = o.building_id;
    return p;
}

Order Service::mark_in_flight(const std::string& delivery_id) {
    std::lock_guard lock(mu_);
    const Order& o = order_ref(delivery_id);
    if (!status_step_legal(o.status, OrderStatus::InFlight)) {
        fail(ErrorCode::Conflict, "order " + delivery_id + " is " + std::string(status_name(o.status)),
             std::string(status_name(o.status)));
    }
    persist_and_apply({{"type", "order_status"},
                       {"delivery_id", delivery_id},
                       {"status", status_name(OrderStatus::InFlight)},
                       {"at", now()}});
    return orders_.at(delivery_id);
}

Order Service::set_status(const std::string& delivery_id, Outcome outcome) {
    std::lock_guard lock(mu_);
    const Order& o = order_ref(delivery_id);
    const OrderStatus next = status_for_outcome(outcome);
    if (!status_step_legal(o.status, next)) {
        fail(ErrorCode::Conflict,
             "order " + delivery_id + " cannot go from " + std::string(status_name(o.status)) + " to " +
                 std::string(status_name(next)),
             std::string(status_name(o.status)));
    }
    persist_and_apply({{"type", "order_status"},
                       {"delivery_id", delivery_id},
                       {"status", status_name(next)},
                       {"outcome", mission::outcome_name(outcome)},
                       {"at", now()}});
    return orders_.at(delivery_id);
}

void Service::record_error(const std::string& delivery_id, const std::string& reason) {
    std::lock_guard lock(mu_);
    order_ref(delivery_id);
    persist_and_apply({{"type", "order_error"}, {"delivery_id", delivery_id}, {"reason", reason}, {"at", now()}});
}

bool Service::ingest_telemetry(const TelemetrySample& s) {
    if (!std::isfinite(s.t_s) || s.t_s < 0.0) fail(ErrorCode::Validation, "telemetry time must be >= 0", "t");
    if (!(s.battery_fraction >= 0.0 && s.battery_fraction <= 1.0)) {
        fail(ErrorCode::Validation, "battery fraction must be in [0, 1]", "battery");
    }
    std::lock_guard lock(mu_);
    order_ref(s.delivery_id);
    const auto it = tracks_.find(s.delivery_id);
    if (it != tracks_.end() && !it->second.empty() && s.t_s <= it->second.back().t_s) {
        ++dropped_;
        return false;
    }
    json e = to_json(s);
    e["type"] = "telemetry";
    persist_and_apply(std::move(e));
    return true;
}

Track Service::get_track(const std::string& delivery_id, std::optional<double> after) const {
    std::lock_guard lock(mu_);
    Track t;
    t.status = order_ref(delivery_id).status;
    const auto it = tracks_.find(delivery_id);
    if (it == tracks_.end()) return t;
    for (const auto& s : it->second) {
        if (!after || s.t_s > *after) t.samples.push_back(s);
    }
    return t;
}

std::uint64_t Service::dropped_telemetry() const {
    std::lock_guard lock(mu_);
    return dropped_;
}

Notification Service::notify(const std::string& user_id, NoticeKind kind, const std::string& delivery_id) {
    std::lock_guard lock(mu_);
    user_ref(user_id);
    for (const auto& n : notifications_) {
        if (n.delivery_id == delivery_id && n.kind == kind) {
            persist_and_apply({{"type", "notification_repeat"}, {"seq", n.seq}, {"at", now()}});
            return n;
        }
    }
    const long long seq = static_cast<long long>(notifications_.size()) + 1;
    persist_and_apply({{"type", "notification"},
                       {"seq", seq},
                       {"user_id", user_id},
                       {"kind", mission::notice_text(kind)},
                       {"delivery_id", delivery_id},
                       {"at", now()}});
    return notifications_.back();
}

Notification Service::notify_delivery(const std::string& delivery_id, NoticeKind kind) {
    std::string user;
    {
        std::lock_guard lock(mu_);
        user = order_ref(delivery_id).user_id;
    }
    return notify(user, kind, delivery_id);
}

std::vector<Notification> Service::notifications(const std::string& user_id, long long after_seq) const {
    std::lock_guard lock(mu_);
    user_ref(user_id);
    std::vector<Notification> out;
    for (const auto& n : notifications_) {
        if (n.user_id == user_id && n.seq > after_seq) out.push_back(n);
    }
    return out;
}

std::vector<Notification> Service::wait_notifications(const std::string& user_id, long long after_seq,
                                                      std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mu_);
    user_ref(user_id);
    std::vector<Notification> out;
    notified_.wait_for(lock, timeout, [&] {
        out.clear();
        for (const auto& n : notifications_) {
            if (n.user_id == user_id && n.seq > after_seq) out.push_back(n);
        }
        return !out.empty();
    });
    return out;
}

FaceImage Service::fetch_face_image(const std::string& delivery_id) const {
    std::lock_guard lock(mu_);
    const Order& o = order_ref(delivery_id);
    const auto u = users_.find(o.user_id);
    if (u == users_.end() || u->second.face_digest.empty()) {
        fail(ErrorCode::NotFound, "no face image on file for delivery " + delivery_id, "missing_image");
    }
    const auto img = images_.find(u->second.face_digest);
    if (img == images_.end()) fail(ErrorCode::NotFound, "face image bytes missing", "missing_image");
    return {img->first, img->second};
}

std::vector<OrderStatus> Service::status_history(const std::string& delivery_id) const {
    std::lock_guard lock(mu_);
    order_ref(delivery_id);
    return history_.at(delivery_id);
}

// ---- ServiceLink -------------------------------------------------------------------

ServiceLink::ServiceLink(Service& service, bool async_telemetry, int image_unreachable_attempts)
    : service_(service), async_(async_telemetry), unreachable_left_(image_unreachable_attempts) {
    if (async_) worker_ = std::thread([this] { drain(); });
}

ServiceLink::~ServiceLink() {
    if (worker_.joinable()) {
        {
            std::lock_guard lock(mu_);
            stop_ = true;
        }
        cv_.notify_all();
        worker_.join();
    }
}

void ServiceLink::drain() {
    std::unique_lock lock(mu_);
    while (true) {
        cv_.wait(lock, [&] { return stop_ || !queue_.empty(); });
        if (queue_.empty()) return;
        auto report = std::move(queue_.front());
        queue_.pop_front();
        busy_ = true;
        lock.unlock();
        try {
            service_.ingest_telemetry(
                {report.delivery_id, report.t_s, report.position, report.battery_fraction, report.state});
        } catch (const std::exception&) {
            // Uploads are best effort.
        }
        lock.lock();
        busy_ = false;
        cv_.notify_all();
    }
}

void ServiceLink::flush() {
    if (!async_) return;
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return queue_.empty() && !busy_; });
}

void ServiceLink::mission_launched(const std::string& delivery_id) { service_.mark_in_flight(delivery_id); }

void ServiceLink::notify(const std::string& delivery_id, NoticeKind kind) {
    service_.notify_delivery(delivery_id, kind);
}

mission::ImageFetch ServiceLink::request_face_image(const std::string& delivery_id) {
    if (unreachable_left_ > 0) {
        --unreachable_left_;
        return {mission::ImageFetch::Status::Unreachable, {}, 0};
    }
    try {
        auto img = service_.fetch_face_image(delivery_id);
        return {mission::ImageFetch::Status::Ok, img.digest, img.bytes.size()};
    } catch (const Error& e) {
        if (e.code() == ErrorCode::NotFound) return {mission::ImageFetch::Status::Missing, {}, 0};
        return {mission::ImageFetch::Status::Unreachable, {}, 0};
    }
}

void ServiceLink::send_telemetry(const mission::TelemetryReport& report) {
    if (!async_) {
        try {
            service_.ingest_telemetry(
                {report.delivery_id, report.t_s, report.position, report.battery_fraction, report.state});
        } catch (const std::exception&) {
        }
        return;
    }
    {
        std::lock_guard lock(mu_);
        queue_.push_back(report);
    }
    cv_.notify_all();
}

void ServiceLink::report_outcome(const std::string& delivery_id, Outcome outcome) {
    service_.set_status(delivery_id, outcome);
}

void ServiceLink::report_error(const std::string& delivery_id, const std::string& reason) {
    service_.record_error(delivery_id, reason);
}

}  // namespace dd::cloud
