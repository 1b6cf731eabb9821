#include <doctest.h>

#include <chrono>
#include <deque>
#include <map>
#include <optional>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast.hpp>
#include <json.hpp>

#include "teleop/service.hpp"
#include "teleop/wire.hpp"

using namespace teleop;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using Clock = std::chrono::steady_clock;
using namespace std::chrono_literals;

namespace {

struct HttpReply {
    unsigned status = 0;
    std::string body;
};

HttpReply http_get(unsigned short port, const std::string& target) {
    net::io_context ioc;
    beast::tcp_stream stream(ioc);
    stream.connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port));
    http::request<http::empty_body> req(http::verb::get, target, 11);
    req.set(http::field::host, "127.0.0.1");
    http::write(stream, req);
    beast::flat_buffer buffer;
    http::response<http::string_body> res;
    http::read(stream, buffer, res);
    return {res.result_int(), res.body()};
}

/// Blocking test client. A read is kept pending and the io_context is only
/// driven inside next(), so unread messages wait in the socket.
class Client {
public:
    explicit Client(unsigned short port, std::optional<int> receive_buffer = std::nullopt) : ws_(ioc_) {
        auto& sock = beast::get_lowest_layer(ws_).socket();
        sock.open(tcp::v4());
        if (receive_buffer) sock.set_option(net::socket_base::receive_buffer_size(*receive_buffer));
        sock.connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port));
        ws_.handshake("127.0.0.1:" + std::to_string(port), "/session");
    }

    void send(const wire::Message& m) { send_text(wire::encode(m)); }
    void send_text(const std::string& text) {
        ws_.text(true);
        ws_.write(net::buffer(text));
    }

    std::optional<std::string> next_text(Clock::duration timeout) {
        if (!reading_) start_read();
        const auto deadline = Clock::now() + timeout;
        while (inbox_.empty() && !failed_ && Clock::now() < deadline) {
            ioc_.restart();
            ioc_.run_one_for(deadline - Clock::now());
        }
        if (inbox_.empty()) return std::nullopt;
        std::string s = std::move(inbox_.front());
        inbox_.pop_front();
        return s;
    }

    std::optional<wire::Message> next(Clock::duration timeout = 3s) {
        auto t = next_text(timeout);
        if (!t) return std::nullopt;
        return wire::decode(*t);
    }

    template <typename T, typename Pred>
    std::optional<T> wait_for(Pred pred, Clock::duration timeout = 3s) {
        const auto deadline = Clock::now() + timeout;
        while (Clock::now() < deadline) {
            auto m = next(deadline - Clock::now());
            if (!m) break;
            if (const T* v = std::get_if<T>(&*m))
                if (pred(*v)) return *v;
        }
        return std::nullopt;
    }

    std::optional<wire::SessionEvent> wait_event(wire::EventKind kind, Clock::duration timeout = 3s) {
        return wait_for<wire::SessionEvent>([kind](const auto& e) { return e.kind == kind; }, timeout);
    }
    std::optional<wire::Error> wait_error(Clock::duration timeout = 3s) {
        return wait_for<wire::Error>([](const auto&) { return true; }, timeout);
    }

    void close() {
        beast::error_code ec;
        beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
        beast::get_lowest_layer(ws_).socket().close(ec);
    }

private:
    void start_read() {
        reading_ = true;
        ws_.async_read(buffer_, [this](beast::error_code ec, std::size_t) {
            if (ec) {
                failed_ = true;
                return;
            }
            inbox_.push_back(beast::buffers_to_string(buffer_.data()));
            buffer_.consume(buffer_.size());
            start_read();
        });
    }

    net::io_context ioc_;
    websocket::stream<beast::tcp_stream> ws_;
    beast::flat_buffer buffer_;
    std::deque<std::string> inbox_;
    bool reading_ = false;
    bool failed_ = false;
};

ServiceOptions options() {
    ServiceOptions o;
    o.port = 0;
    o.config = scenario_preset(ScenarioLabel::C);
    return o;
}

const wire::SessionCtl kStart{wire::SessionCommand::Start};
const wire::SessionCtl kStop{wire::SessionCommand::Stop};

}  // namespace

TEST_CASE("http endpoints") {
    SessionServer server(options());
    server.start();
    REQUIRE(server.port() != 0);
    std::this_thread::sleep_for(50ms);

    const HttpReply h = http_get(server.port(), "/healthz");
    CHECK(h.status == 200);
    const auto j = nlohmann::json::parse(h.body);
    CHECK(j.at("status") == "ok");
    CHECK(j.at("clients") == 0);
    CHECK(j.at("controller_connected") == false);
    CHECK(j.at("rate_hz") == 500.0);
    CHECK(j.at("loop").at("ticks").get<std::uint64_t>() > 0);
    CHECK(j.contains("version"));

    CHECK(http_get(server.port(), "/nope").status == 404);
    CHECK(http_get(server.port(), "/session").status == 426);
    server.stop();
}

TEST_CASE("binding a taken port fails") {
    SessionServer a(options());
    a.start();
    ServiceOptions o = options();
    o.port = a.port();
    SessionServer b(o);
    CHECK_THROWS_AS(b.start(), std::runtime_error);
}

TEST_CASE("roles, errors and pause on controller loss") {
    SessionServer server(options());
    server.start();
    Client a(server.port());
    Client b(server.port());

    const auto wa = a.wait_event(wire::EventKind::Welcome);
    REQUIRE(wa);
    CHECK(wa->role == "observer");
    const auto wb = b.wait_event(wire::EventKind::Welcome);
    REQUIRE(wb);
    CHECK(wb->role == "observer");

    b.send(wire::StylusInput{0.0, {}, {}});
    auto e = b.wait_error();
    REQUIRE(e);
    CHECK(e->code == wire::ErrorCode::NotController);

    b.send_text(R"({"v":2,"type":"session_ctl","command":"start"})");
    e = b.wait_error();
    REQUIRE(e);
    CHECK(e->code == wire::ErrorCode::UnsupportedVersion);
    b.send_text("{");
    e = b.wait_error();
    REQUIRE(e);
    CHECK(e->code == wire::ErrorCode::BadMessage);

    a.send(kStart);
    const auto promoted = a.wait_event(wire::EventKind::Welcome);
    REQUIRE(promoted);
    CHECK(promoted->role == "controller");
    REQUIRE(a.wait_event(wire::EventKind::Started));
    REQUIRE(b.wait_event(wire::EventKind::Started));

    b.send(kStart);
    e = b.wait_error();
    REQUIRE(e);
    CHECK(e->code == wire::ErrorCode::ControllerTaken);
    b.send(kStop);
    e = b.wait_error();
    REQUIRE(e);
    CHECK(e->code == wire::ErrorCode::NotController);

    const auto health = nlohmann::json::parse(http_get(server.port(), "/healthz").body);
    CHECK(health.at("clients") == 2);
    CHECK(health.at("controller_connected") == true);

    a.send(wire::ScenarioSet{ScenarioLabel::B, ""});
    e = a.wait_error();
    REQUIRE(e);
    CHECK(e->code == wire::ErrorCode::SessionRunning);
    a.send(wire::ScenarioSet{std::nullopt, "env:\n  K_e: soft\n"});
    e = a.wait_error();
    REQUIRE(e);
    CHECK(e->code == wire::ErrorCode::InvalidConfig);

    a.send(wire::StylusInput{0.01, {0.001, 0, 0}, {}});
    a.close();
    const auto paused = b.wait_event(wire::EventKind::Paused);
    REQUIRE(paused);
    CHECK(paused->reason == "controller_disconnected");

    b.send(kStart);
    const auto taken_over = b.wait_event(wire::EventKind::Welcome);
    REQUIRE(taken_over);
    CHECK(taken_over->role == "controller");
    REQUIRE(b.wait_event(wire::EventKind::Started));
    b.send(kStop);
    REQUIRE(b.wait_event(wire::EventKind::Completed));

    b.send(wire::ScenarioSet{ScenarioLabel::A, ""});
    const auto applied = b.wait_event(wire::EventKind::ScenarioApplied);
    REQUIRE(applied);
    CHECK(applied->label == "A");
    server.stop();
}

TEST_CASE("snapshots arrive at the configured rate and are identical for all clients") {
    SessionServer server(options());
    server.start();
    Client ctl(server.port());
    Client obs(server.port());
    REQUIRE(ctl.wait_event(wire::EventKind::Welcome));
    REQUIRE(obs.wait_event(wire::EventKind::Welcome));
    ctl.send(kStart);
    REQUIRE(ctl.wait_event(wire::EventKind::Started));

    std::map<std::uint64_t, std::string> seen;
    std::vector<std::uint64_t> steps;
    std::size_t metrics = 0;
    ctl.wait_for<wire::StateSnapshot>([](const auto&) { return true; });
    const auto t0 = Clock::now();
    while (Clock::now() - t0 < 2s) {
        auto text = ctl.next_text(1s);
        REQUIRE(text);
        const wire::Message m = wire::decode(*text);
        if (const auto* s = std::get_if<wire::StateSnapshot>(&m)) {
            steps.push_back(s->data.step);
            seen[s->data.step] = *text;
        }
        if (std::holds_alternative<wire::MetricsUpdate>(m)) ++metrics;
    }
    const double wall = std::chrono::duration<double>(Clock::now() - t0).count();
    const double rate = static_cast<double>(steps.size()) / wall;
    MESSAGE("snapshot rate " << rate << " Hz, metrics " << metrics);
    CHECK(rate >= 30.0);
    CHECK(rate <= 60.0);
    REQUIRE(steps.size() > 2);
    for (std::size_t i = 1; i < steps.size(); ++i) CHECK(steps[i] - steps[i - 1] == 9);
    CHECK(metrics >= 5);

    std::size_t matched = 0;
    while (auto text = obs.next_text(200ms)) {
        const wire::Message m = wire::decode(*text);
        if (const auto* s = std::get_if<wire::StateSnapshot>(&m)) {
            const auto it = seen.find(s->data.step);
            if (it == seen.end()) continue;
            CHECK(it->second == *text);
            ++matched;
        }
        if (matched == seen.size()) break;
    }
    CHECK(matched + 2 >= seen.size());
    server.stop();
}

TEST_CASE("a stalled client does not disturb the loop cadence") {
    ServiceOptions o = options();
    o.client_queue = 8;
    o.metrics_hz = 60.0;
    SessionServer server(o);
    server.start();
    Client stalled(server.port(), 2048);
    Client ctl(server.port());
    REQUIRE(ctl.wait_event(wire::EventKind::Welcome));
    ctl.send(kStart);
    REQUIRE(ctl.wait_event(wire::EventKind::Started));

    std::this_thread::sleep_for(300ms);
    const LoopStats before = server.stats();
    std::size_t snaps = 0;
    const auto t0 = Clock::now();
    while (Clock::now() - t0 < 4s) {
        auto m = ctl.next(1s);
        REQUIRE(m);
        if (const auto* s = std::get_if<wire::StateSnapshot>(&*m))
            if (s->data.step > before.steps) ++snaps;
    }
    const LoopStats after = server.stats();
    const double ticks = static_cast<double>(after.ticks - before.ticks);
    const double span = after.elapsed_s - before.elapsed_s;
    const double rate = ticks / span;
    MESSAGE("loop rate " << rate << " Hz, max lateness " << after.max_lateness_s * 1e3
                         << " ms, dropped " << after.dropped_messages << ", controller snapshots " << snaps);
    CHECK(std::abs(rate - 500.0) / 500.0 < 0.05);
    CHECK(after.overruns == 0);
    CHECK(after.steps - before.steps == after.ticks - before.ticks);
    const double snap_rate = static_cast<double>(snaps) / 4.0;
    CHECK(std::abs(snap_rate - 500.0 / 9.0) / (500.0 / 9.0) < 0.05);
    server.stop();
}
