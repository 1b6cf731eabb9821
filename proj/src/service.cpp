#include "teleop/service.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

#include "teleop/metrics.hpp"
#include "teleop/session.hpp"
#include "teleop/wire.hpp"

#ifndef TELEOP_VERSION
#define TELEOP_VERSION "0.0.0"
#endif

namespace teleop {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using Clock = std::chrono::steady_clock;

std::string build_info_json() {
    nlohmann::ordered_json j;
    j["service"] = "teleop";
    j["version"] = TELEOP_VERSION;
    j["schema_version"] = wire::kVersion;
#ifdef NDEBUG
    j["build_type"] = "release";
#else
    j["build_type"] = "debug";
#endif
    j["frame_checks"] = kFrameChecks;
    j["compiler"] = __VERSION__;
    return j.dump();
}

namespace {

struct Outgoing {
    std::uint64_t target = 0;  // 0 broadcasts
    std::shared_ptr<const std::string> text;
};

enum class CommandKind { Start, Stop, Reset, SetConfig, ClientJoined, ControllerLost };

struct Command {
    CommandKind kind;
    std::uint64_t client = 0;
    std::optional<ScenarioConfig> config;
};

std::shared_ptr<const std::string> encoded(const wire::Message& m) {
    return std::make_shared<const std::string>(wire::encode(m));
}

class WsConnection;

}  // namespace

struct SessionServer::Impl {
    explicit Impl(ServiceOptions o) : options(std::move(o)) {}

    ServiceOptions options;
    net::io_context io{1};
    tcp::acceptor acceptor{io};
    unsigned short bound_port = 0;
    std::thread io_thread, loop_thread, dispatch_thread;
    std::atomic<bool> stopping{false};
    bool started = false;

    BoundedQueue<Command> commands{1024};
    BoundedQueue<StylusSample> inputs{1024};
    BoundedQueue<Outgoing> outbox{256};

    std::mutex hub_mutex;
    std::map<std::uint64_t, std::weak_ptr<WsConnection>> connections;
    std::uint64_t controller = 0;
    std::uint64_t next_id = 1;
    std::atomic<std::uint64_t> connection_drops{0};

    mutable std::mutex stats_mutex;
    LoopStats loop_stats;

    void send_to(std::uint64_t id, const wire::Message& m) { outbox.push({id, encoded(m)}); }
    void broadcast(const wire::Message& m) { outbox.push({0, encoded(m)}); }
    void send_error(std::uint64_t id, wire::ErrorCode code, const std::string& message) {
        send_to(id, wire::Error{code, message});
    }

    std::uint64_t register_connection(const std::shared_ptr<WsConnection>& c);
    void unregister_connection(std::uint64_t id);
    void handle_message(std::uint64_t id, const std::string& text);
    std::string health_json();

    void do_accept();
    void dispatch();
    void loop();
};

namespace {

class WsConnection : public std::enable_shared_from_this<WsConnection> {
public:
    WsConnection(tcp::socket&& socket, SessionServer::Impl* hub)
        : ws_(std::move(socket)), hub_(hub) {}

    void run(http::request<http::string_body> req) {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(req, beast::bind_front_handler(&WsConnection::on_accept, shared_from_this()));
    }

    /// Callable from any thread.
    void enqueue(std::shared_ptr<const std::string> msg) {
        net::post(ws_.get_executor(),
                  [self = shared_from_this(), msg = std::move(msg)]() mutable { self->push(std::move(msg)); });
    }

private:
    void on_accept(beast::error_code ec) {
        if (ec) return;
        id_ = hub_->register_connection(shared_from_this());
        do_read();
    }

    void do_read() {
        ws_.async_read(buffer_, beast::bind_front_handler(&WsConnection::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t) {
        if (ec) {
            closed();
            return;
        }
        const std::string text = beast::buffers_to_string(buffer_.data());
        buffer_.consume(buffer_.size());
        hub_->handle_message(id_, text);
        do_read();
    }

    void push(std::shared_ptr<const std::string> msg) {
        if (closed_) return;
        if (queue_.size() >= hub_->options.client_queue) {
            // the front element may be in flight
            const auto victim = queue_.begin() + (writing_ ? 1 : 0);
            if (victim != queue_.end()) {
                queue_.erase(victim);
                ++hub_->connection_drops;
            }
        }
        queue_.push_back(std::move(msg));
        if (!writing_) do_write();
    }

    void do_write() {
        writing_ = true;
        ws_.text(true);
        ws_.async_write(net::buffer(*queue_.front()),
                        beast::bind_front_handler(&WsConnection::on_write, shared_from_this()));
    }

    void on_write(beast::error_code ec, std::size_t) {
        queue_.pop_front();
        writing_ = false;
        if (ec) {
            closed();
            return;
        }
        if (!queue_.empty()) do_write();
    }

    void closed() {
        if (closed_) return;
        closed_ = true;
        queue_.clear();
        if (id_ != 0) hub_->unregister_connection(id_);
    }

    websocket::stream<beast::tcp_stream> ws_;
    SessionServer::Impl* hub_;
    beast::flat_buffer buffer_;
    std::deque<std::shared_ptr<const std::string>> queue_;
    bool writing_ = false;
    bool closed_ = false;
    std::uint64_t id_ = 0;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
public:
    HttpSession(tcp::socket&& socket, SessionServer::Impl* hub) : stream_(std::move(socket)), hub_(hub) {}

    void run() {
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buffer_, req_,
                         beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
    }

private:
    void on_read(beast::error_code ec, std::size_t) {
        if (ec) return;
        const bool is_session = req_.target() == "/session";
        if (websocket::is_upgrade(req_) && is_session) {
            stream_.expires_never();
            std::make_shared<WsConnection>(stream_.release_socket(), hub_)->run(std::move(req_));
            return;
        }
        if (req_.method() == http::verb::get && req_.target() == "/healthz")
            respond(http::status::ok, hub_->health_json());
        else if (is_session)
            respond(http::status::upgrade_required, R"({"error":"websocket upgrade required"})");
        else
            respond(http::status::not_found, R"({"error":"not found"})");
    }

    void respond(http::status status, std::string body) {
        auto res = std::make_shared<http::response<http::string_body>>(status, req_.version());
        res->set(http::field::server, "teleop/" TELEOP_VERSION);
        res->set(http::field::content_type, "application/json");
        res->keep_alive(false);
        res->body() = std::move(body);
        res->prepare_payload();
        http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
            beast::error_code ignored;
            self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        });
    }

    beast::tcp_stream stream_;
    SessionServer::Impl* hub_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> req_;
};

ScenarioConfig with_label(ScenarioConfig cfg, ScenarioLabel label) {
    const ScenarioConfig preset = scenario_preset(label);
    cfg.label = label;
    cfg.render_mode = preset.render_mode;
    cfg.saturation.enabled = preset.saturation.enabled;
    return cfg;
}

}  // namespace

std::uint64_t SessionServer::Impl::register_connection(const std::shared_ptr<WsConnection>& c) {
    std::uint64_t id;
    {
        std::lock_guard lock(hub_mutex);
        id = next_id++;
        connections[id] = c;
    }
    wire::SessionEvent welcome{wire::EventKind::Welcome, "", "observer", ""};
    c->enqueue(encoded(welcome));
    commands.push({CommandKind::ClientJoined, id, std::nullopt});
    return id;
}

void SessionServer::Impl::unregister_connection(std::uint64_t id) {
    bool was_controller = false;
    {
        std::lock_guard lock(hub_mutex);
        connections.erase(id);
        if (controller == id) {
            controller = 0;
            was_controller = true;
        }
    }
    if (was_controller) commands.push({CommandKind::ControllerLost, id, std::nullopt});
}

void SessionServer::Impl::handle_message(std::uint64_t id, const std::string& text) {
    wire::Message msg;
    try {
        msg = wire::decode(text);
    } catch (const wire::WireError& e) {
        send_error(id, e.code(), e.what());
        return;
    }
    std::unique_lock lock(hub_mutex);
    if (const auto* in = std::get_if<wire::StylusInput>(&msg)) {
        if (controller != id) {
            lock.unlock();
            send_error(id, wire::ErrorCode::NotController, "observers cannot send stylus input");
            return;
        }
        inputs.push({in->t, Pose{in->p, in->q, Frame::HapticBase}});
        return;
    }
    if (const auto* ctl = std::get_if<wire::SessionCtl>(&msg)) {
        switch (ctl->command) {
            case wire::SessionCommand::Start:
                if (controller == 0) {
                    controller = id;
                    lock.unlock();
                    send_to(id, wire::SessionEvent{wire::EventKind::Welcome, "", "controller", ""});
                } else if (controller != id) {
                    lock.unlock();
                    send_error(id, wire::ErrorCode::ControllerTaken,
                               "another client already controls the session");
                    return;
                }
                commands.push({CommandKind::Start, id, std::nullopt});
                return;
            case wire::SessionCommand::Stop:
                if (controller != id) {
                    lock.unlock();
                    send_error(id, wire::ErrorCode::NotController, "only the controller can stop");
                    return;
                }
                commands.push({CommandKind::Stop, id, std::nullopt});
                return;
            case wire::SessionCommand::Reset:
                if (controller != 0 && controller != id) {
                    lock.unlock();
                    send_error(id, wire::ErrorCode::NotController, "only the controller can reset");
                    return;
                }
                commands.push({CommandKind::Reset, id, std::nullopt});
                return;
        }
    }
    if (const auto* set = std::get_if<wire::ScenarioSet>(&msg)) {
        if (controller != 0 && controller != id) {
            lock.unlock();
            send_error(id, wire::ErrorCode::NotController, "only the controller can change the scenario");
            return;
        }
        lock.unlock();
        try {
            ScenarioConfig cfg = set->label ? with_label(options.config, *set->label)
                                            : parse_config(set->config_yaml);
            cfg.validate();
            commands.push({CommandKind::SetConfig, id, std::move(cfg)});
        } catch (const std::exception& e) {
            send_error(id, wire::ErrorCode::InvalidConfig, e.what());
        }
        return;
    }
    lock.unlock();
    send_error(id, wire::ErrorCode::BadMessage,
               "message type '" + std::string(wire::message_type(msg)) + "' is server-to-client only");
}

std::string SessionServer::Impl::health_json() {
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(build_info_json());
    j["status"] = "ok";
    {
        std::lock_guard lock(hub_mutex);
        j["clients"] = connections.size();
        j["controller_connected"] = controller != 0;
    }
    LoopStats s;
    {
        std::lock_guard lock(stats_mutex);
        s = loop_stats;
    }
    j["rate_hz"] = options.config.rate_hz;
    j["loop"] = {{"ticks", s.ticks},
                 {"steps", s.steps},
                 {"elapsed_s", s.elapsed_s},
                 {"overruns", s.overruns},
                 {"max_lateness_s", s.max_lateness_s}};
    return j.dump();
}

void SessionServer::Impl::do_accept() {
    acceptor.async_accept(net::make_strand(io), [this](beast::error_code ec, tcp::socket socket) {
        if (stopping) return;
        if (!ec) std::make_shared<HttpSession>(std::move(socket), this)->run();
        do_accept();
    });
}

void SessionServer::Impl::dispatch() {
    std::vector<std::shared_ptr<WsConnection>> targets;
    while (!stopping) {
        auto item = outbox.pop_for(std::chrono::milliseconds(50));
        if (!item) continue;
        targets.clear();
        {
            std::lock_guard lock(hub_mutex);
            if (item->target == 0) {
                for (auto& [id, weak] : connections)
                    if (auto c = weak.lock()) targets.push_back(std::move(c));
            } else if (auto it = connections.find(item->target); it != connections.end()) {
                if (auto c = it->second.lock()) targets.push_back(std::move(c));
            }
        }
        for (auto& c : targets) c->enqueue(item->text);
    }
}

void SessionServer::Impl::loop() {
    enum class State { Idle, Running, Paused };
    ScenarioConfig cfg = options.config;
    const double rate = cfg.rate_hz;
    const auto period = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / rate));
    const auto snap_every = static_cast<std::uint64_t>(std::max(1.0, std::ceil(rate / options.snapshot_hz)));
    const auto metrics_every = static_cast<std::uint64_t>(std::max(1.0, std::ceil(rate / options.metrics_hz)));
    const ForceProfile human = synthetic_human_profile();
    const double human_mean = profile_mean(human);
    const double human_peak = signed_extremum(human);

    std::unique_ptr<TeleopSession> session;
    LiveOperator* live = nullptr;
    State state = State::Idle;
    double force_sum = 0.0, force_peak = 0.0;
    std::size_t force_count = 0;

    const auto label = [&] { return std::string(scenario_label_name(cfg.label)); };
    const auto new_session = [&] {
        auto op = std::make_unique<LiveOperator>();
        live = op.get();
        session = std::make_unique<TeleopSession>(cfg, std::move(op));
        force_sum = force_peak = 0.0;
        force_count = 0;
    };
    const auto metrics_message = [&] {
        wire::MetricsUpdate m;
        m.t = session->time();
        m.contact_samples = force_count;
        m.running_mean = force_count ? force_sum / static_cast<double>(force_count) : 0.0;
        m.running_md = std::abs(human_mean - m.running_mean);
        m.peak_robot = force_peak;
        m.peak_human = human_peak;
        m.delta_f_max = std::abs(std::abs(human_peak) - std::abs(force_peak));
        return m;
    };

    const auto handle = [&](Command& c) {
        switch (c.kind) {
            case CommandKind::Start:
                if (state == State::Running) return;
                if (state == State::Idle) new_session();
                state = State::Running;
                broadcast(wire::SessionEvent{wire::EventKind::Started, "", "", label()});
                return;
            case CommandKind::Stop:
                if (state == State::Idle) return;
                session->stop();
                broadcast(wire::StateSnapshot{session->snapshot()});
                broadcast(metrics_message());
                broadcast(wire::SessionEvent{wire::EventKind::Completed, "", "", label()});
                state = State::Idle;
                return;
            case CommandKind::Reset:
                session.reset();
                live = nullptr;
                state = State::Idle;
                broadcast(wire::SessionEvent{wire::EventKind::Reset, "", "", label()});
                return;
            case CommandKind::SetConfig:
                if (state != State::Idle) {
                    send_error(c.client, wire::ErrorCode::SessionRunning,
                               "scenario changes are only accepted while the session is stopped");
                    return;
                }
                cfg = std::move(*c.config);
                session.reset();
                live = nullptr;
                broadcast(wire::SessionEvent{wire::EventKind::ScenarioApplied, "", "", label()});
                return;
            case CommandKind::ClientJoined:
                if (session) send_to(c.client, wire::StateSnapshot{session->history_snapshot()});
                return;
            case CommandKind::ControllerLost:
                if (state != State::Running) return;
                state = State::Paused;
                broadcast(wire::SessionEvent{wire::EventKind::Paused, "controller_disconnected", "", label()});
                return;
        }
    };

    const auto t0 = Clock::now();
    auto deadline = t0;
    LoopStats local;
    while (!stopping) {
        const auto woke = Clock::now();
        const double late = std::chrono::duration<double>(woke - deadline).count();
        if (late > local.max_lateness_s) local.max_lateness_s = late;

        while (auto c = commands.try_pop()) handle(*c);
        while (auto in = inputs.try_pop())
            if (live) live->push(*in);

        if (state == State::Running) {
            const std::size_t before = session->log().records.size();
            const StepStatus st = session->step_once();
            ++local.steps;
            const auto& records = session->log().records;
            if (records.size() > before && records.back().contact != ContactState::NoContact) {
                const double f = records.back().f_e.dot(cfg.board.normal);
                force_sum += f;
                ++force_count;
                if (std::abs(f) > std::abs(force_peak)) force_peak = f;
            }
            if (session->steps() % snap_every == 0 || st != StepStatus::Running) {
                broadcast(wire::StateSnapshot{session->snapshot()});
                ++local.snapshots;
            }
            if (session->steps() % metrics_every == 0) broadcast(metrics_message());
            if (st != StepStatus::Running) {
                if (st == StepStatus::Failed) {
                    const std::string reason(failure_reason_name(session->failure_reason()));
                    broadcast(wire::SessionEvent{wire::EventKind::Failed, reason, "", label()});
                } else {
                    broadcast(wire::SessionEvent{wire::EventKind::Completed, "", "", label()});
                }
                state = State::Idle;
            }
        }

        ++local.ticks;
        deadline += period;
        const auto now = Clock::now();
        if (now - deadline > std::chrono::milliseconds(100)) {
            deadline = now;
            ++local.overruns;
        }
        local.elapsed_s = std::chrono::duration<double>(now - t0).count();
        {
            std::lock_guard lock(stats_mutex);
            loop_stats = local;
        }
        std::this_thread::sleep_until(deadline);
    }
}

SessionServer::SessionServer(ServiceOptions options)
    : impl_(std::make_shared<Impl>(std::move(options))) {
    impl_->options.config.validate();
    if (!(impl_->options.snapshot_hz > 0.0) || impl_->options.snapshot_hz > 60.0)
        throw ContractViolation("SessionServer: snapshot_hz must be in (0, 60]");
    if (!(impl_->options.metrics_hz > 0.0))
        throw ContractViolation("SessionServer: metrics_hz must be positive");
    if (impl_->options.client_queue == 0)
        throw ContractViolation("SessionServer: client_queue must be positive");
}

SessionServer::~SessionServer() { stop(); }

void SessionServer::start() {
    Impl& s = *impl_;
    if (s.started) return;
    beast::error_code ec;
    const auto address = net::ip::make_address(s.options.bind_address, ec);
    if (ec) throw std::runtime_error("invalid bind address '" + s.options.bind_address + "'");
    const tcp::endpoint endpoint(address, s.options.port);
    s.acceptor.open(endpoint.protocol(), ec);
    if (!ec) s.acceptor.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) s.acceptor.bind(endpoint, ec);
    if (!ec) s.acceptor.listen(net::socket_base::max_listen_connections, ec);
    if (ec)
        throw std::runtime_error("cannot listen on " + s.options.bind_address + ":" +
                                 std::to_string(s.options.port) + ": " + ec.message());
    s.bound_port = s.acceptor.local_endpoint().port();
    s.started = true;
    s.do_accept();
    s.io_thread = std::thread([&s] { s.io.run(); });
    s.dispatch_thread = std::thread([&s] { s.dispatch(); });
    s.loop_thread = std::thread([&s] { s.loop(); });
}

void SessionServer::stop() {
    Impl& s = *impl_;
    if (!s.started || s.stopping.exchange(true)) return;
    if (s.loop_thread.joinable()) s.loop_thread.join();
    if (s.dispatch_thread.joinable()) s.dispatch_thread.join();
    net::post(s.io, [&s] {
        beast::error_code ignored;
        s.acceptor.close(ignored);
    });
    s.io.stop();
    if (s.io_thread.joinable()) s.io_thread.join();
}

unsigned short SessionServer::port() const { return impl_->bound_port; }

LoopStats SessionServer::stats() const {
    LoopStats s;
    {
        std::lock_guard lock(impl_->stats_mutex);
        s = impl_->loop_stats;
    }
    s.dropped_messages = impl_->outbox.dropped() + impl_->connection_drops.load();
    return s;
}

}  // namespace teleop
