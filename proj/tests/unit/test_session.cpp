#include <doctest.h>

#include <cmath>
#include <functional>
#include <sstream>
#include <thread>

#include "teleop/log_io.hpp"
#include "teleop/session.hpp"

using namespace teleop;

namespace {

std::string source(const std::string& rel) { return std::string(TELEOP_SOURCE_DIR) + "/" + rel; }

// Stylus path given as a function of time, for a fixed duration.
class PathOperator final : public OperatorSource {
public:
    PathOperator(std::function<Vec3(double)> path, double duration)
        : path_(std::move(path)), duration_(duration) {}
    std::optional<StylusSample> sample(double t) override {
        if (t > duration_ + 1e-12) return std::nullopt;
        StylusSample s;
        s.t = t;
        s.pose.position = path_(t);
        return s;
    }
    std::string describe() const override { return "path"; }

private:
    std::function<Vec3(double)> path_;
    double duration_;
};

// Records the interleaving of sample and feedback calls.
class RecordingOperator final : public OperatorSource {
public:
    struct Call {
        char kind;  // 's' sample, 'f' feedback
        double t;
        Vec3 force;
    };
    explicit RecordingOperator(std::unique_ptr<OperatorSource> inner, std::vector<Call>* calls)
        : inner_(std::move(inner)), calls_(calls) {}
    std::optional<StylusSample> sample(double t) override {
        calls_->push_back({'s', t, {}});
        return inner_->sample(t);
    }
    void feedback(const Vec3& f, double dt) override {
        calls_->push_back({'f', 0.0, f});
        inner_->feedback(f, dt);
    }
    std::string describe() const override { return "recording"; }

private:
    std::unique_ptr<OperatorSource> inner_;
    std::vector<Call>* calls_;
};

std::string log_text(const SessionLog& log) {
    std::ostringstream os;
    write_log_csv(os, log);
    return os.str();
}

SessionOutcome run_config(const std::string& rel) {
    const ScenarioConfig cfg = load_config(source(rel));
    return run_session(cfg, make_operator("scripted:" + cfg.scripted.letters, cfg), cfg.duration_s);
}

// Descends from 2 cm above the board to `depth` below it over 1 s, then holds.
std::function<Vec3(double)> press(const ScenarioConfig& cfg, double depth) {
    const double z0 = cfg.robot_start.z;
    const double z1 = -depth;
    return [z0, z1](double t) {
        const double s = std::min(1.0, t);
        return Vec3{0.0, 0.0, z0 + s * (z1 - z0)};
    };
}

}  // namespace

TEST_CASE("holding the start pose in free space is an equilibrium") {
    ScenarioConfig cfg = scenario_preset(ScenarioLabel::C);
    const Vec3 start{0.01, 0.02, 0.05};
    const auto out = run_session(cfg, std::make_unique<PathOperator>([=](double) { return start; }, 2.0), 10.0);
    CHECK(out.success);
    REQUIRE(out.log.records.size() == 1001);
    for (const auto& r : out.log.records) {
        CHECK(r.f_e == Vec3{});
        CHECK(r.f_h == Vec3{});
        CHECK((r.p_h - cfg.robot_start).norm() <= 1e-15);
        CHECK((r.p_c - r.p_h).norm() <= 1e-15);
        CHECK((r.plant.position - cfg.robot_start).norm() <= 1e-15);
        CHECK(r.contact == ContactState::NoContact);
    }
    CHECK(out.canvas.segments().empty());
}

TEST_CASE("zero duration gives an empty successful log") {
    const ScenarioConfig cfg = scenario_preset(ScenarioLabel::C);
    const auto out = run_session(cfg, make_operator("scripted:ACG", cfg), 0.0);
    CHECK(out.success);
    CHECK(out.reason == FailureReason::None);
    CHECK(out.log.records.empty());
}

TEST_CASE("identical seeds give bitwise identical logs") {
    const auto a = run_config("configs/acceptance/gentle_C.yaml");
    const auto b = run_config("configs/acceptance/gentle_C.yaml");
    REQUIRE(a.log.records.size() == b.log.records.size());
    CHECK(log_text(a.log) == log_text(b.log));
    for (std::size_t i = 0; i < a.log.records.size(); ++i) {
        CHECK(a.log.records[i].plant == b.log.records[i].plant);
        CHECK(a.log.records[i].f_e == b.log.records[i].f_e);
    }
}

TEST_CASE("log time is strictly increasing at the fixed step") {
    const auto out = run_config("configs/acceptance/gentle_B.yaml");
    const auto& r = out.log.records;
    REQUIRE(r.size() > 100);
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(r[i].t == static_cast<double>(i) * out.log.dt);
}

TEST_CASE("feedback of step k reaches the operator only after sample k") {
    ScenarioConfig cfg = load_config(source("configs/acceptance/gentle_B.yaml"));
    std::vector<RecordingOperator::Call> calls;
    auto op = std::make_unique<RecordingOperator>(make_operator("scripted:A", cfg), &calls);
    TeleopSession session(cfg, std::move(op));
    for (int k = 0; k < 3000 && session.step_once() == StepStatus::Running; ++k) {
    }
    const auto& log = session.log().records;
    REQUIRE(log.size() > 100);
    // strict alternation: s0 f0 s1 f1 ...
    for (std::size_t i = 0; i < 2 * log.size(); ++i) CHECK(calls[i].kind == (i % 2 == 0 ? 's' : 'f'));
    for (std::size_t k = 0; k < log.size(); ++k) {
        CHECK(calls[2 * k].t == log[k].t);
        CHECK(calls[2 * k + 1].force == -log[k].f_h);
    }
}

TEST_CASE("hand feedback changes only later samples") {
    ScenarioConfig cfg = load_config(source("configs/acceptance/gentle_B.yaml"));
    ScenarioConfig stiff = cfg;
    stiff.scripted.hand_compliance = 0.0;
    const auto with = run_session(cfg, make_operator("scripted:A", cfg), 60);
    const auto without = run_session(stiff, make_operator("scripted:A", stiff), 60);
    // identical until the first non-zero device force has been fed back
    std::size_t first_force = 0;
    while (first_force < without.log.records.size() && without.log.records[first_force].f_h == Vec3{})
        ++first_force;
    REQUIRE(first_force + 1 < without.log.records.size());
    for (std::size_t k = 0; k <= first_force; ++k)
        CHECK(with.log.records[k].stylus == without.log.records[k].stylus);
    CHECK_FALSE(with.log.records[first_force + 1].stylus == without.log.records[first_force + 1].stylus);
}

TEST_CASE("reference passes through whenever saturation is inactive") {
    for (const char* name : {"configs/acceptance/gentle_C.yaml", "configs/acceptance/aggressive_C.yaml",
                             "configs/acceptance/gentle_B.yaml"}) {
        CAPTURE(name);
        const auto out = run_config(name);
        std::size_t saturated = 0;
        for (const auto& r : out.log.records) {
            const bool any = r.saturated[0] || r.saturated[1] || r.saturated[2];
            if (!any) {
                CHECK(r.p_d == r.p_h);
            } else {
                ++saturated;
            }
        }
        if (std::string(name).find("_B") != std::string::npos) CHECK(saturated == 0);
    }
}

TEST_CASE("virtualized feedback is reproducible from the logged positions") {
    for (const char* name : {"configs/acceptance/gentle_B.yaml", "configs/acceptance/gentle_C.yaml"}) {
        CAPTURE(name);
        const ScenarioConfig cfg = load_config(source(name));
        const auto out = run_config(name);
        const auto& r = out.log.records;
        const double dt = out.log.dt;
        Vec3 prev_offset;  // R p~ = p_d - p_c, zero before the first step
        double worst = 0.0;
        for (std::size_t k = 0; k < r.size(); ++k) {
            const Vec3 offset = r[k].p_d - r[k].p_c;
            const Vec3 rate = (offset - prev_offset) / dt;
            prev_offset = offset;
            const Vec3 f = clamp_to_device(cfg.coupling.K_h * (r[k].p_h - r[k].p_c) + cfg.coupling.D_h * rate,
                                           cfg.device);
            const Vec3 d = f - r[k].f_h;
            worst = std::max({worst, std::abs(d.x), std::abs(d.y), std::abs(d.z)});
        }
        CHECK(worst <= 1e-9);
    }
}

TEST_CASE("Scenario C approach shows the full contact sequence") {
    const auto out = run_config("configs/acceptance/aggressive_C.yaml");
    CHECK(out.success);
    const ContactState order[] = {ContactState::NoContact, ContactState::Collision,
                                  ContactState::Penetration, ContactState::Saturation};
    std::size_t next = 0;
    for (const auto& r : out.log.records) {
        if (next < 4 && r.contact == order[next]) ++next;
    }
    CHECK(next == 4);
    // Saturation is never reported without an active axis
    for (const auto& r : out.log.records) {
        if (r.contact == ContactState::Saturation) CHECK((r.saturated[0] || r.saturated[1] || r.saturated[2]));
    }
}

TEST_CASE("aggressive trace breaks the chalk in A and not in C") {
    const auto a = run_config("configs/acceptance/aggressive_A.yaml");
    const auto c = run_config("configs/acceptance/aggressive_C.yaml");
    CHECK_FALSE(a.success);
    CHECK(a.reason == FailureReason::ChalkBroken);
    REQUIRE(a.break_time);
    CHECK(a.log.records.back().t == *a.break_time);
    CHECK_FALSE(a.log.records.back().chalk_intact);
    CHECK(c.success);
    CHECK(c.reason == FailureReason::None);
}

TEST_CASE("a 15 N unsaturated press settles at the threshold in Scenario C") {
    ScenarioConfig cfg = scenario_preset(ScenarioLabel::C);
    cfg.board.breakage_force = 1000.0;
    // K_eq = 750 N/m, so 2 cm of reference depth would give 15 N
    const auto out = run_session(cfg, std::make_unique<PathOperator>(press(cfg, 0.02), 4.0), 10.0);
    REQUIRE(out.success);
    double settled = 0.0;
    for (const auto& r : out.log.records)
        if (r.t >= 3.0) settled = std::max(settled, std::abs(r.f_e.z));
    CHECK(settled <= 12.0 * 1.05);
    CHECK(settled > 11.0);

    ScenarioConfig b = cfg;
    b.label = ScenarioLabel::B;
    b.saturation.enabled = false;
    const auto free = run_session(b, std::make_unique<PathOperator>(press(b, 0.02), 4.0), 10.0);
    CHECK(std::abs(free.log.records.back().f_e.z) == doctest::Approx(15.0).epsilon(0.01));
}

TEST_CASE("pushing deeper while saturated raises the rendered force only") {
    ScenarioConfig cfg = scenario_preset(ScenarioLabel::C);
    cfg.board.breakage_force = 1000.0;
    cfg.device.f_max = {100, 100, 100};
    const double z0 = cfg.robot_start.z;
    auto path = [z0](double t) {
        const double z = t < 1.0 ? z0 + t * (-0.03 - z0) : -0.03 - 0.01 * (t - 1.0) / 2.0;
        return Vec3{0, 0, std::max(z, -0.04)};
    };
    const auto out = run_session(cfg, std::make_unique<PathOperator>(path, 4.0), 10.0);
    REQUIRE(out.success);
    double prev_fh = -1.0;
    double peak_contact = 0.0;
    std::size_t checked = 0;
    for (const auto& r : out.log.records) {
        if (r.t < 1.6 || r.t > 3.0) continue;
        REQUIRE(r.saturated[2]);
        const double fh = std::abs(r.f_h.z);
        CHECK(fh > prev_fh);
        prev_fh = fh;
        peak_contact = std::max(peak_contact, std::abs(r.f_e.z));
        ++checked;
    }
    CHECK(checked > 500);
    CHECK(peak_contact <= 12.0 * 1.05);
}

TEST_CASE("non-finite operator input is a safety stop") {
    const ScenarioConfig cfg = scenario_preset(ScenarioLabel::B);
    auto path = [](double t) { return t < 0.1 ? Vec3{} : Vec3{std::nan(""), 0, 0}; };
    const auto out = run_session(cfg, std::make_unique<PathOperator>(path, 1.0), 1.0);
    CHECK_FALSE(out.success);
    CHECK(out.reason == FailureReason::SafetyStop);
    CHECK_FALSE(out.diagnostic.empty());
}

TEST_CASE("contract violations inside a step stop the session") {
    ScenarioConfig cfg = scenario_preset(ScenarioLabel::C);
    cfg.saturation.K_e_est = Diag3{{0, 0, 0}};  // nothing to latch against
    cfg.board.breakage_force = 1000.0;
    const auto out = run_session(cfg, std::make_unique<PathOperator>(press(cfg, 0.02), 3.0), 3.0);
    CHECK(out.reason == FailureReason::SafetyStop);
    CHECK(out.diagnostic.find("K_eq") != std::string::npos);
}

TEST_CASE("snapshots deliver every stroke point exactly once") {
    const ScenarioConfig cfg = load_config(source("configs/acceptance/gentle_C.yaml"));
    TeleopSession session(cfg, make_operator("scripted:ACG", cfg));
    std::vector<std::vector<StrokePoint>> rebuilt;
    std::uint64_t k = 0;
    while (session.step_once() == StepStatus::Running) {
        if (++k % 9 != 0) continue;
        const Snapshot s = session.snapshot();
        CHECK(s.step == session.steps());
        for (const auto& d : s.strokes) {
            if (d.segment >= rebuilt.size()) rebuilt.resize(d.segment + 1);
            rebuilt[d.segment].push_back(d.point);
        }
    }
    for (const auto& d : session.snapshot().strokes) {
        if (d.segment >= rebuilt.size()) rebuilt.resize(d.segment + 1);
        rebuilt[d.segment].push_back(d.point);
    }
    CHECK(rebuilt == session.canvas().segments());
    const Snapshot h = session.history_snapshot();
    CHECK(h.strokes.size() == session.canvas().point_count());
    CHECK(session.snapshot().strokes.empty());
}

TEST_CASE("stop ends the session as completed") {
    const ScenarioConfig cfg = scenario_preset(ScenarioLabel::C);
    TeleopSession session(cfg, make_operator("scripted:ACG", cfg));
    for (int i = 0; i < 10; ++i) session.step_once();
    session.stop();
    CHECK(session.status() == StepStatus::Completed);
    CHECK(session.step_once() == StepStatus::Completed);
    CHECK(session.steps() == 10);
    const auto out = session.take_outcome();
    CHECK(out.success);
    CHECK(out.intended_segments == 4);
    CHECK(out.log.records.size() == 10);
}

TEST_CASE("operator specs") {
    const ScenarioConfig cfg = scenario_preset(ScenarioLabel::C);
    CHECK(make_operator("scripted:ACG", cfg)->describe().rfind("scripted:ACG", 0) == 0);
    CHECK_NOTHROW(make_operator("scripted:" + source("assets/letters/acg.json"), cfg));
    CHECK_THROWS(make_operator("keyboard", cfg));
    CHECK_THROWS(make_operator("replay:", cfg));
    CHECK_THROWS(make_operator("replay:/nonexistent.csv", cfg));
    CHECK_THROWS(make_operator("scripted:XYZ", cfg));
}

TEST_CASE("bounded queue drops the oldest element") {
    BoundedQueue<int> q(3);
    for (int i = 0; i < 5; ++i) q.push(i);
    CHECK(q.size() == 3);
    CHECK(q.dropped() == 2);
    CHECK(q.try_pop() == 2);
    CHECK(q.try_pop() == 3);
    CHECK(q.try_pop() == 4);
    CHECK_FALSE(q.try_pop());
    CHECK_FALSE(q.pop_for(std::chrono::milliseconds(5)));
    std::thread producer([&] {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
        q.push(42);
    });
    CHECK(q.pop_for(std::chrono::seconds(5)) == 42);
    producer.join();
}

TEST_CASE("failure reason names") {
    CHECK(failure_reason_name(FailureReason::ChalkBroken) == "chalk_broken");
    CHECK(failure_reason_name(FailureReason::SafetyStop) == "safety_stop");
    CHECK(failure_reason_name(FailureReason::None) == "none");
}
