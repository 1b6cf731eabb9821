// One PASS/FAIL line per acceptance criterion; exits 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "teleop/admittance.hpp"
#include "teleop/cli.hpp"
#include "teleop/config.hpp"
#include "teleop/master_station.hpp"
#include "teleop/metrics.hpp"
#include "teleop/rendering.hpp"
#include "teleop/session.hpp"

using namespace teleop;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += "violated: " + what;
        }
    }
    void note(const std::string& s) {
        if (!detail.empty()) detail += "; ";
        detail += s;
    }
};

std::string num(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

std::string source(const std::string& rel) { return std::string(TELEOP_SOURCE_DIR) + "/" + rel; }

ScenarioConfig acceptance_config(const std::string& name) {
    return load_config(source("configs/acceptance/" + name + ".yaml"));
}

SessionOutcome run_scripted(const ScenarioConfig& cfg) {
    return run_session(cfg, make_operator("scripted:" + cfg.scripted.letters, cfg), cfg.duration_s);
}

// Stylus path as a function of time.
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

// Straight descent from the start height to `depth` below the board in 1 s, then hold.
std::unique_ptr<OperatorSource> held_press(const ScenarioConfig& cfg, double depth, double duration) {
    const double z0 = cfg.robot_start.z;
    return std::make_unique<PathOperator>(
        [z0, depth](double t) { return Vec3{0.0, 0.0, z0 + std::min(1.0, t) * (-depth - z0)}; }, duration);
}

// ---------------------------------------------------------------------------

Verdict analytic_identities() {
    Verdict v;
    const Vec3 f_bar{10.0, 10.0, 10.0};
    auto gain_at = [&](double f) { return render_measured_cosh({0, 0, f}, f_bar, 0.0).z; };
    const double at_bar = gain_at(10.0);
    const double at_half = gain_at(5.0);
    v.require(std::abs(at_bar - 4.0) <= 1e-12, "cosh(f_bar) = 4, got " + num(at_bar, 17));
    v.require(std::abs(at_half - std::sqrt(2.5)) <= 1e-12, "cosh(f_bar/2) = sqrt(2.5), got " + num(at_half, 17));

    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(1.0, 1e5);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const Diag3 kp{{u(rng), u(rng), u(rng)}};
        const Diag3 ke{{u(rng), u(rng), u(rng)}};
        const Diag3 keq = compute_keq(kp, ke);
        for (std::size_t j = 0; j < 3; ++j) {
            const double expected = kp[j] * ke[j] / (kp[j] + ke[j]);
            worst = std::max(worst, std::abs(keq[j] - expected) / expected);
        }
    }
    v.require(worst <= 1e-12, "K_eq series law within 1e-12");
    v.note("cosh err " + num(std::abs(at_bar - 4.0), 2) + "/" + num(std::abs(at_half - std::sqrt(2.5)), 2) +
           ", K_eq worst rel " + num(worst, 2));
    return v;
}

double tone_amplitude(const std::vector<double>& y, double freq, double dt) {
    double a = 0.0, b = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
        const double ph = 2.0 * kPi * freq * static_cast<double>(k) * dt;
        a += y[k] * std::sin(ph);
        b += y[k] * std::cos(ph);
    }
    return 2.0 * std::sqrt(a * a + b * b) / static_cast<double>(y.size());
}

Verdict filter_suite() {
    Verdict v;
    const std::size_t n = 50;
    const double dt = 1.0 / 500.0;

    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    MovingAverage3 fast(n);
    std::deque<Vec3> window;
    double worst = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const Vec3 p{u(rng), u(rng), u(rng)};
        const Vec3 got = fast.push(p);
        window.push_back(p);
        if (window.size() > n) window.pop_front();
        Vec3 sum;
        for (const Vec3& w : window) sum += w;
        const Vec3 d = got - sum / static_cast<double>(window.size());
        worst = std::max({worst, std::abs(d.x), std::abs(d.y), std::abs(d.z)});
    }
    v.require(worst <= 1e-9, "moving average matches the naive window within 1e-9");

    // The 10 Hz tone sits on a zero of the response (the window spans one
    // period), so it is checked in absolute terms with the neighbours relative.
    auto measured = [&](double freq) {
        MovingAverage3 f(n);
        std::vector<double> out;
        for (std::size_t k = 0; k < n + 500; ++k) {
            const double y = f.push({std::sin(2.0 * kPi * freq * static_cast<double>(k) * dt), 0, 0}).x;
            if (k >= n) out.push_back(y);
        }
        return tone_amplitude(out, freq, dt);
    };
    auto predicted = [&](double freq) {
        const double nn = static_cast<double>(n);
        return std::abs(std::sin(kPi * freq * nn * dt) / (nn * std::sin(kPi * freq * dt)));
    };
    const double g10 = measured(10.0), p10 = predicted(10.0);
    v.require(std::abs(g10 - p10) <= 0.05, "10 Hz gain within 0.05 of the predicted zero");
    double worst_rel = 0.0;
    for (double freq : {8.0, 9.0, 11.0, 12.0}) {
        const double rel = std::abs(measured(freq) - predicted(freq)) / predicted(freq);
        worst_rel = std::max(worst_rel, rel);
    }
    v.require(worst_rel <= 0.05, "8-12 Hz gains within 5% of the formula");
    v.note("naive err " + num(worst, 2) + ", 10 Hz gain " + num(g10, 3) + " vs " + num(p10, 3) +
           ", 8-12 Hz worst rel " + num(worst_rel, 3));
    return v;
}

Verdict admittance_integration() {
    Verdict v;
    // M = 1, D = 40, K = 400: repeated root at -20 rad/s.
    AdmittanceParams p;
    p.mass = Diag3::uniform(1.0);
    p.damping = Diag3::uniform(40.0);
    p.stiffness = Diag3::uniform(400.0);
    const double F = 10.0, w = 20.0, K = 400.0;
    auto exact = [&](double t) { return F / K * (1.0 - (1.0 + w * t) * std::exp(-w * t)); };
    auto run = [&](double dt, double* endpoint) {
        AdmittanceState s;
        double err = 0.0;
        const int steps = static_cast<int>(std::lround(1.0 / dt));
        for (int k = 1; k <= steps; ++k) {
            s = step_admittance(s, p, {F, 0, 0}, dt);
            err = std::max(err, std::abs(s.p_tilde.x - exact(k * dt)));
        }
        if (endpoint) *endpoint = s.p_tilde.x;
        return err;
    };
    double end = 0.0;
    const double e1 = run(1e-3, &end);
    const double e2 = run(5e-4, nullptr);
    const double e0 = run(2e-3, nullptr);
    const double rel = std::abs(end - exact(1.0)) / exact(1.0);
    v.require(rel <= 1e-4, "endpoint within 1e-4 relative at dt = 1e-3");
    const double r1 = e0 / e1, r2 = e1 / e2;
    v.require(r1 > 1.8 && r1 < 2.2 && r2 > 1.8 && r2 < 2.2, "error halves with dt");
    v.note("endpoint rel " + num(rel, 2) + ", halving ratios " + num(r1) + ", " + num(r2));
    return v;
}

Verdict steady_state_law() {
    Verdict v;
    std::mt19937_64 rng(909);
    std::uniform_real_distribution<double> kp_d(500.0, 2000.0), ke_d(1000.0, 5000.0), depth_d(0.002, 0.010);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        ScenarioConfig cfg = scenario_preset(ScenarioLabel::B);
        const double kp = kp_d(rng), ke = ke_d(rng), depth = depth_d(rng);
        cfg.admittance.stiffness = Diag3::uniform(kp);
        cfg.board.K_e = ke;
        cfg.board.breakage_force = 1e6;
        const SessionOutcome out = run_session(cfg, held_press(cfg, depth, 5.0), 5.0);
        if (!out.success) {
            v.require(false, "draw " + std::to_string(i) + " ended " + std::string(failure_reason_name(out.reason)));
            continue;
        }
        const LogRecord& last = out.log.records.back();
        const Vec3 n = cfg.board.normal;
        // exerted force against the board: K_eq times the reference depth
        const double reference_depth = (cfg.board.plane_point - last.p_d).dot(n);
        const double predicted = -kp * ke / (kp + ke) * reference_depth;
        const double got = last.f_e.dot(n);
        const double rel = std::abs(got - predicted) / std::abs(predicted);
        worst = std::max(worst, rel);
        if (rel > 0.005)
            v.require(false, "draw " + std::to_string(i) + " (K_P " + num(kp) + ", K_e " + num(ke) + ", depth " +
                                 num(depth * 1e3) + " mm): " + num(got) + " vs " + num(predicted));
    }
    v.note("20 draws, worst rel " + num(worst, 3));
    return v;
}

Verdict saturation_bound() {
    Verdict v;
    ScenarioConfig base = scenario_preset(ScenarioLabel::C);
    base.board.breakage_force = 1e6;
    const double f_th = base.saturation.f_th.z;
    const double settle = 1.0;
    std::string report;
    for (double depth : {0.02, 0.03, 0.05}) {
        for (double factor : {1.0, 2.0}) {
            ScenarioConfig cfg = base;
            cfg.saturation.K_e_est = Diag3{{0.0, 0.0, factor * cfg.board.K_e}};
            const SessionOutcome out = run_session(cfg, held_press(cfg, depth, 4.0), 4.0);
            const ForceProfile p = normal_force_profile(out.log, cfg.board, "C");
            if (!out.success || p.samples.empty()) {
                v.require(false, "press " + num(depth) + " m did not complete");
                continue;
            }
            const double tol = factor == 1.0 ? 0.05 : 0.0;
            const SettleResult s = settle_and_bound(p, f_th, settle, tol);
            double peak = 0.0;
            for (const auto& smp : p.samples) peak = std::max(peak, std::abs(smp.f));
            v.require(s.satisfied, (factor == 1.0 ? "exact" : "2x") + std::string(" estimate, ") +
                                       num(depth * 1e3) + " mm: settled " + num(s.settled_max));
            report += (report.empty() ? "" : ", ") + num(depth * 1e3) + "mm/" + num(factor) + "x settled " +
                      num(s.settled_max) + " peak " + num(peak);
        }
    }
    // the shared aggressive trace, exact estimate
    const ScenarioConfig agg = acceptance_config("aggressive_C");
    const SessionOutcome out = run_scripted(agg);
    const ForceProfile p = normal_force_profile(out.log, agg.board, "C");
    double peak = 0.0;
    for (const auto& smp : p.samples) peak = std::max(peak, std::abs(smp.f));
    v.note(report + "; scripted trace peak " + num(peak) + " N (overshoot " +
           num(100.0 * (peak / f_th - 1.0), 3) + "%, not asserted)");
    return v;
}

Verdict scenario_ordering() {
    Verdict v;
    const ForceProfile human = synthetic_human_profile();
    v.require(std::abs(profile_mean(human) - (-7.25)) <= 1e-9, "human mean -7.25 N");

    const SessionOutcome agg_a = run_scripted(acceptance_config("aggressive_A"));
    const SessionOutcome agg_c = run_scripted(acceptance_config("aggressive_C"));
    v.require(!agg_a.success && agg_a.reason == FailureReason::ChalkBroken, "aggressive A breaks the chalk");
    v.require(agg_c.success, "aggressive C succeeds");

    std::vector<ScenarioMetrics> m;
    for (const char* name : {"gentle_A", "gentle_B", "gentle_C"}) {
        const ScenarioConfig cfg = acceptance_config(name);
        const SessionOutcome out = run_scripted(cfg);
        v.require(out.success, std::string(name) + " succeeds");
        m.push_back(scenario_metrics(std::string(scenario_label_name(cfg.label)), out.log, cfg.board,
                                     out.intended_segments, out.success,
                                     std::string(failure_reason_name(out.reason)), human));
    }
    const auto &a = m[0], &b = m[1], &c = m[2];
    v.require(c.md < b.md && c.md < a.md, "MD_C below MD_A and MD_B");
    v.require(c.continuity.unintended_gaps <= b.continuity.unintended_gaps &&
                  b.continuity.unintended_gaps < a.continuity.unintended_gaps,
              "gaps C <= B < A");
    v.note("aggressive A " + std::string(failure_reason_name(agg_a.reason)) + ", C " +
           std::string(failure_reason_name(agg_c.reason)) + "; MD A/B/C " + num(a.md) + "/" + num(b.md) + "/" +
           num(c.md) + " N; gaps " + std::to_string(a.continuity.unintended_gaps) + "/" +
           std::to_string(b.continuity.unintended_gaps) + "/" + std::to_string(c.continuity.unintended_gaps));
    return v;
}

// 10-90% rise time of |s| from index k0 towards its mean over [t_a, t_b] after k0.
double rise_time(const std::vector<double>& s, std::size_t k0, double dt, double t_a, double t_b) {
    const std::size_t a = k0 + static_cast<std::size_t>(std::lround(t_a / dt));
    const std::size_t b = std::min(s.size(), k0 + static_cast<std::size_t>(std::lround(t_b / dt)));
    double plateau = 0.0;
    for (std::size_t k = a; k < b; ++k) plateau += s[k];
    plateau /= static_cast<double>(b - a);
    std::optional<std::size_t> k10, k90;
    for (std::size_t k = k0; k < b; ++k) {
        if (!k10 && s[k] >= 0.1 * plateau) k10 = k;
        if (!k90 && s[k] >= 0.9 * plateau) k90 = k;
    }
    if (!k10 || !k90) return std::nan("");
    return static_cast<double>(*k90 - *k10) * dt;
}

struct RiseTimes {
    double contact = std::nan("");
    double rendered = std::nan("");
    double onset_t = std::nan("");
};

// Rise times at the first contact onset; plateaus are averaged 1.0-1.2 s
// after onset, once the approach has finished.
RiseTimes onset_rise_times(const ScenarioConfig& cfg) {
    const SessionOutcome out = run_scripted(cfg);
    const auto& rec = out.log.records;
    const Vec3 n_rb = cfg.board.normal;
    const Vec3 n_hb = cfg.R_Hb_to_Rb.conjugate().rotate(n_rb);
    std::vector<double> fe, fh;
    std::size_t onset = rec.size();
    for (std::size_t k = 0; k < rec.size(); ++k) {
        fe.push_back(std::abs(rec[k].f_e.dot(n_rb)));
        fh.push_back(std::abs(rec[k].f_h.dot(n_hb)));
        if (onset == rec.size() && rec[k].contact != ContactState::NoContact) onset = k;
    }
    RiseTimes r;
    if (onset == rec.size()) return r;
    r.onset_t = rec[onset].t;
    r.contact = rise_time(fe, onset, cfg.dt(), 1.0, 1.2);
    r.rendered = rise_time(fh, onset, cfg.dt(), 1.0, 1.2);
    return r;
}

Verdict rendering_rise_time() {
    Verdict v;
    const ScenarioConfig cfg = acceptance_config("gentle_C");
    const RiseTimes r = onset_rise_times(cfg);
    v.require(std::isfinite(r.contact) && std::isfinite(r.rendered), "both signals rise after onset");
    v.require(r.rendered >= 2.0 * r.contact, "rendered rise >= 2x contact rise");
    v.note("onset t " + num(r.onset_t) + " s; contact rise " + num(r.contact * 1e3) + " ms, rendered rise " +
           num(r.rendered * 1e3) + " ms (ratio " + num(r.rendered / r.contact, 3) + ")");
    // dependence on the scripted approach speed, reported only
    std::string sweep;
    for (double speed : {0.04, 0.2, 0.3}) {
        ScenarioConfig c = cfg;
        c.scripted.approach_speed = speed;
        const RiseTimes s = onset_rise_times(c);
        sweep += (sweep.empty() ? "" : ", ") + num(speed) + " m/s " + num(s.rendered / s.contact, 3);
    }
    v.note("ratio vs approach speed: " + sweep);
    return v;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Verdict determinism() {
    Verdict v;
    const fs::path root = fs::path(TELEOP_TEST_TMP) / "determinism";
    fs::remove_all(root);
    auto invoke = [&](std::vector<std::string> args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return std::make_pair(code, out.str());
    };
    std::size_t files = 0;
    for (int k = 0; k < 2; ++k) {
        const fs::path d = root / std::to_string(k);
        invoke({"run", "--config", source("configs/acceptance/gentle_C.yaml"), "--seed", "7", "--out",
                (d / "run").string(), "--save-trace", (d / "trace.csv").string()});
        invoke({"run", "--config", source("configs/acceptance/aggressive_A.yaml"), "--seed", "7", "--out",
                (d / "run_fail").string()});
        invoke({"compare", "--config", source("configs/acceptance/gentle_A.yaml"), "--config",
                source("configs/acceptance/gentle_B.yaml"), "--config", source("configs/acceptance/gentle_C.yaml"),
                "--seed", "7", "--out", (d / "compare").string()});
        invoke({"analyze", "--config", source("configs/acceptance/gentle_C.yaml"), (d / "run" / "log.csv").string(),
                "--out", (d / "analyze.json").string()});
    }
    for (const auto& e : fs::recursive_directory_iterator(root / "0")) {
        if (!e.is_regular_file()) continue;
        const fs::path rel = fs::relative(e.path(), root / "0");
        const fs::path twin = root / "1" / rel;
        ++files;
        v.require(fs::exists(twin) && slurp(e.path()) == slurp(twin), rel.string() + " identical");
    }
    v.require(files >= 11, "all outputs written");
    v.note(std::to_string(files) + " files compared byte for byte");
    return v;
}

struct Criterion {
    const char* name;
    double budget_s;
    Verdict (*check)();
};

}  // namespace

int main() {
    const Criterion criteria[] = {
        {"analytic identities", 1.0, analytic_identities},
        {"filter suite", 5.0, filter_suite},
        {"admittance integration", 5.0, admittance_integration},
        {"steady-state force law", 30.0, steady_state_law},
        {"saturation bound", 30.0, saturation_bound},
        {"scenario ordering", 120.0, scenario_ordering},
        {"rendering rise time", 30.0, rendering_rise_time},
        {"determinism", 120.0, determinism},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.check();
        } catch (const std::exception& e) {
            v.require(false, std::string("exception: ") + e.what());
        }
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        v.require(elapsed < c.budget_s, "runtime under " + num(c.budget_s) + " s");
        if (!v.pass) ++failures;
        std::printf("%s  %-24s %7.3f s  %s\n", v.pass ? "PASS" : "FAIL", c.name, elapsed, v.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failures, std::size(criteria));
    return failures == 0 ? 0 : 1;
}
