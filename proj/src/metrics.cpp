#include "teleop/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace teleop {

void ForceProfile::validate() const {
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!std::isfinite(samples[i].t) || !std::isfinite(samples[i].f))
            throw ContractViolation("ForceProfile: non-finite sample");
        if (i > 0 && samples[i].t < samples[i - 1].t)
            throw ContractViolation("ForceProfile: time not monotone");
    }
}

namespace {

void require_nonempty(const ForceProfile& p, const char* what) {
    if (p.samples.empty()) throw ContractViolation(std::string(what) + ": empty force profile");
}

}  // namespace

double profile_mean(const ForceProfile& p) {
    require_nonempty(p, "profile_mean");
    double sum = 0.0;
    for (const auto& s : p.samples) sum += s.f;
    return sum / static_cast<double>(p.samples.size());
}

double signed_extremum(const ForceProfile& p) {
    require_nonempty(p, "signed_extremum");
    double best = p.samples.front().f;
    for (const auto& s : p.samples)
        if (std::abs(s.f) > std::abs(best)) best = s.f;
    return best;
}

double mean_difference(const ForceProfile& hum, const ForceProfile& rob) {
    require_nonempty(hum, "mean_difference");
    require_nonempty(rob, "mean_difference");
    return std::abs(profile_mean(hum) - profile_mean(rob));
}

double peak_difference(const ForceProfile& hum, const ForceProfile& rob) {
    require_nonempty(hum, "peak_difference");
    require_nonempty(rob, "peak_difference");
    return std::abs(std::abs(signed_extremum(hum)) - std::abs(signed_extremum(rob)));
}

ContinuityMetrics continuity_metrics(const StrokeCanvas& canvas, std::size_t intended_segments) {
    ContinuityMetrics m;
    m.segments = canvas.segments().size();
    m.unintended_gaps = m.segments > intended_segments ? m.segments - intended_segments : 0;
    return m;
}

SettleResult settle_and_bound(const ForceProfile& p, double f_th, double settle_window,
                              double tolerance) {
    require_nonempty(p, "settle_and_bound");
    if (!(settle_window >= 0.0)) throw ContractViolation("settle_and_bound: negative window");
    const double t_end = p.samples.back().t;
    if (t_end - p.samples.front().t < settle_window)
        throw ContractViolation("settle_and_bound: profile shorter than settle window");
    SettleResult r;
    for (const auto& s : p.samples)
        if (s.t >= t_end - settle_window) r.settled_max = std::max(r.settled_max, std::abs(s.f));
    r.satisfied = r.settled_max <= f_th * (1.0 + tolerance);
    return r;
}

ForceProfile normal_force_profile(const SessionLog& log, const BlackboardModel& board,
                                  std::string source) {
    ForceProfile p;
    p.source = std::move(source);
    for (const auto& r : log.records)
        if (r.contact != ContactState::NoContact) p.samples.push_back({r.t, r.f_e.dot(board.normal)});
    return p;
}

StrokeCanvas canvas_from_log(const SessionLog& log, const BlackboardModel& board) {
    StrokeCanvas canvas;
    for (const auto& r : log.records) {
        const double depth = (board.plane_point - r.plant.position).dot(board.normal);
        const auto uv = to_board(r.plant.position, board);
        canvas.deposit({uv[0], uv[1]}, depth > 0.0, r.chalk_intact);
    }
    return canvas;
}

ForceProfile synthetic_human_profile(double duration_s, double dt) {
    if (!(duration_s > 0.0) || !(dt > 0.0) || dt > duration_s)
        throw ContractViolation("synthetic_human_profile: bad duration or dt");
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const auto n = static_cast<std::size_t>(std::floor(duration_s / dt)) + 1;
    std::vector<double> raw(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * dt;
        // stroke rhythm plus slower pressure drift
        raw[k] = 1.0 + 0.35 * std::sin(two_pi * 1.7 * t) + 0.2 * std::sin(two_pi * 4.3 * t + 0.6) +
                 0.15 * std::sin(two_pi * 0.4 * t + 1.1);
    }
    double mean = 0.0;
    for (double v : raw) mean += v;
    mean /= static_cast<double>(n);
    const double top = *std::max_element(raw.begin(), raw.end());
    const double scale = (kHumanExtremum - kHumanMean) / (top - mean);
    ForceProfile p;
    p.source = "human";
    p.samples.reserve(n);
    for (std::size_t k = 0; k < n; ++k)
        p.samples.push_back({static_cast<double>(k) * dt, kHumanMean + scale * (raw[k] - mean)});
    return p;
}

ScenarioMetrics scenario_metrics(const std::string& label, const SessionLog& log,
                                 const BlackboardModel& board, std::size_t intended_segments,
                                 bool success, const std::string& failure_reason,
                                 const ForceProfile& human) {
    ScenarioMetrics m;
    m.label = label;
    m.success = success;
    m.failure_reason = failure_reason;
    ForceProfile rob = normal_force_profile(log, board, label);
    m.contact_samples = rob.samples.size();
    if (rob.samples.empty()) rob.samples.push_back({0.0, 0.0});
    m.mean_force = profile_mean(rob);
    m.peak_force = signed_extremum(rob);
    m.md = mean_difference(human, rob);
    m.delta_f_max = peak_difference(human, rob);
    m.continuity = continuity_metrics(canvas_from_log(log, board), intended_segments);
    return m;
}

}  // namespace teleop
