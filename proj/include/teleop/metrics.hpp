#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "teleop/environment.hpp"
#include "teleop/session.hpp"

namespace teleop {

struct ForceSample {
    double t = 0.0;
    double f = 0.0;  // N, along the board normal
};

struct ForceProfile {
    std::string source;  // "human" or a scenario label
    std::vector<ForceSample> samples;

    /// Throws ContractViolation on non-finite samples or decreasing time.
    void validate() const;
};

double profile_mean(const ForceProfile& p);
/// Signed sample of largest magnitude.
double signed_extremum(const ForceProfile& p);

/// |mean(hum) - mean(rob)|, each mean over its own sample count.
double mean_difference(const ForceProfile& hum, const ForceProfile& rob);
/// ||extremum(hum)| - |extremum(rob)||.
double peak_difference(const ForceProfile& hum, const ForceProfile& rob);

struct ContinuityMetrics {
    std::size_t segments = 0;
    std::size_t unintended_gaps = 0;
};

ContinuityMetrics continuity_metrics(const StrokeCanvas& canvas, std::size_t intended_segments);

struct SettleResult {
    double settled_max = 0.0;
    bool satisfied = false;
};

/// Largest |f| over the trailing `settle_window` seconds of the profile and
/// whether it stays within f_th * (1 + tolerance).
SettleResult settle_and_bound(const ForceProfile& p, double f_th, double settle_window,
                              double tolerance = 0.0);

/// Board-normal exerted force of every in-contact record (pressing < 0).
ForceProfile normal_force_profile(const SessionLog& log, const BlackboardModel& board,
                                  std::string source);

/// Stroke canvas rebuilt from logged plant positions.
StrokeCanvas canvas_from_log(const SessionLog& log, const BlackboardModel& board);

inline constexpr double kHumanMean = -7.25;
inline constexpr double kHumanExtremum = -12.16;

/// Synthetic freehand writing force: a fixed multi-tone waveform scaled so
/// its mean is kHumanMean and its extremum kHumanExtremum.
ForceProfile synthetic_human_profile(double duration_s = 10.0, double dt = 0.002);

struct ScenarioMetrics {
    std::string label;
    bool success = false;
    std::string failure_reason;
    std::size_t contact_samples = 0;
    double mean_force = 0.0;
    double peak_force = 0.0;
    double md = 0.0;
    double delta_f_max = 0.0;
    ContinuityMetrics continuity;
};

struct MetricsReport {
    double human_mean = 0.0;
    double human_peak = 0.0;
    std::vector<ScenarioMetrics> scenarios;
};

/// Metrics of one session against the human reference. An empty contact
/// profile yields zero mean/peak and MD/peak differences against zero.
ScenarioMetrics scenario_metrics(const std::string& label, const SessionLog& log,
                                 const BlackboardModel& board, std::size_t intended_segments,
                                 bool success, const std::string& failure_reason,
                                 const ForceProfile& human);

}  // namespace teleop
