#include "teleop/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <boost/asio/io_context.hpp>
#include <boost/asio/signal_set.hpp>

#include "teleop/log_io.hpp"
#include "teleop/metrics.hpp"
#include "teleop/service.hpp"
#include "teleop/session.hpp"

#ifndef TELEOP_VERSION
#define TELEOP_VERSION "0.0.0"
#endif

namespace teleop {

namespace {

namespace fs = std::filesystem;

/// Failure the user can fix (bad flags, files, configs): exit 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonOptions {
    std::string config_path;
    std::string scenario;
    std::string operator_spec;
    std::optional<std::uint64_t> seed;
    std::optional<double> rate_hz;
    std::optional<double> duration_s;
    std::string human_path;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_config) {
    if (with_config) cmd->add_option("--config", o.config_path, "Scenario YAML file");
    cmd->add_option("--scenario", o.scenario, "Scenario label A, B, C or custom");
    cmd->add_option("--operator", o.operator_spec,
                    "Operator source: scripted:<letters|glyph json> or replay:<csv>");
    cmd->add_option("--seed", o.seed, "Tremor seed override");
    cmd->add_option("--rate-hz", o.rate_hz, "Control rate override");
    cmd->add_option("--duration-s", o.duration_s, "Session length cap override");
    cmd->add_option("--human", o.human_path, "Reference force profile CSV (t,f)");
}

std::optional<ScenarioLabel> label_option(const std::string& s) {
    if (s.empty()) return std::nullopt;
    auto l = parse_scenario_label(s);
    if (!l) throw UsageError("unknown scenario '" + s + "' (expected A, B, C or custom)");
    return l;
}

ScenarioConfig resolve_config(const std::string& path, const CommonOptions& o) {
    const auto label = label_option(o.scenario);
    if (path.empty() && !label) throw UsageError("either --config or --scenario is required");
    ScenarioConfig cfg;
    try {
        cfg = path.empty() ? scenario_preset(*label) : load_config(path, label);
        if (o.seed) cfg.scripted.seed = *o.seed;
        if (o.rate_hz) cfg.rate_hz = *o.rate_hz;
        if (o.duration_s) cfg.duration_s = *o.duration_s;
        cfg.validate();
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    }
    return cfg;
}

std::string operator_spec(const CommonOptions& o, const ScenarioConfig& cfg) {
    return o.operator_spec.empty() ? "scripted:" + cfg.scripted.letters : o.operator_spec;
}

std::unique_ptr<OperatorSource> build_operator(const std::string& spec, const ScenarioConfig& cfg) {
    try {
        return make_operator(spec, cfg);
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
}

ForceProfile human_profile(const CommonOptions& o) {
    if (o.human_path.empty()) return synthetic_human_profile();
    try {
        return read_force_profile_csv(o.human_path);
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
}

MetricsReport report_for(const ForceProfile& human) {
    MetricsReport r;
    r.human_mean = profile_mean(human);
    r.human_peak = signed_extremum(human);
    return r;
}

std::string scenario_name(const ScenarioConfig& cfg) {
    return std::string(scenario_label_name(cfg.label));
}

std::string json_text(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw UsageError("cannot create output directory " + dir + ": " + ec.message());
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string metrics_table(const MetricsReport& r) {
    const std::vector<std::string> head = {"scenario", "outcome",  "MD[N]",    "dF_max[N]",
                                           "mean[N]",  "peak[N]",  "segments", "gaps"};
    std::vector<std::vector<std::string>> rows = {head};
    for (const auto& s : r.scenarios)
        rows.push_back({s.label, s.success ? "success" : s.failure_reason, fixed(s.md, 3),
                        fixed(s.delta_f_max, 3), fixed(s.mean_force, 3), fixed(s.peak_force, 3),
                        std::to_string(s.continuity.segments),
                        std::to_string(s.continuity.unintended_gaps)});
    std::vector<std::size_t> width(head.size(), 0);
    for (const auto& row : rows)
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    std::string out;
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += "  ";
            // text columns left, numbers right
            const std::size_t pad = width[c] - row[c].size();
            if (c < 2)
                out += row[c] + std::string(pad, ' ');
            else
                out += std::string(pad, ' ') + row[c];
        }
        while (!out.empty() && out.back() == ' ') out.pop_back();
        out += '\n';
    }
    return out;
}

int cmd_run(const CommonOptions& o, const std::string& out_dir, const std::string& trace_path,
            std::ostream& out) {
    const ScenarioConfig cfg = resolve_config(o.config_path, o);
    const ForceProfile human = human_profile(o);
    const std::string spec = operator_spec(o, cfg);
    auto op = build_operator(spec, cfg);
    SessionOutcome outcome = run_session(cfg, std::move(op), cfg.duration_s);

    const ScenarioMetrics m =
        scenario_metrics(scenario_name(cfg), outcome.log, cfg.board, outcome.intended_segments,
                         outcome.success, std::string(failure_reason_name(outcome.reason)), human);
    MetricsReport report = report_for(human);
    report.scenarios.push_back(m);

    ensure_dir(out_dir);
    const fs::path dir(out_dir);
    {
        std::ostringstream csv;
        write_log_csv(csv, outcome.log);
        write_text_file((dir / "log.csv").string(), csv.str());
    }
    write_text_file((dir / "summary.json").string(), json_text(summary_json(outcome, m, cfg)));
    write_text_file((dir / "strokes.svg").string(), strokes_svg(outcome.canvas));
    write_text_file((dir / "metrics.json").string(), json_text(metrics_report_json(report)));
    if (!trace_path.empty()) {
        std::vector<StylusSample> samples;
        samples.reserve(outcome.log.records.size());
        for (const auto& r : outcome.log.records) samples.push_back({r.t, r.stylus});
        write_replay_csv(trace_path, samples);
    }

    out << "scenario " << m.label << ": " << (outcome.success ? "success" : m.failure_reason)
        << " after " << outcome.log.records.size() << " steps";
    if (!outcome.diagnostic.empty()) out << " (" << outcome.diagnostic << ")";
    out << "\n" << metrics_table(report);
    out << "wrote " << (dir / "log.csv").string() << ", summary.json, strokes.svg, metrics.json\n";
    return outcome.success ? kExitOk : kExitTaskFailure;
}

int cmd_compare(const CommonOptions& o, const std::vector<std::string>& configs,
                const std::string& scenarios, const std::string& out_dir, std::ostream& out) {
    std::vector<ScenarioConfig> cfgs;
    for (const auto& path : configs) cfgs.push_back(resolve_config(path, o));
    if (!scenarios.empty()) {
        std::stringstream ss(scenarios);
        std::string item;
        while (std::getline(ss, item, ',')) {
            CommonOptions single = o;
            single.scenario = item;
            cfgs.push_back(resolve_config("", single));
        }
    }
    if (cfgs.size() < 2)
        throw UsageError("compare needs at least two scenario configs (got " +
                         std::to_string(cfgs.size()) + ")");
    const ForceProfile human = human_profile(o);
    const std::string spec = o.operator_spec.empty() ? operator_spec(o, cfgs.front()) : o.operator_spec;
    MetricsReport report = report_for(human);
    for (const auto& cfg : cfgs) {
        SessionOutcome outcome = run_session(cfg, build_operator(spec, cfg), cfg.duration_s);
        report.scenarios.push_back(scenario_metrics(
            scenario_name(cfg), outcome.log, cfg.board, outcome.intended_segments, outcome.success,
            std::string(failure_reason_name(outcome.reason)), human));
    }
    nlohmann::ordered_json j;
    j["operator"] = spec;
    const auto report_json = metrics_report_json(report);
    j["human"] = report_json["human"];
    j["scenarios"] = report_json["scenarios"];
    const std::string table = metrics_table(report);
    out << json_text(j) << "\n" << table;
    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        write_text_file((fs::path(out_dir) / "compare.json").string(), json_text(j));
        write_text_file((fs::path(out_dir) / "compare.txt").string(), table);
    }
    return kExitOk;
}

int cmd_analyze(const CommonOptions& o, const std::vector<std::string>& logs,
                std::optional<std::size_t> intended, const std::string& out_path, std::ostream& out) {
    ScenarioConfig cfg = o.config_path.empty() && o.scenario.empty()
                             ? scenario_preset(ScenarioLabel::Custom)
                             : resolve_config(o.config_path, o);
    const ForceProfile human = human_profile(o);
    std::size_t segments = 0;
    if (intended) {
        segments = *intended;
    } else {
        const std::string& letters = cfg.scripted.letters;
        const bool is_file = letters.find('.') != std::string::npos || letters.find('/') != std::string::npos;
        try {
            segments = stroke_count(is_file ? load_glyphs(letters) : builtin_glyphs(letters));
        } catch (const std::exception& e) {
            throw UsageError(e.what());
        }
    }
    MetricsReport report = report_for(human);
    for (const auto& path : logs) {
        SessionLog log;
        try {
            log = read_log_csv_file(path);
        } catch (const std::exception& e) {
            throw UsageError(e.what());
        }
        const bool intact = log.records.empty() || log.records.back().chalk_intact;
        report.scenarios.push_back(scenario_metrics(scenario_name(cfg), log, cfg.board, segments, intact,
                                                    intact ? "none" : "chalk_broken", human));
    }
    const std::string text = json_text(metrics_report_json(report));
    out << text;
    if (!out_path.empty()) write_text_file(out_path, text);
    return kExitOk;
}

int cmd_serve(const CommonOptions& o, const std::string& bind, std::ostream& out) {
    ServiceOptions opts;
    opts.config = o.config_path.empty() && o.scenario.empty() ? scenario_preset(ScenarioLabel::C)
                                                              : resolve_config(o.config_path, o);
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos) throw UsageError("--bind expects host:port");
    opts.bind_address = bind.substr(0, colon);
    try {
        const int port = std::stoi(bind.substr(colon + 1));
        if (port < 0 || port > 65535) throw std::out_of_range("port");
        opts.port = static_cast<unsigned short>(port);
    } catch (const std::exception&) {
        throw UsageError("invalid port in --bind '" + bind + "'");
    }
    SessionServer server(opts);
    try {
        server.start();
    } catch (const std::runtime_error& e) {
        throw UsageError(e.what());
    }
    out << "serving ws://" << opts.bind_address << ":" << server.port() << "/session (healthz at /healthz)"
        << std::endl;
    boost::asio::io_context signals_io;
    boost::asio::signal_set signals(signals_io, SIGINT, SIGTERM);
    signals.async_wait([](const boost::system::error_code&, int) {});
    signals_io.run();
    server.stop();
    out << "stopped\n";
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Haptic bilateral teleoperation simulator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("teleop ") + TELEOP_VERSION);

    CommonOptions run_o, cmp_o, ana_o, srv_o;
    std::string run_out = "out", run_trace;
    auto* run = app.add_subcommand("run", "Run one session and write log.csv, summary.json, "
                                          "strokes.svg and metrics.json");
    add_common(run, run_o, true);
    run->add_option("--out", run_out, "Output directory")->capture_default_str();
    run->add_option("--save-trace", run_trace, "Also write the stylus samples as a replay CSV");

    std::vector<std::string> cmp_configs;
    std::string cmp_scenarios, cmp_out;
    auto* compare = app.add_subcommand("compare", "Run several scenarios on one operator trace");
    add_common(compare, cmp_o, false);
    compare->add_option("--config", cmp_configs, "Scenario YAML files (two or more)");
    compare->add_option("--scenarios", cmp_scenarios, "Comma-separated preset labels, e.g. A,B,C");
    compare->add_option("--out", cmp_out, "Directory for compare.json and compare.txt");

    std::vector<std::string> ana_logs;
    std::optional<std::size_t> ana_intended;
    std::string ana_out;
    auto* analyze = app.add_subcommand("analyze", "Recompute metrics from exported log CSVs");
    add_common(analyze, ana_o, true);
    analyze->add_option("logs", ana_logs, "log.csv files")->required();
    analyze->add_option("--intended", ana_intended, "Intended pen-down segments");
    analyze->add_option("--out", ana_out, "Write the metrics JSON here");

    std::string srv_bind = "127.0.0.1:8080";
    auto* serve = app.add_subcommand("serve", "Serve the /session WebSocket and /healthz");
    add_common(serve, srv_o, true);
    serve->add_option("--bind", srv_bind, "host:port")->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << app.version() << "\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << "run with --help for usage\n";
        return kExitUsage;
    }

    try {
        if (*run) return cmd_run(run_o, run_out, run_trace, out);
        if (*compare) return cmd_compare(cmp_o, cmp_configs, cmp_scenarios, cmp_out, out);
        if (*analyze) return cmd_analyze(ana_o, ana_logs, ana_intended, ana_out, out);
        if (*serve) return cmd_serve(srv_o, srv_bind, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}

}  // namespace teleop
