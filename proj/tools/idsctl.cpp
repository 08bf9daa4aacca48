// idsctl: run simulated IDS orchestration scenarios and inspect the results.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include <idsorch/simnet.hpp>
#include <idsorch/summary.hpp>

namespace fs = std::filesystem;
using namespace idsorch;

namespace {

int fail(int code, const std::string& msg) {
    std::cerr << "idsctl: " << msg << "\n";
    return code;
}

std::optional<sim::Scenario> resolve_scenario(const std::string& ref, std::string& err) {
    if (auto s = sim::library_scenario(ref)) return s;
    if (!fs::exists(ref)) {
        err = "scenario not found: " + ref + " (not a library name or readable file)";
        return std::nullopt;
    }
    try {
        std::ifstream in(ref);
        json j = json::parse(in);
        return j.get<sim::Scenario>();
    } catch (const std::exception& e) {
        err = "failed to parse scenario file " + ref + ": " + e.what();
        return std::nullopt;
    }
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << content;
}

int cmd_run(const std::string& ref, std::string out_dir, std::optional<double> monitor_interval,
            std::optional<uint64_t> seed) {
    std::string err;
    auto scenario = resolve_scenario(ref, err);
    if (!scenario) return fail(1, err);
    if (monitor_interval) scenario->monitor_interval = *monitor_interval;
    if (seed) scenario->seed = *seed;

    auto violations = sim::validate_scenario(*scenario);
    if (!violations.empty()) {
        for (const auto& v : violations) std::cerr << "idsctl: " << v << "\n";
        return 1;
    }

    if (out_dir.empty()) {
        const char* env = std::getenv("IDSCTL_OUTPUT_DIR");
        out_dir = env && *env ? env : "out";
    }

    try {
        sim::RunResult r = sim::run_scenario(*scenario);
        fs::create_directories(out_dir);
        write_file(fs::path(out_dir) / "timeline.csv", r.timeline_csv);
        write_file(fs::path(out_dir) / "rates.csv", r.rates_csv);
        write_file(fs::path(out_dir) / "alerts.csv", r.alerts_csv);
        RunSummary summary = compute_summary(scenario->name, r.timeline_csv, r.rates_csv);
        write_file(fs::path(out_dir) / "summary.json", json(summary).dump(2) + "\n");
        write_file(fs::path(out_dir) / "summary.txt", render_summary(summary));
        std::cout << render_summary(summary);
        std::cout << "wrote timeline.csv, rates.csv, alerts.csv, summary.json, summary.txt to "
                  << out_dir << "\n";
        return 0;
    } catch (const std::exception& e) {
        return fail(2, e.what());
    }
}

int cmd_validate(const std::string& file) {
    std::string err;
    auto scenario = resolve_scenario(file, err);
    if (!scenario) return fail(1, err);
    auto violations = sim::validate_scenario(*scenario);
    for (const auto& v : violations) std::cout << "violation: " << v << "\n";
    if (!violations.empty()) return 1;
    std::cout << "ok: " << scenario->name << "\n";
    return 0;
}

int cmd_compare(const std::string& dir_a, const std::string& dir_b, const std::string& delta_out) {
    auto load = [](const std::string& dir, RunSummary& out) -> bool {
        fs::path p = fs::path(dir) / "summary.json";
        if (!fs::exists(p)) return false;
        try {
            std::ifstream in(p);
            out = json::parse(in).get<RunSummary>();
            return true;
        } catch (const std::exception&) {
            return false;
        }
    };
    RunSummary a, b;
    if (!load(dir_a, a)) return fail(1, "missing or corrupt summary in " + dir_a);
    if (!load(dir_b, b)) return fail(1, "missing or corrupt summary in " + dir_b);

    ComparisonReport report = compare_summaries(a, b);
    if (report.scenario_mismatch)
        std::cerr << "warning: comparing different scenarios (" << a.scenario << " vs " << b.scenario
                  << ")\n";
    std::cout << "comparison: " << a.scenario << " (A) vs " << b.scenario << " (B)\n";
    for (const auto& [host, delta] : report.per_host_delta) {
        std::cout << host << ": response delta "
                  << (delta ? fmt_seconds(*delta) + " s" : std::string("n/a")) << "\n";
    }
    if (report.total_delta)
        std::cout << "total response delta: " << fmt_seconds(*report.total_delta) << " s\n";
    else
        std::cout << "total response delta: n/a\n";
    write_file(delta_out, json(report).dump(2) + "\n");
    std::cout << "wrote " << delta_out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"simulated network-wide host IDS orchestration"};
    app.require_subcommand(1);

    std::string scenario_ref, out_dir, validate_file, dir_a, dir_b;
    std::string delta_out = "compare.json";
    std::optional<double> monitor_interval;
    std::optional<uint64_t> seed;

    auto* run = app.add_subcommand("run", "run a scenario and export timeline/rates/alerts/summary");
    run->add_option("scenario", scenario_ref,
                    "library name (scenario_dns_jit, scenario_dns_prebuilt, scenario_root_http) or "
                    "scenario json file")
        ->required();
    run->add_option("-o,--output", out_dir, "output directory (default $IDSCTL_OUTPUT_DIR or ./out)");
    run->add_option("--monitor-interval", monitor_interval, "override monitor interval in seconds");
    run->add_option("--seed", seed, "override scenario seed");

    auto* validate = app.add_subcommand("validate", "check a scenario file against all invariants");
    validate->add_option("file", validate_file, "scenario json file or library name")->required();

    auto* compare = app.add_subcommand("compare", "compare two run output directories");
    compare->add_option("dirA", dir_a)->required();
    compare->add_option("dirB", dir_b)->required();
    compare->add_option("-o,--output", delta_out, "delta report path (default compare.json)");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return cmd_run(scenario_ref, out_dir, monitor_interval, seed);
    if (validate->parsed()) return cmd_validate(validate_file);
    return cmd_compare(dir_a, dir_b, delta_out);
}
