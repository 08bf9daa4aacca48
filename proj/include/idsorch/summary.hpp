#pragma once

#include <cmath>
#include <map>
#include <sstream>

#include "core.hpp"

namespace idsorch {

// Per-run summary, recomputable by third parties from the CSV exports.

struct HostTimes {
    std::optional<double> a, b, c, d;
};

struct RunSummary {
    std::string scenario;
    std::map<std::string, HostTimes> hosts;
    std::optional<double> total_response_s;  // first A -> last D; absent without alerts
    std::optional<double> post_mitigation_max_rate;
    uint64_t alert_count = 0;  // B events
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        rows.push_back(split_csv_line(line));
    }
    return rows;
}

inline RunSummary compute_summary(const std::string& scenario_name, const std::string& timeline_csv,
                                  const std::string& rates_csv) {
    RunSummary s;
    s.scenario = scenario_name;
    std::optional<double> first_a, last_d;
    for (const auto& row : parse_csv(timeline_csv)) {
        if (row.size() < 3) continue;
        const std::string& label = row[0];
        const std::string& host = row[1];
        double t = std::stod(row[2]);
        HostTimes& h = s.hosts[host];
        auto keep_first = [t](std::optional<double>& slot) {
            if (!slot) slot = t;
        };
        if (label == "A") {
            keep_first(h.a);
            if (!first_a) first_a = t;
        } else if (label == "B") {
            keep_first(h.b);
            s.alert_count++;
        } else if (label == "C") {
            keep_first(h.c);
        } else if (label == "D") {
            keep_first(h.d);
            last_d = t;
        }
    }
    if (first_a && last_d) s.total_response_s = *last_d - *first_a;
    if (last_d) {
        int from = static_cast<int>(std::floor(*last_d)) + 1;
        int best = 0;
        for (const auto& row : parse_csv(rates_csv)) {
            if (row.size() < 3) continue;
            int sec = std::stoi(row[1]);
            int n = std::stoi(row[2]);
            if (sec >= from) best = std::max(best, n);
        }
        s.post_mitigation_max_rate = best;
    }
    return s;
}

inline void to_json(json& j, const HostTimes& h) {
    j = json::object();
    j["A"] = h.a ? json(*h.a) : json(nullptr);
    j["B"] = h.b ? json(*h.b) : json(nullptr);
    j["C"] = h.c ? json(*h.c) : json(nullptr);
    j["D"] = h.d ? json(*h.d) : json(nullptr);
}

inline void from_json(const json& j, HostTimes& h) {
    auto get = [&](const char* k) -> std::optional<double> {
        if (!j.contains(k) || j.at(k).is_null()) return std::nullopt;
        return j.at(k).get<double>();
    };
    h.a = get("A");
    h.b = get("B");
    h.c = get("C");
    h.d = get("D");
}

inline void to_json(json& j, const RunSummary& s) {
    j = json{{"scenario", s.scenario},
             {"hosts", s.hosts},
             {"total_response_s", s.total_response_s ? json(*s.total_response_s) : json(nullptr)},
             {"post_mitigation_max_rate",
              s.post_mitigation_max_rate ? json(*s.post_mitigation_max_rate) : json(nullptr)},
             {"alert_count", s.alert_count}};
}

inline void from_json(const json& j, RunSummary& s) {
    s.scenario = j.at("scenario").get<std::string>();
    s.hosts = j.at("hosts").get<std::map<std::string, HostTimes>>();
    s.total_response_s = j.at("total_response_s").is_null()
                             ? std::nullopt
                             : std::optional<double>(j.at("total_response_s").get<double>());
    s.post_mitigation_max_rate =
        j.at("post_mitigation_max_rate").is_null()
            ? std::nullopt
            : std::optional<double>(j.at("post_mitigation_max_rate").get<double>());
    s.alert_count = j.at("alert_count").get<uint64_t>();
}

inline std::string render_summary(const RunSummary& s) {
    std::ostringstream out;
    out << "scenario: " << s.scenario << "\n";
    out << "alerts recorded: " << s.alert_count << "\n";
    if (s.total_response_s)
        out << "total response time (first A -> last D): " << fmt_seconds(*s.total_response_s) << " s\n";
    else
        out << "total response time: n/a (no alerts)\n";
    if (s.post_mitigation_max_rate)
        out << "post-mitigation max delivered rate: " << *s.post_mitigation_max_rate << " q/s\n";
    for (const auto& [host, t] : s.hosts) {
        out << host << ":";
        auto show = [&](const char* label, const std::optional<double>& v) {
            out << " " << label << "=" << (v ? fmt_seconds(*v) : "-");
        };
        show("A", t.a);
        show("B", t.b);
        show("C", t.c);
        show("D", t.d);
        out << "\n";
    }
    return out.str();
}

struct ComparisonReport {
    std::string scenario_a, scenario_b;
    bool scenario_mismatch = false;
    std::map<std::string, std::optional<double>> per_host_delta;  // response time A-run minus B-run
    std::optional<double> total_delta;
};

// Per-host response time: that host's D relative to the run's first A.
inline ComparisonReport compare_summaries(const RunSummary& a, const RunSummary& b) {
    ComparisonReport r;
    r.scenario_a = a.scenario;
    r.scenario_b = b.scenario;
    r.scenario_mismatch = a.scenario != b.scenario;
    auto first_a = [](const RunSummary& s) -> std::optional<double> {
        std::optional<double> out;
        for (const auto& [_, t] : s.hosts)
            if (t.a && (!out || *t.a < *out)) out = t.a;
        return out;
    };
    auto fa = first_a(a), fb = first_a(b);
    for (const auto& [host, ta] : a.hosts) {
        auto it = b.hosts.find(host);
        if (it == b.hosts.end() || !ta.d || !it->second.d || !fa || !fb) {
            r.per_host_delta[host] = std::nullopt;
            continue;
        }
        r.per_host_delta[host] = (*ta.d - *fa) - (*it->second.d - *fb);
    }
    if (a.total_response_s && b.total_response_s)
        r.total_delta = *a.total_response_s - *b.total_response_s;
    return r;
}

inline void to_json(json& j, const ComparisonReport& r) {
    json hosts = json::object();
    for (const auto& [host, d] : r.per_host_delta) hosts[host] = d ? json(*d) : json(nullptr);
    j = json{{"scenario_a", r.scenario_a},
             {"scenario_b", r.scenario_b},
             {"scenario_mismatch", r.scenario_mismatch},
             {"per_host_delta_s", hosts},
             {"total_delta_s", r.total_delta ? json(*r.total_delta) : json(nullptr)}};
}

}  // namespace idsorch
