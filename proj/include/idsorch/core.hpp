#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace idsorch {

using json = nlohmann::ordered_json;

// Virtual seconds from scenario start. All component timestamps come from
// an injectable clock so runs are reproducible.
class VirtualClock {
public:
    double now() const { return t_; }
    void advance(double dt) { t_ += dt; }
    void set(double t) { t_ = t; }

private:
    double t_ = 0.0;
};

struct HostId {
    std::string name;

    auto operator<=>(const HostId&) const = default;
};

inline void to_json(json& j, const HostId& h) { j = h.name; }
inline void from_json(const json& j, HostId& h) { h.name = j.get<std::string>(); }

enum class Protocol { TCP, UDP };

struct Endpoint {
    std::string addr;
    uint16_t port = 0;

    auto operator<=>(const Endpoint&) const = default;
};

struct FlowKey {
    Protocol protocol = Protocol::TCP;
    Endpoint src;
    Endpoint dst;
    std::string process_name;
    int uid = 0;  // 0 = root

    auto operator<=>(const FlowKey&) const = default;
};

enum class ConditionKind { DnsRateExceeded, MaliciousUrlContact, RootHttpAttempt };

struct AlertCondition {
    ConditionKind kind = ConditionKind::DnsRateExceeded;
    std::optional<double> observed_rate;  // present iff DnsRateExceeded
    std::optional<std::string> url;       // present iff url-bearing kinds
    int uid = 0;

    auto operator<=>(const AlertCondition&) const = default;
};

struct Alert {
    uint64_t alert_id = 0;  // assigned by the orchestrator on record
    HostId host;
    std::string module_id;
    AlertCondition condition;
    double raised_at = 0.0;
    double received_at = 0.0;

    auto operator<=>(const Alert&) const = default;
};

enum class ModuleKind { DnsRateMonitor, DnsThrottle, HttpUrlBlock, RootHttpMonitor };
enum class BuildMode { PreBuilt, JIT };

struct ModuleParams {
    std::optional<double> threshold;                     // queries/second
    std::optional<double> limit;                         // queries/second
    std::optional<std::vector<std::string>> blocklist;   // sorted url host names
    double cooldown_seconds = 10.0;

    auto operator<=>(const ModuleParams&) const = default;
};

struct ModuleSpec {
    std::string module_id;
    ModuleKind kind = ModuleKind::DnsRateMonitor;
    BuildMode build_mode = BuildMode::PreBuilt;
    ModuleParams params;
    std::vector<uint64_t> context_alert_ids;
    std::optional<std::string> replaces;

    auto operator<=>(const ModuleSpec&) const = default;
};

enum class HostPolicy { AllHosts, AffectedHostOnly };

struct DeploymentPlan {
    uint64_t trigger_alert = 0;
    std::vector<std::pair<HostId, ModuleSpec>> targets;
    HostPolicy policy = HostPolicy::AllHosts;
};

enum class VerdictAction { Pass, Drop, Poison };

struct Verdict {
    VerdictAction action = VerdictAction::Pass;
    std::optional<AlertCondition> alert;
};

enum class TimelineLabel { A_AlertRaised, B_OrchestratorNotified, C_ModuleDeployed, D_ResponseEffective };

struct TimelineEvent {
    TimelineLabel label = TimelineLabel::A_AlertRaised;
    HostId host;
    double timestamp = 0.0;
    std::string detail;
};

// --- enum <-> string ---

inline const char* to_string(Protocol p) { return p == Protocol::TCP ? "tcp" : "udp"; }

inline const char* to_string(ConditionKind k) {
    switch (k) {
        case ConditionKind::DnsRateExceeded: return "dns_rate_exceeded";
        case ConditionKind::MaliciousUrlContact: return "malicious_url_contact";
        case ConditionKind::RootHttpAttempt: return "root_http_attempt";
    }
    return "?";
}

inline const char* to_string(ModuleKind k) {
    switch (k) {
        case ModuleKind::DnsRateMonitor: return "dns_rate_monitor";
        case ModuleKind::DnsThrottle: return "dns_throttle";
        case ModuleKind::HttpUrlBlock: return "http_url_block";
        case ModuleKind::RootHttpMonitor: return "root_http_monitor";
    }
    return "?";
}

inline const char* to_string(BuildMode m) { return m == BuildMode::PreBuilt ? "prebuilt" : "jit"; }

inline const char* to_string(HostPolicy p) {
    return p == HostPolicy::AllHosts ? "all_hosts" : "affected_host_only";
}

inline const char* to_string(VerdictAction a) {
    switch (a) {
        case VerdictAction::Pass: return "pass";
        case VerdictAction::Drop: return "drop";
        case VerdictAction::Poison: return "poison";
    }
    return "?";
}

inline const char* to_string(TimelineLabel l) {
    switch (l) {
        case TimelineLabel::A_AlertRaised: return "A";
        case TimelineLabel::B_OrchestratorNotified: return "B";
        case TimelineLabel::C_ModuleDeployed: return "C";
        case TimelineLabel::D_ResponseEffective: return "D";
    }
    return "?";
}

inline ConditionKind condition_kind_from(const std::string& s) {
    if (s == "dns_rate_exceeded") return ConditionKind::DnsRateExceeded;
    if (s == "malicious_url_contact") return ConditionKind::MaliciousUrlContact;
    if (s == "root_http_attempt") return ConditionKind::RootHttpAttempt;
    throw std::runtime_error("unknown condition kind: " + s);
}

inline ModuleKind module_kind_from(const std::string& s) {
    if (s == "dns_rate_monitor") return ModuleKind::DnsRateMonitor;
    if (s == "dns_throttle") return ModuleKind::DnsThrottle;
    if (s == "http_url_block") return ModuleKind::HttpUrlBlock;
    if (s == "root_http_monitor") return ModuleKind::RootHttpMonitor;
    throw std::runtime_error("unknown module kind: " + s);
}

inline BuildMode build_mode_from(const std::string& s) {
    if (s == "prebuilt") return BuildMode::PreBuilt;
    if (s == "jit") return BuildMode::JIT;
    throw std::runtime_error("unknown build mode: " + s);
}

inline HostPolicy host_policy_from(const std::string& s) {
    if (s == "all_hosts") return HostPolicy::AllHosts;
    if (s == "affected_host_only") return HostPolicy::AffectedHostOnly;
    throw std::runtime_error("unknown host policy: " + s);
}

// --- json encoding (field order fixed; canonical wire/export form) ---

inline void to_json(json& j, const AlertCondition& c) {
    j = json{{"kind", to_string(c.kind)}};
    if (c.observed_rate) j["observed_rate"] = *c.observed_rate;
    if (c.url) j["url"] = *c.url;
    j["uid"] = c.uid;
}

inline void from_json(const json& j, AlertCondition& c) {
    c.kind = condition_kind_from(j.at("kind").get<std::string>());
    if (j.contains("observed_rate")) c.observed_rate = j.at("observed_rate").get<double>();
    else c.observed_rate.reset();
    if (j.contains("url")) c.url = j.at("url").get<std::string>();
    else c.url.reset();
    c.uid = j.at("uid").get<int>();
}

inline void to_json(json& j, const Alert& a) {
    j = json{{"alert_id", a.alert_id},
             {"host", a.host},
             {"module_id", a.module_id},
             {"condition", a.condition},
             {"raised_at", a.raised_at},
             {"received_at", a.received_at}};
}

inline void from_json(const json& j, Alert& a) {
    a.alert_id = j.at("alert_id").get<uint64_t>();
    a.host = j.at("host").get<HostId>();
    a.module_id = j.at("module_id").get<std::string>();
    a.condition = j.at("condition").get<AlertCondition>();
    a.raised_at = j.at("raised_at").get<double>();
    a.received_at = j.at("received_at").get<double>();
}

inline void to_json(json& j, const ModuleParams& p) {
    j = json::object();
    if (p.threshold) j["threshold"] = *p.threshold;
    if (p.limit) j["limit"] = *p.limit;
    if (p.blocklist) j["blocklist"] = *p.blocklist;
    j["cooldown_seconds"] = p.cooldown_seconds;
}

inline void from_json(const json& j, ModuleParams& p) {
    if (j.contains("threshold")) p.threshold = j.at("threshold").get<double>();
    else p.threshold.reset();
    if (j.contains("limit")) p.limit = j.at("limit").get<double>();
    else p.limit.reset();
    if (j.contains("blocklist")) p.blocklist = j.at("blocklist").get<std::vector<std::string>>();
    else p.blocklist.reset();
    p.cooldown_seconds = j.value("cooldown_seconds", 10.0);
}

inline void to_json(json& j, const ModuleSpec& s) {
    j = json{{"module_id", s.module_id},
             {"kind", to_string(s.kind)},
             {"build_mode", to_string(s.build_mode)},
             {"params", s.params},
             {"context_alert_ids", s.context_alert_ids}};
    if (s.replaces) j["replaces"] = *s.replaces;
}

inline void from_json(const json& j, ModuleSpec& s) {
    s.module_id = j.at("module_id").get<std::string>();
    s.kind = module_kind_from(j.at("kind").get<std::string>());
    s.build_mode = build_mode_from(j.at("build_mode").get<std::string>());
    s.params = j.at("params").get<ModuleParams>();
    s.context_alert_ids = j.value("context_alert_ids", std::vector<uint64_t>{});
    if (j.contains("replaces")) s.replaces = j.at("replaces").get<std::string>();
    else s.replaces.reset();
}

// --- validation ---

inline std::optional<std::string> validate(const AlertCondition& c) {
    switch (c.kind) {
        case ConditionKind::DnsRateExceeded:
            if (!c.observed_rate) return "observed_rate required for dns_rate_exceeded";
            if (*c.observed_rate <= 0) return "observed_rate must be positive";
            if (c.url) return "url not allowed for dns_rate_exceeded";
            break;
        case ConditionKind::MaliciousUrlContact:
        case ConditionKind::RootHttpAttempt:
            if (!c.url || c.url->empty()) return "url required";
            if (c.observed_rate) return "observed_rate not allowed";
            break;
    }
    return std::nullopt;
}

inline std::optional<std::string> validate(const ModuleSpec& s) {
    if (s.module_id.empty()) return "module_id must be non-empty";
    switch (s.kind) {
        case ModuleKind::DnsRateMonitor:
            if (!s.params.threshold || *s.params.threshold <= 0) return "threshold must be positive";
            break;
        case ModuleKind::DnsThrottle:
            if (!s.params.limit || *s.params.limit <= 0) return "limit must be positive";
            break;
        case ModuleKind::HttpUrlBlock:
            if (!s.params.blocklist || s.params.blocklist->empty()) return "blocklist must be non-empty";
            break;
        case ModuleKind::RootHttpMonitor:
            if (!s.params.blocklist) return "blocklist required (may be empty)";
            break;
    }
    if (s.build_mode == BuildMode::JIT && s.context_alert_ids.empty())
        return "jit spec must record context_alert_ids";
    return std::nullopt;
}

// --- misc helpers ---

inline std::string lower_copy(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

inline bool url_equal(const std::string& a, const std::string& b) {
    return lower_copy(a) == lower_copy(b);
}

inline std::string fmt_seconds(double t) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", t);
    return buf;
}

// Deterministic module id: kind plus a short hash of the canonical params dump.
// Identical kind+params always map to the same id, which drives deployment dedup.
inline std::string derive_module_id(ModuleKind kind, const ModuleParams& params) {
    json j = params;
    std::string dump = j.dump();
    uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (unsigned char c : dump) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%08llx", static_cast<unsigned long long>(h & 0xffffffffull));
    return std::string(to_string(kind)) + "-" + buf;
}

inline std::string timeline_csv_header() { return "label,host,timestamp_s,detail"; }

inline std::string to_csv_row(const TimelineEvent& e) {
    return std::string(to_string(e.label)) + "," + e.host.name + "," + fmt_seconds(e.timestamp) + "," + e.detail;
}

inline std::string alerts_csv_header() {
    return "alert_id,host,kind,url,observed_rate,raised_at,received_at";
}

inline std::string to_csv_row(const Alert& a) {
    std::string url = a.condition.url.value_or("");
    std::string rate = a.condition.observed_rate ? fmt_seconds(*a.condition.observed_rate) : "";
    return std::to_string(a.alert_id) + "," + a.host.name + "," + to_string(a.condition.kind) + "," +
           url + "," + rate + "," + fmt_seconds(a.raised_at) + "," + fmt_seconds(a.received_at);
}

}  // namespace idsorch
