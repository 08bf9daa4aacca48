#pragma once

#include <cmath>
#include <functional>
#include <queue>

#include "agent.hpp"
#include "orchestrator.hpp"

namespace idsorch::sim {

enum class Role { Aggressive, MidLevel, Benign };
enum class TrafficKind { DnsFlood, RootHttp, Benign };

inline const char* to_string(Role r) {
    switch (r) {
        case Role::Aggressive: return "aggressive";
        case Role::MidLevel: return "midlevel";
        case Role::Benign: return "benign";
    }
    return "?";
}

inline const char* to_string(TrafficKind k) {
    switch (k) {
        case TrafficKind::DnsFlood: return "dns_flood";
        case TrafficKind::RootHttp: return "root_http";
        case TrafficKind::Benign: return "benign";
    }
    return "?";
}

inline Role role_from(const std::string& s) {
    if (s == "aggressive") return Role::Aggressive;
    if (s == "midlevel") return Role::MidLevel;
    if (s == "benign") return Role::Benign;
    throw std::runtime_error("unknown role: " + s);
}

inline TrafficKind traffic_kind_from(const std::string& s) {
    if (s == "dns_flood") return TrafficKind::DnsFlood;
    if (s == "root_http") return TrafficKind::RootHttp;
    if (s == "benign") return TrafficKind::Benign;
    throw std::runtime_error("unknown traffic kind: " + s);
}

struct HttpRequestEvent {
    double time = 0.0;
    std::string url;
    int uid = 0;
};

inline void to_json(json& j, const HttpRequestEvent& e) {
    j = json{{"time", e.time}, {"url", e.url}, {"uid", e.uid}};
}

inline void from_json(const json& j, HttpRequestEvent& e) {
    e.time = j.at("time").get<double>();
    e.url = j.at("url").get<std::string>();
    e.uid = j.at("uid").get<int>();
}

struct TrafficProfile {
    TrafficKind kind = TrafficKind::Benign;
    double baseline_rate = 5.0;   // queries/second
    double attack_rate = 5.0;     // queries/second
    double attack_start = 0.0;    // seconds
    std::vector<HttpRequestEvent> http_requests;  // used when kind = root_http
};

inline void to_json(json& j, const TrafficProfile& p) {
    j = json{{"kind", to_string(p.kind)},
             {"baseline_rate", p.baseline_rate},
             {"attack_rate", p.attack_rate},
             {"attack_start", p.attack_start}};
    if (!p.http_requests.empty()) j["http_requests"] = p.http_requests;
}

inline void from_json(const json& j, TrafficProfile& p) {
    p.kind = traffic_kind_from(j.at("kind").get<std::string>());
    p.baseline_rate = j.at("baseline_rate").get<double>();
    p.attack_rate = j.at("attack_rate").get<double>();
    p.attack_start = j.at("attack_start").get<double>();
    p.http_requests = j.value("http_requests", std::vector<HttpRequestEvent>{});
}

struct HostConfig {
    HostId host;
    Role role = Role::Benign;
    TrafficProfile profile;
    std::vector<ModuleSpec> preinstalled;
};

inline void to_json(json& j, const HostConfig& h) {
    j = json{{"host", h.host},
             {"role", to_string(h.role)},
             {"profile", h.profile},
             {"preinstalled", h.preinstalled}};
}

inline void from_json(const json& j, HostConfig& h) {
    h.host = j.at("host").get<HostId>();
    h.role = role_from(j.at("role").get<std::string>());
    h.profile = j.at("profile").get<TrafficProfile>();
    h.preinstalled = j.value("preinstalled", std::vector<ModuleSpec>{});
}

struct Scenario {
    std::string name;
    std::vector<HostConfig> hosts;
    std::vector<ResponseRule> rules;
    double monitor_interval = 5.0;
    BuildLatencyModel latency;
    double duration = 60.0;
    uint64_t seed = 1;
};

inline void to_json(json& j, const Scenario& s) {
    j = json{{"name", s.name},
             {"monitor_interval", s.monitor_interval},
             {"duration", s.duration},
             {"seed", s.seed},
             {"latency", s.latency},
             {"hosts", s.hosts},
             {"rules", s.rules}};
}

inline void from_json(const json& j, Scenario& s) {
    s.name = j.at("name").get<std::string>();
    s.monitor_interval = j.at("monitor_interval").get<double>();
    s.duration = j.at("duration").get<double>();
    s.seed = j.at("seed").get<uint64_t>();
    s.latency = j.at("latency").get<BuildLatencyModel>();
    s.hosts = j.at("hosts").get<std::vector<HostConfig>>();
    s.rules = j.at("rules").get<std::vector<ResponseRule>>();
}

inline std::vector<std::string> validate_scenario(const Scenario& s) {
    std::vector<std::string> out;
    if (s.duration <= 0) out.push_back("duration must be positive");
    if (s.monitor_interval <= 0) out.push_back("monitor_interval must be positive");
    if (s.latency.jit_build_seconds < 0) out.push_back("jit_build_seconds must be non-negative");
    if (s.latency.deploy_seconds < 0) out.push_back("deploy_seconds must be non-negative");
    if (s.hosts.empty()) out.push_back("at least one host required");
    std::set<std::string> names;
    for (const auto& h : s.hosts) {
        if (h.host.name.empty()) out.push_back("host name must be non-empty");
        if (!names.insert(h.host.name).second) out.push_back("duplicate host: " + h.host.name);
        const auto& p = h.profile;
        if (p.baseline_rate < 0 || p.attack_rate < 0)
            out.push_back(h.host.name + ": rates must be non-negative");
        if (p.attack_rate < p.baseline_rate)
            out.push_back(h.host.name + ": attack_rate must be >= baseline_rate");
        if (p.kind != TrafficKind::Benign && p.attack_start >= s.duration)
            out.push_back(h.host.name + ": attack_start must be before scenario end");
        for (const auto& spec : h.preinstalled)
            if (auto err = validate(spec)) out.push_back(h.host.name + ": bad preinstalled module: " + *err);
    }
    for (const auto& r : s.rules) {
        for (const auto& f : r.jit_fields)
            if (f != "blocklist") out.push_back("rule references unknown jit field: " + f);
        if (r.build_mode == BuildMode::PreBuilt) {
            ModuleSpec spec;
            spec.kind = r.response_kind;
            spec.build_mode = BuildMode::PreBuilt;
            spec.params = r.template_params;
            spec.module_id = derive_module_id(spec.kind, spec.params);
            if (auto err = validate(spec)) out.push_back("prebuilt rule invalid: " + *err);
        }
    }
    return out;
}

// Counts only queries whose buffers survived the sender's module chain.
class DnsServer {
public:
    void receive(const HostId& from, const Payload& p, double t) {
        if (!p.dns) return;
        counts_[from.name][static_cast<int>(std::floor(t))]++;
        total_++;
    }

    int delivered(const std::string& host, int second) const {
        auto it = counts_.find(host);
        if (it == counts_.end()) return 0;
        auto s = it->second.find(second);
        return s == it->second.end() ? 0 : s->second;
    }

    uint64_t total() const { return total_; }

private:
    std::map<std::string, std::map<int, int>> counts_;
    uint64_t total_ = 0;
};

// Valid requests get a 200-form response; malformed (poisoned) requests get
// none; dropped requests never arrive.
class HttpServer {
public:
    struct Observation {
        std::string from;
        double t = 0.0;
        size_t bytes = 0;
        bool responded = false;
        std::string url;  // empty when the request did not parse
    };

    bool receive(const HostId& from, const Payload& p, double t) {
        Observation obs;
        obs.from = from.name;
        obs.t = t;
        obs.bytes = p.raw.size();
        if (auto req = parse_http(p.raw)) {
            obs.responded = true;
            obs.url = req->host;
        }
        log_.push_back(obs);
        return log_.back().responded;
    }

    const std::vector<Observation>& log() const { return log_; }

    size_t bytes_for_url(const std::string& url) const {
        size_t n = 0;
        for (const auto& o : log_)
            if (url_equal(o.url, url)) n += o.bytes;
        return n;
    }

    size_t response_count_for_url(const std::string& url) const {
        size_t n = 0;
        for (const auto& o : log_)
            if (o.responded && url_equal(o.url, url)) n++;
        return n;
    }

private:
    std::vector<Observation> log_;
};

struct RunResult {
    std::vector<TimelineEvent> timeline;
    std::map<std::string, std::map<int, int>> rates;  // host -> second -> delivered queries
    std::vector<Alert> alerts;
    std::string timeline_csv;
    std::string rates_csv;
    std::string alerts_csv;
    DnsServer dns;
    HttpServer http;
    std::vector<ModuleSpec> final_modules;  // per host, in install order
    std::vector<std::pair<HostId, ModuleSpec>> deployments;  // successful installs, in order

    std::optional<double> first_event(const std::string& host, TimelineLabel label) const {
        for (const auto& e : timeline)
            if (e.host.name == host && e.label == label) return e.timestamp;
        return std::nullopt;
    }

    std::optional<double> last_event_any(TimelineLabel label) const {
        std::optional<double> out;
        for (const auto& e : timeline)
            if (e.label == label) out = e.timestamp;
        return out;
    }

    std::optional<double> first_event_any(TimelineLabel label) const {
        for (const auto& e : timeline)
            if (e.label == label) return e.timestamp;
        return std::nullopt;
    }
};

namespace detail {

struct SimEvent {
    double t = 0.0;
    std::string host;  // tie-break after timestamp
    int kind = 0;      // 0 traffic, 1 poll cycle, 2 install
    uint64_t seq = 0;
    std::function<void()> fn;
};

struct SimEventAfter {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
        if (a.t != b.t) return a.t > b.t;
        if (a.host != b.host) return a.host > b.host;
        if (a.kind != b.kind) return a.kind > b.kind;
        return a.seq > b.seq;
    }
};

}  // namespace detail

class Simulation {
public:
    explicit Simulation(Scenario scenario) : scenario_(std::move(scenario)) {
        auto violations = validate_scenario(scenario_);
        if (!violations.empty()) {
            std::string msg = "invalid scenario:";
            for (const auto& v : violations) msg += " " + v + ";";
            throw std::runtime_error(msg);
        }
    }

    RunResult run() {
        std::vector<HostId> hosts;
        for (const auto& h : scenario_.hosts) hosts.push_back(h.host);
        orch_ = std::make_unique<Orchestrator>(hosts, scenario_.rules, scenario_.latency);

        for (const auto& hc : scenario_.hosts) {
            agents_[hc.host.name] = std::make_unique<Agent>(hc.host, hc.preinstalled);
            // Control channel registration at t = 0.
            wire::ControlMessage reg{wire::Register{hc.host, agents_[hc.host.name]->installed_ids()}, 0.0};
            auto decoded = wire::decode(wire::encode(reg));
            const auto& r = std::get<wire::Register>(std::get<wire::ControlMessage>(decoded).payload);
            orch_->note_reply_installed(r.host, r.installed);
        }

        schedule_traffic();
        for (double t : wire::monitor_schedule(scenario_.monitor_interval, scenario_.duration))
            push(t, "", 1, [this, t] { poll_cycle(t); });

        while (!queue_.empty()) {
            detail::SimEvent ev = queue_.top();
            queue_.pop();
            if (ev.t > scenario_.duration + 1e-9) continue;
            ev.fn();
        }

        return finish();
    }

private:
    void push(double t, std::string host, int kind, std::function<void()> fn) {
        queue_.push(detail::SimEvent{t, std::move(host), kind, seq_++, std::move(fn)});
    }

    static FlowKey dns_flow(const HostId& h) {
        FlowKey f;
        f.protocol = Protocol::UDP;
        f.src = {h.name, 40000};
        f.dst = {"dns-server", 53};
        f.process_name = "resolver";
        f.uid = 1000;
        return f;
    }

    static FlowKey http_flow(const HostId& h, int uid) {
        FlowKey f;
        f.protocol = Protocol::TCP;
        f.src = {h.name, 50000};
        f.dst = {"web-server", 80};
        f.process_name = "curl";
        f.uid = uid;
        return f;
    }

    void schedule_traffic() {
        // Seed shifts the query phase by up to ~0.1 s; all generator times are
        // otherwise evenly spaced.
        double phase = static_cast<double>(scenario_.seed % 997) / 1e4;
        for (const auto& hc : scenario_.hosts) {
            const auto& p = hc.profile;
            HostId host = hc.host;
            if (p.kind == TrafficKind::RootHttp) {
                for (const auto& req : p.http_requests) {
                    if (req.time >= scenario_.duration) continue;
                    push(req.time, host.name, 0,
                         [this, host, req] { http_send(host, req.url, req.uid, req.time); });
                }
                continue;
            }
            double attack_from =
                p.kind == TrafficKind::DnsFlood ? p.attack_start : scenario_.duration;
            if (p.baseline_rate > 0) {
                for (uint64_t k = 0;; ++k) {
                    double t = phase + static_cast<double>(k) / p.baseline_rate;
                    if (t >= attack_from || t >= scenario_.duration) break;
                    push(t, host.name, 0, [this, host, t] { dns_send(host, t); });
                }
            }
            if (p.kind == TrafficKind::DnsFlood && p.attack_rate > 0) {
                for (uint64_t k = 0;; ++k) {
                    double t = p.attack_start + phase + static_cast<double>(k) / p.attack_rate;
                    if (t >= scenario_.duration) break;
                    push(t, host.name, 0, [this, host, t] { dns_send(host, t); });
                }
            }
        }
    }

    void dns_send(const HostId& host, double t) {
        Agent& agent = *agents_.at(host.name);
        Payload q = make_dns_query("resolve.example", static_cast<uint16_t>(seq_ & 0xffff));
        SendResult r = agent.on_send(dns_flow(host), q, t);
        note_send(host, r, t);
        if (r.delivered) dns_.receive(host, *r.delivered, t);
    }

    void http_send(const HostId& host, const std::string& url, int uid, double t) {
        Agent& agent = *agents_.at(host.name);
        Payload req = make_http_request("GET", url, "/", uid);
        SendResult r = agent.on_send(http_flow(host, uid), req, t);
        note_send(host, r, t);
        if (r.delivered) http_.receive(host, *r.delivered, t);
    }

    void note_send(const HostId& host, const SendResult& r, double t) {
        for (const auto& a : r.alerts)
            timeline_.push_back({TimelineLabel::A_AlertRaised, host, t,
                                 std::string(to_string(a.condition.kind)) +
                                     (a.condition.url ? " " + *a.condition.url : "")});
        for (const auto& id : r.newly_effective)
            if (deployed_.count(host.name + "/" + id))
                timeline_.push_back({TimelineLabel::D_ResponseEffective, host, t, "module " + id});
    }

    void poll_cycle(double t) {
        std::vector<Alert> fresh;
        poll_id_++;
        std::vector<HostId> order;
        for (const auto& hc : scenario_.hosts) order.push_back(hc.host);
        std::sort(order.begin(), order.end());
        for (const auto& host : order) {
            Agent& agent = *agents_.at(host.name);
            wire::ControlMessage poll{wire::MonitorPoll{poll_id_}, t};
            auto pd = wire::decode(wire::encode(poll));
            uint64_t pid = std::get<wire::MonitorPoll>(std::get<wire::ControlMessage>(pd).payload).poll_id;

            wire::MonitorReply reply = agent.on_poll(pid, t);
            wire::ControlMessage msg{reply, t};
            auto rd = wire::decode(wire::encode(msg));
            const auto& mr = std::get<wire::MonitorReply>(std::get<wire::ControlMessage>(rd).payload);

            orch_->note_reply_installed(host, mr.installed);
            for (Alert a : mr.alerts) {
                a.received_at = t;
                auto [id, inserted] = orch_->record_alert_full(a);
                if (inserted) {
                    a.alert_id = id;
                    fresh.push_back(a);
                    timeline_.push_back({TimelineLabel::B_OrchestratorNotified, a.host, t,
                                         "alert " + std::to_string(id) + " " +
                                             to_string(a.condition.kind)});
                }
            }
            agent.ack_poll(pid);
        }
        // All alerts from this cycle are recorded before any is processed.
        for (const auto& a : fresh) {
            auto plan = orch_->process_alert(a);
            if (!plan) continue;
            for (const auto& si : orch_->schedule_deployment(*plan, t)) {
                if (si.skipped) continue;
                HostId host = si.host;
                ModuleSpec spec = si.spec;
                double at = si.at;
                push(at, host.name, 2, [this, host, spec, at] { install(host, spec, at); });
            }
        }
    }

    void install(const HostId& host, const ModuleSpec& spec, double t) {
        Agent& agent = *agents_.at(host.name);
        wire::ControlMessage msg{wire::DeployModule{spec}, t};
        auto dd = wire::decode(wire::encode(msg));
        const auto& dm = std::get<wire::DeployModule>(std::get<wire::ControlMessage>(dd).payload);
        wire::DeployAck ack = agent.install(dm.spec, t);
        if (ack.status == wire::AckStatus::Ok) {
            orch_->confirm_installed(host, spec.module_id);
            deployed_.insert(host.name + "/" + spec.module_id);
            deployments_.push_back({host, dm.spec});
            timeline_.push_back({TimelineLabel::C_ModuleDeployed, host, t, "module " + spec.module_id});
        } else {
            orch_->deployment_failed(host, spec.module_id);
        }
    }

    RunResult finish() {
        RunResult out;
        out.timeline = timeline_;
        out.alerts = orch_->db().records();
        out.dns = dns_;
        out.http = http_;
        for (const auto& hc : scenario_.hosts)
            for (const auto& spec : agents_.at(hc.host.name)->installed_specs())
                out.final_modules.push_back(spec);
        out.deployments = deployments_;

        out.timeline_csv = timeline_csv_header() + "\n";
        for (const auto& e : timeline_) out.timeline_csv += to_csv_row(e) + "\n";

        std::vector<std::string> names;
        for (const auto& hc : scenario_.hosts) names.push_back(hc.host.name);
        std::sort(names.begin(), names.end());
        out.rates_csv = "host,second,delivered_queries\n";
        int seconds = static_cast<int>(std::ceil(scenario_.duration));
        for (const auto& n : names) {
            for (int s = 0; s < seconds; ++s) {
                int c = dns_.delivered(n, s);
                out.rates[n][s] = c;
                out.rates_csv += n + "," + std::to_string(s) + "," + std::to_string(c) + "\n";
            }
        }
        out.alerts_csv = orch_->db().export_csv();
        return out;
    }

    Scenario scenario_;
    std::unique_ptr<Orchestrator> orch_;
    std::map<std::string, std::unique_ptr<Agent>> agents_;
    std::priority_queue<detail::SimEvent, std::vector<detail::SimEvent>, detail::SimEventAfter> queue_;
    std::vector<TimelineEvent> timeline_;
    DnsServer dns_;
    HttpServer http_;
    std::set<std::string> deployed_;  // host/module_id pairs this run deployed
    std::vector<std::pair<HostId, ModuleSpec>> deployments_;
    uint64_t seq_ = 0;
    uint64_t poll_id_ = 0;
};

inline RunResult run_scenario(const Scenario& s) { return Simulation(s).run(); }

// --- canonical scenario library ---

inline ModuleSpec make_spec(ModuleKind kind, BuildMode mode, ModuleParams params,
                            std::vector<uint64_t> context = {}) {
    ModuleSpec spec;
    spec.kind = kind;
    spec.build_mode = mode;
    spec.params = std::move(params);
    spec.context_alert_ids = std::move(context);
    spec.module_id = derive_module_id(spec.kind, spec.params);
    return spec;
}

inline Scenario scenario_dns_base(BuildMode mode) {
    Scenario s;
    s.monitor_interval = 5.0;
    s.duration = 60.0;
    s.seed = 1;

    ModuleParams monitor_params;
    monitor_params.threshold = 10.0;
    ModuleSpec monitor = make_spec(ModuleKind::DnsRateMonitor, BuildMode::PreBuilt, monitor_params);

    auto host = [&](const std::string& name, Role role, TrafficKind kind, double attack_rate) {
        HostConfig hc;
        hc.host = {name};
        hc.role = role;
        hc.profile.kind = kind;
        hc.profile.baseline_rate = 5.0;
        hc.profile.attack_rate = attack_rate;
        hc.profile.attack_start = 10.0;
        hc.preinstalled = {monitor};
        return hc;
    };
    s.hosts.push_back(host("VM1", Role::Benign, TrafficKind::Benign, 5.0));
    s.hosts.push_back(host("VM2", Role::Aggressive, TrafficKind::DnsFlood, 50.0));
    s.hosts.push_back(host("VM3", Role::MidLevel, TrafficKind::DnsFlood, 20.0));

    ResponseRule rule;
    rule.trigger = ConditionKind::DnsRateExceeded;
    rule.response_kind = ModuleKind::DnsThrottle;
    rule.build_mode = mode;
    rule.host_policy = HostPolicy::AllHosts;
    rule.template_params.limit = 5.0;
    s.rules.push_back(rule);
    return s;
}

inline Scenario scenario_dns_jit() {
    Scenario s = scenario_dns_base(BuildMode::JIT);
    s.name = "scenario_dns_jit";
    s.latency = {8.0, 4.0};
    return s;
}

inline Scenario scenario_dns_prebuilt() {
    Scenario s = scenario_dns_base(BuildMode::PreBuilt);
    s.name = "scenario_dns_prebuilt";
    s.latency = {8.0, 1.0};
    return s;
}

inline Scenario scenario_root_http() {
    Scenario s;
    s.name = "scenario_root_http";
    s.monitor_interval = 5.0;
    s.duration = 60.0;
    s.seed = 1;
    s.latency = {8.0, 4.0};

    ModuleParams block_params;
    block_params.blocklist = std::vector<std::string>{"exampleurl.com"};
    ModuleSpec block = make_spec(ModuleKind::HttpUrlBlock, BuildMode::PreBuilt, block_params);

    HostConfig hc;
    hc.host = {"VM1"};
    hc.role = Role::Aggressive;
    hc.profile.kind = TrafficKind::RootHttp;
    hc.profile.baseline_rate = 0.0;
    hc.profile.attack_rate = 0.0;
    hc.profile.attack_start = 2.0;
    for (double t = 2.0; t < 60.0; t += 2.0) hc.profile.http_requests.push_back({t, "exampleurl.com", 0});
    for (double t = 30.0; t < 60.0; t += 2.0)
        hc.profile.http_requests.push_back({t, "newbad.example", 0});
    hc.preinstalled = {block};
    s.hosts.push_back(hc);

    auto jit_monitor_rule = [](ConditionKind trigger) {
        ResponseRule r;
        r.trigger = trigger;
        r.response_kind = ModuleKind::RootHttpMonitor;
        r.build_mode = BuildMode::JIT;
        r.host_policy = HostPolicy::AffectedHostOnly;
        r.template_params.blocklist = std::vector<std::string>{};
        r.jit_fields = {"blocklist"};
        return r;
    };
    s.rules.push_back(jit_monitor_rule(ConditionKind::MaliciousUrlContact));
    s.rules.push_back(jit_monitor_rule(ConditionKind::RootHttpAttempt));
    return s;
}

inline std::optional<Scenario> library_scenario(const std::string& name) {
    if (name == "scenario_dns_jit") return scenario_dns_jit();
    if (name == "scenario_dns_prebuilt") return scenario_dns_prebuilt();
    if (name == "scenario_root_http") return scenario_root_http();
    return std::nullopt;
}

}  // namespace idsorch::sim
