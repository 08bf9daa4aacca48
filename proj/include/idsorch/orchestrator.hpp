#pragma once

#include <limits>
#include <map>

#include "wire.hpp"

namespace idsorch {

struct ResponseRule {
    ConditionKind trigger = ConditionKind::DnsRateExceeded;
    ModuleKind response_kind = ModuleKind::DnsThrottle;
    BuildMode build_mode = BuildMode::PreBuilt;
    HostPolicy host_policy = HostPolicy::AllHosts;
    ModuleParams template_params;
    // Parameter fields filled from the alert database at JIT build time.
    std::vector<std::string> jit_fields;
};

inline void to_json(json& j, const ResponseRule& r) {
    j = json{{"trigger", to_string(r.trigger)},
             {"response_kind", to_string(r.response_kind)},
             {"build_mode", to_string(r.build_mode)},
             {"host_policy", to_string(r.host_policy)},
             {"template_params", r.template_params},
             {"jit_fields", r.jit_fields}};
}

inline void from_json(const json& j, ResponseRule& r) {
    r.trigger = condition_kind_from(j.at("trigger").get<std::string>());
    r.response_kind = module_kind_from(j.at("response_kind").get<std::string>());
    r.build_mode = build_mode_from(j.at("build_mode").get<std::string>());
    r.host_policy = host_policy_from(j.at("host_policy").get<std::string>());
    r.template_params = j.at("template_params").get<ModuleParams>();
    r.jit_fields = j.value("jit_fields", std::vector<std::string>{});
}

struct BuildLatencyModel {
    double jit_build_seconds = 8.0;
    double deploy_seconds = 4.0;
    static constexpr double prebuilt_build_seconds = 0.0;
};

inline void to_json(json& j, const BuildLatencyModel& m) {
    j = json{{"jit_build_seconds", m.jit_build_seconds}, {"deploy_seconds", m.deploy_seconds}};
}

inline void from_json(const json& j, BuildLatencyModel& m) {
    m.jit_build_seconds = j.at("jit_build_seconds").get<double>();
    m.deploy_seconds = j.at("deploy_seconds").get<double>();
}

// Append-only alert store with indices by host, condition kind, and URL.
class AlertDatabase {
public:
    // Returns (alert_id, inserted). Duplicates by (host, module_id, raised_at)
    // return the existing id.
    std::pair<uint64_t, bool> record(Alert a) {
        auto key = std::make_tuple(a.host.name, a.module_id, a.raised_at);
        auto it = dedup_.find(key);
        if (it != dedup_.end()) return {it->second, false};
        a.alert_id = next_id_++;
        dedup_[key] = a.alert_id;
        by_host_[a.host.name].push_back(a.alert_id);
        by_kind_[a.condition.kind].push_back(a.alert_id);
        if (a.condition.url) {
            url_index_.insert(*a.condition.url);
            url_alert_ids_.push_back(a.alert_id);
        }
        records_.push_back(std::move(a));
        return {records_.back().alert_id, true};
    }

    const std::vector<Alert>& records() const { return records_; }
    const std::set<std::string>& url_index() const { return url_index_; }
    const std::vector<uint64_t>& url_alert_ids() const { return url_alert_ids_; }

    const Alert* find(uint64_t id) const {
        if (id == 0 || id > records_.size()) return nullptr;
        return &records_[id - 1];
    }

    std::vector<uint64_t> alerts_for_host(const HostId& h) const {
        auto it = by_host_.find(h.name);
        return it == by_host_.end() ? std::vector<uint64_t>{} : it->second;
    }

    std::string export_csv() const {
        std::string out = alerts_csv_header() + "\n";
        for (const auto& a : records_) out += to_csv_row(a) + "\n";
        return out;
    }

private:
    uint64_t next_id_ = 1;
    std::vector<Alert> records_;
    std::map<std::tuple<std::string, std::string, double>, uint64_t> dedup_;
    std::map<std::string, std::vector<uint64_t>> by_host_;
    std::map<ConditionKind, std::vector<uint64_t>> by_kind_;
    std::set<std::string> url_index_;
    std::vector<uint64_t> url_alert_ids_;
};

struct CollectedContext {
    ModuleParams patch;
    std::vector<uint64_t> alert_ids;
};

struct ScheduledInstall {
    double at = 0.0;
    HostId host;
    ModuleSpec spec;
    bool skipped = false;
    std::string note;
};

// Central decision maker: records alerts, matches response rules, builds
// pre-built or JIT modules, and sequences network-wide deployments.
class Orchestrator {
public:
    Orchestrator(std::vector<HostId> hosts, std::vector<ResponseRule> rules,
                 BuildLatencyModel latency = {})
        : hosts_(std::move(hosts)), rules_(std::move(rules)), latency_(latency) {
        std::sort(hosts_.begin(), hosts_.end());
        for (const auto& r : rules_) {
            if (r.build_mode == BuildMode::PreBuilt) {
                // Pre-built modules are fully specified before any attack.
                ModuleSpec spec = assemble_spec(r, {}, {});
                if (auto err = validate(spec))
                    throw std::runtime_error("invalid prebuilt rule for " +
                                             std::string(to_string(r.response_kind)) + ": " + *err);
                prebuilt_[r.response_kind] = spec;
            }
        }
    }

    const std::vector<HostId>& registered_hosts() const { return hosts_; }
    const AlertDatabase& db() const { return db_; }
    const BuildLatencyModel& latency() const { return latency_; }

    uint64_t record_alert(Alert a) { return db_.record(std::move(a)).first; }

    // (id, inserted): duplicates from the at-least-once channel report false.
    std::pair<uint64_t, bool> record_alert_full(Alert a) { return db_.record(std::move(a)); }

    // Alert processor: record-before-process is the caller's contract; the
    // plan's host set follows the matched rule's host_policy.
    std::optional<DeploymentPlan> process_alert(const Alert& alert) {
        const ResponseRule* rule = nullptr;
        for (const auto& r : rules_) {
            if (r.trigger == alert.condition.kind) {
                rule = &r;
                break;
            }
        }
        if (!rule) return std::nullopt;

        uint64_t trigger_id = alert.alert_id;
        if (trigger_id == 0) {
            // Resolve the recorded id for alerts arriving without one.
            auto [id, inserted] = db_.record(alert);
            (void)inserted;
            trigger_id = id;
        }

        ModuleSpec spec;
        if (rule->build_mode == BuildMode::PreBuilt) {
            spec = prebuilt_.at(rule->response_kind);
        } else {
            CollectedContext ctx = collect_context(*rule);
            spec = build_module(*rule, ctx, trigger_id);
        }

        DeploymentPlan plan;
        plan.trigger_alert = trigger_id;
        plan.policy = rule->host_policy;
        if (rule->host_policy == HostPolicy::AffectedHostOnly) {
            plan.targets.emplace_back(alert.host, spec);
        } else {
            for (const auto& h : deployment_order(alert.host)) plan.targets.emplace_back(h, spec);
        }
        return plan;
    }

    // Fills JIT-declared fields from the database indices; deterministic given
    // database contents (URLs sorted lexicographically).
    CollectedContext collect_context(const ResponseRule& rule) const {
        CollectedContext ctx;
        for (const auto& field : rule.jit_fields) {
            if (field == "blocklist") {
                ctx.patch.blocklist =
                    std::vector<std::string>(db_.url_index().begin(), db_.url_index().end());
                ctx.alert_ids.insert(ctx.alert_ids.end(), db_.url_alert_ids().begin(),
                                     db_.url_alert_ids().end());
            } else {
                throw std::runtime_error("unknown jit field: " + field);
            }
        }
        return ctx;
    }

    ModuleSpec build_module(const ResponseRule& rule, const CollectedContext& ctx,
                            uint64_t trigger_alert) const {
        ModuleSpec spec = assemble_spec(rule, ctx.patch, ctx.alert_ids);
        if (rule.build_mode == BuildMode::JIT) {
            spec.context_alert_ids.push_back(trigger_alert);
            std::sort(spec.context_alert_ids.begin(), spec.context_alert_ids.end());
            spec.context_alert_ids.erase(
                std::unique(spec.context_alert_ids.begin(), spec.context_alert_ids.end()),
                spec.context_alert_ids.end());
        }
        auto it = last_deployed_id_.find(spec.kind);
        if (it != last_deployed_id_.end() && it->second != spec.module_id) spec.replaces = it->second;
        if (auto err = validate(spec)) throw std::runtime_error("build failed: " + *err);
        return spec;
    }

    // Sequential deployment schedule: per host, a JIT build then the deploy
    // delay, so later hosts receive their module later. Hosts already carrying
    // the spec (installed or pending) are skipped.
    std::vector<ScheduledInstall> schedule_deployment(const DeploymentPlan& plan, double start) {
        busy_until_ = std::max(busy_until_, start);
        std::vector<ScheduledInstall> out;
        for (const auto& [host, spec] : plan.targets) {
            ScheduledInstall si;
            si.host = host;
            si.spec = spec;
            if (carrying(host, spec.module_id)) {
                si.skipped = true;
                si.note = "already installed";
                si.at = busy_until_;
            } else {
                double build = spec.build_mode == BuildMode::JIT ? latency_.jit_build_seconds
                                                                 : BuildLatencyModel::prebuilt_build_seconds;
                busy_until_ += build + latency_.deploy_seconds;
                si.at = busy_until_;
                pending_[host.name].insert(spec.module_id);
                last_deployed_id_[spec.kind] = spec.module_id;
            }
            out.push_back(std::move(si));
        }
        return out;
    }

    // Blocking deployment over a channel: Channel must provide
    //   wire::DeployAck deploy(const HostId&, const std::vector<uint8_t>& frame)
    // Per-host failures are recorded; remaining hosts are still processed.
    template <typename Channel>
    std::vector<std::pair<HostId, wire::DeployAck>> deploy(const DeploymentPlan& plan,
                                                           Channel& channel, VirtualClock& clock) {
        std::vector<std::pair<HostId, wire::DeployAck>> acks;
        for (const auto& [host, spec] : plan.targets) {
            if (carrying(host, spec.module_id)) {
                acks.emplace_back(host, wire::DeployAck{spec.module_id, wire::AckStatus::Ok, "skipped"});
                continue;
            }
            if (auto err = validate(spec)) {
                acks.emplace_back(host, wire::DeployAck{spec.module_id, wire::AckStatus::Error, *err});
                continue;
            }
            if (spec.build_mode == BuildMode::JIT) clock.advance(latency_.jit_build_seconds);
            clock.advance(latency_.deploy_seconds);
            wire::ControlMessage msg{wire::DeployModule{spec}, clock.now()};
            wire::DeployAck ack;
            try {
                ack = channel.deploy(host, wire::encode(msg));
            } catch (const std::exception& e) {
                ack = {spec.module_id, wire::AckStatus::Error, e.what()};
            }
            if (ack.status == wire::AckStatus::Ok) {
                installed_[host.name].insert(spec.module_id);
                last_deployed_id_[spec.kind] = spec.module_id;
            }
            acks.emplace_back(host, ack);
        }
        return acks;
    }

    void note_reply_installed(const HostId& host, const std::vector<std::string>& ids) {
        installed_[host.name] = std::set<std::string>(ids.begin(), ids.end());
    }

    void confirm_installed(const HostId& host, const std::string& module_id) {
        pending_[host.name].erase(module_id);
        installed_[host.name].insert(module_id);
    }

    void deployment_failed(const HostId& host, const std::string& module_id) {
        pending_[host.name].erase(module_id);
    }

private:
    bool carrying(const HostId& host, const std::string& module_id) const {
        auto it = installed_.find(host.name);
        if (it != installed_.end() && it->second.count(module_id)) return true;
        auto p = pending_.find(host.name);
        return p != pending_.end() && p->second.count(module_id) > 0;
    }

    ModuleSpec assemble_spec(const ResponseRule& rule, const ModuleParams& patch,
                             const std::vector<uint64_t>& context_ids) const {
        ModuleSpec spec;
        spec.kind = rule.response_kind;
        spec.build_mode = rule.build_mode;
        spec.params = rule.template_params;
        if (patch.threshold) spec.params.threshold = patch.threshold;
        if (patch.limit) spec.params.limit = patch.limit;
        if (patch.blocklist) spec.params.blocklist = patch.blocklist;
        spec.context_alert_ids = context_ids;
        spec.module_id = derive_module_id(spec.kind, spec.params);
        return spec;
    }

    // Hosts that have alerted get their module first (earliest alert first,
    // alerting host ahead of all), the rest follow in name order.
    std::vector<HostId> deployment_order(const HostId& alerting) const {
        std::vector<std::pair<double, HostId>> keyed;
        for (const auto& h : hosts_) {
            double first_alert = std::numeric_limits<double>::infinity();
            for (uint64_t id : db_.alerts_for_host(h)) {
                const Alert* a = db_.find(id);
                if (a) first_alert = std::min(first_alert, a->raised_at);
            }
            if (h == alerting) first_alert = std::min(first_alert, -1.0);
            keyed.emplace_back(first_alert, h);
        }
        std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first < b.first;
            return a.second < b.second;
        });
        std::vector<HostId> out;
        for (auto& [k, h] : keyed) out.push_back(h);
        return out;
    }

    std::vector<HostId> hosts_;
    std::vector<ResponseRule> rules_;
    BuildLatencyModel latency_;
    AlertDatabase db_;
    std::map<ModuleKind, ModuleSpec> prebuilt_;
    std::map<std::string, std::set<std::string>> installed_;
    std::map<std::string, std::set<std::string>> pending_;
    mutable std::map<ModuleKind, std::string> last_deployed_id_;
    double busy_until_ = 0.0;
};

}  // namespace idsorch
