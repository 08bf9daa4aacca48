#pragma once

#include <memory>

#include "detectors.hpp"
#include "wire.hpp"

namespace idsorch {

struct SendResult {
    VerdictAction action = VerdictAction::Pass;
    std::optional<Payload> delivered;          // empty on Drop
    std::vector<Alert> alerts;                 // raised_at = now, ids unassigned
    std::vector<std::string> newly_effective;  // modules whose first handled buffer this was
};

// Host IDS agent: ordered module chain over a socket tap, alert queue for the
// monitor polls, hot replacement of same-kind modules without flow resets.
class Agent {
public:
    explicit Agent(HostId host, const std::vector<ModuleSpec>& preinstalled = {}) : host_(std::move(host)) {
        for (const auto& spec : preinstalled) install(spec, 0.0);
    }

    const HostId& host() const { return host_; }

    wire::DeployAck install(const ModuleSpec& spec, double now) {
        (void)now;
        std::unique_ptr<Detector> det;
        try {
            det = make_detector(spec);
        } catch (const std::exception& e) {
            return {spec.module_id, wire::AckStatus::Error, e.what()};
        }
        for (auto& entry : chain_) {
            if (entry->spec().module_id == spec.module_id)
                return {spec.module_id, wire::AckStatus::Ok, "already installed"};
        }
        // At most one module per kind: a same-kind install atomically replaces
        // the old module in place. Flows keep their connections; the new
        // module starts with fresh counters.
        for (auto& entry : chain_) {
            if (entry->spec().kind == spec.kind) {
                entry = std::move(det);
                awaiting_first_buffer_.insert(spec.module_id);
                return {spec.module_id, wire::AckStatus::Ok, "replaced"};
            }
        }
        chain_.push_back(std::move(det));
        awaiting_first_buffer_.insert(spec.module_id);
        return {spec.module_id, wire::AckStatus::Ok, "installed"};
    }

    void register_flow(const FlowKey& flow) { flows_.insert(flow); }
    bool flow_registered(const FlowKey& flow) const { return flows_.count(flow) > 0; }
    size_t flow_count() const { return flows_.size(); }

    SendResult on_send(const FlowKey& flow, const Payload& buffer, double now) {
        flows_.insert(flow);
        SendResult result;
        Payload current = buffer;
        for (auto& entry : chain_) {
            if (entry->handles(current)) {
                auto it = awaiting_first_buffer_.find(entry->spec().module_id);
                if (it != awaiting_first_buffer_.end()) {
                    result.newly_effective.push_back(entry->spec().module_id);
                    awaiting_first_buffer_.erase(it);
                }
            }
            Verdict v = entry->inspect(flow, current, now);
            if (v.alert) {
                Alert a;
                a.host = host_;
                a.module_id = entry->spec().module_id;
                a.condition = *v.alert;
                a.raised_at = now;
                result.alerts.push_back(a);
                queue_.push_back(a);
            }
            if (v.action != VerdictAction::Pass) {
                // First non-Pass verdict wins; later modules never see the buffer.
                result.action = v.action;
                if (v.action == VerdictAction::Poison) {
                    current = poison(current);
                    result.delivered = current;
                }
                return result;
            }
        }
        result.delivered = current;
        return result;
    }

    // Returns all pending alerts raised strictly before the poll instant.
    // Unacknowledged content from earlier polls is resent (at-least-once).
    wire::MonitorReply on_poll(uint64_t poll_id, double now) {
        auto it = queue_.begin();
        while (it != queue_.end()) {
            if (it->raised_at < now) {
                inflight_.push_back(*it);
                it = queue_.erase(it);
            } else {
                ++it;
            }
        }
        last_poll_id_ = poll_id;
        wire::MonitorReply reply;
        reply.poll_id = poll_id;
        reply.alerts = inflight_;
        reply.installed = installed_ids();
        return reply;
    }

    void ack_poll(uint64_t poll_id) {
        if (poll_id == last_poll_id_) inflight_.clear();
    }

    std::vector<std::string> installed_ids() const {
        std::vector<std::string> out;
        out.reserve(chain_.size());
        for (const auto& entry : chain_) out.push_back(entry->spec().module_id);
        return out;
    }

    std::vector<ModuleSpec> installed_specs() const {
        std::vector<ModuleSpec> out;
        out.reserve(chain_.size());
        for (const auto& entry : chain_) out.push_back(entry->spec());
        return out;
    }

private:
    HostId host_;
    std::vector<std::unique_ptr<Detector>> chain_;  // installation order
    std::set<FlowKey> flows_;
    std::vector<Alert> queue_;
    std::vector<Alert> inflight_;
    std::set<std::string> awaiting_first_buffer_;
    uint64_t last_poll_id_ = 0;
};

}  // namespace idsorch
