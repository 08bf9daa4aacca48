#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "core.hpp"

namespace idsorch::wire {

// Control channel messages between orchestrator and host agents.
// Frame format (bit-exact): 4-byte big-endian length N, then N bytes UTF-8
// JSON body. See docs/protocol.md for the body schema.

struct Register {
    HostId host;
    std::vector<std::string> installed;
};

struct MonitorPoll {
    uint64_t poll_id = 0;
};

struct MonitorReply {
    uint64_t poll_id = 0;
    std::vector<Alert> alerts;
    std::vector<std::string> installed;
};

struct DeployModule {
    ModuleSpec spec;
};

enum class AckStatus { Ok, Error };

struct DeployAck {
    std::string module_id;
    AckStatus status = AckStatus::Ok;
    std::string detail;
};

struct ControlMessage {
    std::variant<Register, MonitorPoll, MonitorReply, DeployModule, DeployAck> payload;
    double sent_at = 0.0;
};

inline bool operator==(const Register& a, const Register& b) {
    return a.host == b.host && a.installed == b.installed;
}
inline bool operator==(const MonitorPoll& a, const MonitorPoll& b) { return a.poll_id == b.poll_id; }
inline bool operator==(const MonitorReply& a, const MonitorReply& b) {
    return a.poll_id == b.poll_id && a.alerts == b.alerts && a.installed == b.installed;
}
inline bool operator==(const DeployModule& a, const DeployModule& b) { return a.spec == b.spec; }
inline bool operator==(const DeployAck& a, const DeployAck& b) {
    return a.module_id == b.module_id && a.status == b.status && a.detail == b.detail;
}
inline bool operator==(const ControlMessage& a, const ControlMessage& b) {
    return a.sent_at == b.sent_at && a.payload == b.payload;
}

inline json body_json(const ControlMessage& m) {
    json j = json::object();
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Register>) {
                j["variant"] = "register";
                j["sent_at"] = m.sent_at;
                j["host"] = v.host;
                j["installed"] = v.installed;
            } else if constexpr (std::is_same_v<T, MonitorPoll>) {
                j["variant"] = "monitor_poll";
                j["sent_at"] = m.sent_at;
                j["poll_id"] = v.poll_id;
            } else if constexpr (std::is_same_v<T, MonitorReply>) {
                j["variant"] = "monitor_reply";
                j["sent_at"] = m.sent_at;
                j["poll_id"] = v.poll_id;
                j["alerts"] = v.alerts;
                j["installed"] = v.installed;
            } else if constexpr (std::is_same_v<T, DeployModule>) {
                j["variant"] = "deploy_module";
                j["sent_at"] = m.sent_at;
                j["spec"] = v.spec;
            } else {
                j["variant"] = "deploy_ack";
                j["sent_at"] = m.sent_at;
                j["module_id"] = v.module_id;
                j["status"] = v.status == AckStatus::Ok ? "ok" : "error";
                j["detail"] = v.detail;
            }
        },
        m.payload);
    return j;
}

inline std::vector<uint8_t> encode(const ControlMessage& m) {
    std::string body = body_json(m).dump();
    std::vector<uint8_t> frame;
    frame.reserve(body.size() + 4);
    uint32_t n = static_cast<uint32_t>(body.size());
    frame.push_back(static_cast<uint8_t>(n >> 24));
    frame.push_back(static_cast<uint8_t>(n >> 16));
    frame.push_back(static_cast<uint8_t>(n >> 8));
    frame.push_back(static_cast<uint8_t>(n));
    frame.insert(frame.end(), body.begin(), body.end());
    return frame;
}

struct DecodeError {
    enum class Kind { Truncated, LengthMismatch, UnknownVariant, SchemaViolation };
    Kind kind = Kind::Truncated;
    std::string message;
};

using DecodeResult = std::variant<ControlMessage, DecodeError>;

inline DecodeResult decode(const std::vector<uint8_t>& frame) {
    if (frame.size() < 4)
        return DecodeError{DecodeError::Kind::Truncated, "truncated: missing length prefix"};
    uint32_t n = (static_cast<uint32_t>(frame[0]) << 24) | (static_cast<uint32_t>(frame[1]) << 16) |
                 (static_cast<uint32_t>(frame[2]) << 8) | static_cast<uint32_t>(frame[3]);
    if (frame.size() - 4 < n)
        return DecodeError{DecodeError::Kind::Truncated,
                           "truncated: declared " + std::to_string(n) + " bytes, got " +
                               std::to_string(frame.size() - 4)};
    if (frame.size() - 4 > n)
        return DecodeError{DecodeError::Kind::LengthMismatch,
                           "length mismatch: " + std::to_string(frame.size() - 4) +
                               " body bytes for declared " + std::to_string(n)};
    json j;
    try {
        j = json::parse(frame.begin() + 4, frame.end());
    } catch (const json::exception& e) {
        return DecodeError{DecodeError::Kind::SchemaViolation, std::string("bad json body: ") + e.what()};
    }
    try {
        std::string variant = j.at("variant").get<std::string>();
        ControlMessage m;
        m.sent_at = j.at("sent_at").get<double>();
        if (variant == "register") {
            Register r;
            r.host = j.at("host").get<HostId>();
            r.installed = j.at("installed").get<std::vector<std::string>>();
            m.payload = r;
        } else if (variant == "monitor_poll") {
            m.payload = MonitorPoll{j.at("poll_id").get<uint64_t>()};
        } else if (variant == "monitor_reply") {
            MonitorReply r;
            r.poll_id = j.at("poll_id").get<uint64_t>();
            r.alerts = j.at("alerts").get<std::vector<Alert>>();
            r.installed = j.at("installed").get<std::vector<std::string>>();
            m.payload = r;
        } else if (variant == "deploy_module") {
            m.payload = DeployModule{j.at("spec").get<ModuleSpec>()};
        } else if (variant == "deploy_ack") {
            DeployAck a;
            a.module_id = j.at("module_id").get<std::string>();
            std::string status = j.at("status").get<std::string>();
            if (status != "ok" && status != "error")
                return DecodeError{DecodeError::Kind::SchemaViolation, "bad ack status: " + status};
            a.status = status == "ok" ? AckStatus::Ok : AckStatus::Error;
            a.detail = j.at("detail").get<std::string>();
            m.payload = a;
        } else {
            return DecodeError{DecodeError::Kind::UnknownVariant, "unknown variant: " + variant};
        }
        return m;
    } catch (const std::exception& e) {
        return DecodeError{DecodeError::Kind::SchemaViolation, std::string("schema violation: ") + e.what()};
    }
}

// Poll instants for a monitor interval: t = interval, 2*interval, ... <= horizon.
// Each poll collects alerts raised strictly before the poll instant.
inline std::vector<double> monitor_schedule(double interval, double horizon) {
    std::vector<double> out;
    for (int k = 1; k * interval <= horizon + 1e-9; ++k) out.push_back(k * interval);
    return out;
}

}  // namespace idsorch::wire
