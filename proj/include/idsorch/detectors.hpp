#pragma once

#include <deque>
#include <map>
#include <memory>
#include <stdexcept>

#include "core.hpp"

namespace idsorch {

// Simplified protocol message forms carried through the socket tap.
// A DNS query is (qname, id); an HTTP request is (method, host, path, uid).

struct DnsQuery {
    std::string qname;
    uint16_t id = 0;
};

struct HttpRequest {
    std::string method;
    std::string host;
    std::string path;
    int uid = 0;
};

struct Payload {
    std::string raw;
    std::optional<DnsQuery> dns;
    std::optional<HttpRequest> http;
};

inline Payload make_dns_query(const std::string& qname, uint16_t id) {
    Payload p;
    p.dns = DnsQuery{qname, id};
    p.raw = "DNS " + std::to_string(id) + " " + qname;
    return p;
}

inline Payload make_http_request(const std::string& method, const std::string& host,
                                 const std::string& path, int uid) {
    Payload p;
    p.http = HttpRequest{method, host, path, uid};
    p.raw = method + " " + path + " HTTP/1.1\r\nHost: " + host + "\r\nUid: " + std::to_string(uid) + "\r\n\r\n";
    return p;
}

// Replaces the request line with a malformed line of equal length; the stream
// keeps its byte accounting but the request can no longer parse.
inline Payload poison(const Payload& p) {
    Payload out = p;
    size_t eol = out.raw.find("\r\n");
    if (eol == std::string::npos) eol = out.raw.size();
    for (size_t i = 0; i < eol; ++i) out.raw[i] = '#';
    out.http.reset();
    out.dns.reset();
    return out;
}

// Server-side parse of raw bytes; poisoned requests fail here.
inline std::optional<HttpRequest> parse_http(const std::string& raw) {
    size_t eol = raw.find("\r\n");
    if (eol == std::string::npos) return std::nullopt;
    std::string line = raw.substr(0, eol);
    size_t sp1 = line.find(' ');
    size_t sp2 = line.rfind(' ');
    if (sp1 == std::string::npos || sp2 <= sp1) return std::nullopt;
    HttpRequest r;
    r.method = line.substr(0, sp1);
    r.path = line.substr(sp1 + 1, sp2 - sp1 - 1);
    if (line.substr(sp2 + 1) != "HTTP/1.1") return std::nullopt;
    if (r.method.empty() || r.method.find('#') != std::string::npos) return std::nullopt;
    size_t hpos = raw.find("Host: ", eol);
    if (hpos == std::string::npos) return std::nullopt;
    size_t hend = raw.find("\r\n", hpos);
    r.host = raw.substr(hpos + 6, hend - hpos - 6);
    size_t upos = raw.find("Uid: ", eol);
    if (upos != std::string::npos) r.uid = std::atoi(raw.c_str() + upos + 5);
    return r;
}

// Trailing 1 second sliding window over event timestamps. The window at time
// t covers (t - 1, t]; entries at exactly t - 1 have expired. A nanosecond
// slack absorbs floating-point drift in evenly spaced event times.
constexpr double kWindowSlack = 1e-9;

inline bool in_window(double ts, double now) { return ts > now - 1.0 + kWindowSlack; }

class RateWindow {
public:
    void add(double t) { events_.push_back(t); }

    size_t count(double now) {
        while (!events_.empty() && !in_window(events_.front(), now)) events_.pop_front();
        return events_.size();
    }

private:
    std::deque<double> events_;
};

class Detector {
public:
    explicit Detector(ModuleSpec spec) : spec_(std::move(spec)) {}
    virtual ~Detector() = default;

    const ModuleSpec& spec() const { return spec_; }

    // True if this detector inspects buffers of the payload's type.
    virtual bool handles(const Payload& p) const = 0;

    virtual Verdict inspect(const FlowKey& flow, const Payload& p, double now) = 0;

protected:
    ModuleSpec spec_;
};

// Passive monitor: alerts when the trailing-window DNS query count first
// exceeds the threshold; at most one alert per cooldown.
class DnsRateMonitorDetector final : public Detector {
public:
    explicit DnsRateMonitorDetector(ModuleSpec spec) : Detector(std::move(spec)) {}

    bool handles(const Payload& p) const override { return p.dns.has_value(); }

    Verdict inspect(const FlowKey& flow, const Payload& p, double now) override {
        if (!p.dns) return {};
        window_.add(now);
        size_t n = window_.count(now);
        double threshold = *spec_.params.threshold;
        Verdict v;
        if (static_cast<double>(n) > threshold &&
            (!last_alert_ || now - *last_alert_ >= spec_.params.cooldown_seconds)) {
            last_alert_ = now;
            AlertCondition c;
            c.kind = ConditionKind::DnsRateExceeded;
            c.observed_rate = static_cast<double>(n);
            c.uid = flow.uid;
            v.alert = c;
        }
        return v;
    }

private:
    RateWindow window_;
    std::optional<double> last_alert_;
};

// Passes the first `limit` queries in each trailing 1 s window, drops the
// rest. Never raises alerts and never tears down the flow.
class DnsThrottleDetector final : public Detector {
public:
    explicit DnsThrottleDetector(ModuleSpec spec) : Detector(std::move(spec)) {}

    bool handles(const Payload& p) const override { return p.dns.has_value(); }

    Verdict inspect(const FlowKey&, const Payload& p, double now) override {
        if (!p.dns) return {};
        if (static_cast<double>(delivered_.count(now)) < *spec_.params.limit) {
            delivered_.add(now);
            return {};
        }
        return {VerdictAction::Drop, std::nullopt};
    }

private:
    RateWindow delivered_;
};

// Drops HTTP requests whose Host matches the blocklist (case-insensitive
// exact) and raises a MaliciousUrlContact alert, at most once per cooldown
// per url.
class HttpUrlBlockDetector final : public Detector {
public:
    explicit HttpUrlBlockDetector(ModuleSpec spec) : Detector(std::move(spec)) {
        for (const auto& u : *spec_.params.blocklist) blocklist_.insert(lower_copy(u));
    }

    bool handles(const Payload& p) const override { return p.http.has_value(); }

    Verdict inspect(const FlowKey& flow, const Payload& p, double now) override {
        if (!p.http) return {};
        std::string host = lower_copy(p.http->host);
        if (!blocklist_.count(host)) return {};
        Verdict v{VerdictAction::Drop, std::nullopt};
        auto it = last_alert_.find(host);
        if (it == last_alert_.end() || now - it->second >= spec_.params.cooldown_seconds) {
            last_alert_[host] = now;
            AlertCondition c;
            c.kind = ConditionKind::MaliciousUrlContact;
            c.url = p.http->host;
            c.uid = flow.uid;
            v.alert = c;
        }
        return v;
    }

private:
    std::set<std::string> blocklist_;
    std::map<std::string, double> last_alert_;
};

// Poisons every HTTP request from a root process regardless of blocklist
// membership and feeds the URL back in a RootHttpAttempt alert. The carried
// blocklist records URLs already known at build time.
class RootHttpMonitorDetector final : public Detector {
public:
    explicit RootHttpMonitorDetector(ModuleSpec spec) : Detector(std::move(spec)) {}

    bool handles(const Payload& p) const override { return p.http.has_value(); }

    Verdict inspect(const FlowKey& flow, const Payload& p, double now) override {
        if (!p.http) return {};
        if (flow.uid != 0) return {};
        Verdict v{VerdictAction::Poison, std::nullopt};
        std::string host = lower_copy(p.http->host);
        auto it = last_alert_.find(host);
        if (it == last_alert_.end() || now - it->second >= spec_.params.cooldown_seconds) {
            last_alert_[host] = now;
            AlertCondition c;
            c.kind = ConditionKind::RootHttpAttempt;
            c.url = p.http->host;
            c.uid = flow.uid;
            v.alert = c;
        }
        return v;
    }

private:
    std::map<std::string, double> last_alert_;
};

inline std::unique_ptr<Detector> make_detector(const ModuleSpec& spec) {
    if (auto err = validate(spec)) throw std::runtime_error(*err);
    switch (spec.kind) {
        case ModuleKind::DnsRateMonitor: return std::make_unique<DnsRateMonitorDetector>(spec);
        case ModuleKind::DnsThrottle: return std::make_unique<DnsThrottleDetector>(spec);
        case ModuleKind::HttpUrlBlock: return std::make_unique<HttpUrlBlockDetector>(spec);
        case ModuleKind::RootHttpMonitor: return std::make_unique<RootHttpMonitorDetector>(spec);
    }
    throw std::runtime_error("unknown module kind");
}

}  // namespace idsorch
