#include <catch2/catch_amalgamated.hpp>

#include <random>

#include <idsorch/detectors.hpp>

using namespace idsorch;

namespace {

ModuleSpec monitor_spec(double threshold, double cooldown = 10.0) {
    ModuleSpec s;
    s.kind = ModuleKind::DnsRateMonitor;
    s.params.threshold = threshold;
    s.params.cooldown_seconds = cooldown;
    s.module_id = derive_module_id(s.kind, s.params);
    return s;
}

ModuleSpec throttle_spec(double limit) {
    ModuleSpec s;
    s.kind = ModuleKind::DnsThrottle;
    s.params.limit = limit;
    s.module_id = derive_module_id(s.kind, s.params);
    return s;
}

ModuleSpec block_spec(std::vector<std::string> urls) {
    ModuleSpec s;
    s.kind = ModuleKind::HttpUrlBlock;
    s.params.blocklist = std::move(urls);
    s.module_id = derive_module_id(s.kind, s.params);
    return s;
}

ModuleSpec rootmon_spec(std::vector<std::string> urls = {}) {
    ModuleSpec s;
    s.kind = ModuleKind::RootHttpMonitor;
    s.params.blocklist = std::move(urls);
    s.module_id = derive_module_id(s.kind, s.params);
    return s;
}

FlowKey dns_flow(int uid = 1000) {
    FlowKey f;
    f.protocol = Protocol::UDP;
    f.src = {"VM2", 40000};
    f.dst = {"dns", 53};
    f.process_name = "flood";
    f.uid = uid;
    return f;
}

FlowKey http_flow(int uid) {
    FlowKey f;
    f.protocol = Protocol::TCP;
    f.src = {"VM1", 50000};
    f.dst = {"web", 80};
    f.process_name = "curl";
    f.uid = uid;
    return f;
}

std::vector<double> evenly_spaced(double rate, double from, double until) {
    std::vector<double> out;
    for (uint64_t k = 0;; ++k) {
        double t = from + static_cast<double>(k) / rate;
        if (t >= until) break;
        out.push_back(t);
    }
    return out;
}

// Independent trailing-window count: full scan of all earlier events, same
// (t-1, t] window rule as the implementation.
size_t brute_force_window_count(const std::vector<double>& times, size_t upto) {
    size_t n = 0;
    for (size_t j = 0; j <= upto; ++j)
        if (in_window(times[j], times[upto])) n++;
    return n;
}

// Independent throttle replay: keeps the full delivered list and counts by
// full scan at every decision.
std::vector<bool> brute_force_throttle(const std::vector<double>& times, double limit) {
    std::vector<bool> pass;
    std::vector<double> delivered;
    for (double t : times) {
        size_t n = 0;
        for (double d : delivered)
            if (in_window(d, t)) n++;
        if (static_cast<double>(n) < limit) {
            delivered.push_back(t);
            pass.push_back(true);
        } else {
            pass.push_back(false);
        }
    }
    return pass;
}

struct MonitorReplay {
    std::vector<double> alert_times;
    std::vector<double> observed_rates;
};

MonitorReplay replay_monitor(const std::vector<double>& times, double threshold, double cooldown = 10.0) {
    DnsRateMonitorDetector det(monitor_spec(threshold, cooldown));
    MonitorReplay out;
    Payload q = make_dns_query("q.example", 1);
    for (double t : times) {
        Verdict v = det.inspect(dns_flow(), q, t);
        CHECK(v.action == VerdictAction::Pass);  // monitor passivity
        if (v.alert) {
            out.alert_times.push_back(t);
            out.observed_rates.push_back(*v.alert->observed_rate);
        }
    }
    return out;
}

}  // namespace

TEST_CASE("dns rate monitor threshold boundary") {
    // Steady 5 q/s never alerts.
    CHECK(replay_monitor(evenly_spaced(5.0, 0.0, 30.0), 10.0).alert_times.empty());

    // Exactly 10 in a window: no alert. The 11th query in a window alerts
    // with observed_rate 11.
    std::vector<double> ten;
    for (int i = 0; i < 10; ++i) ten.push_back(0.05 * i);
    CHECK(replay_monitor(ten, 10.0).alert_times.empty());

    std::vector<double> eleven = ten;
    eleven.push_back(0.6);
    auto r = replay_monitor(eleven, 10.0);
    REQUIRE(r.alert_times.size() == 1);
    CHECK(r.alert_times[0] == 0.6);
    CHECK(r.observed_rates[0] == 11.0);
}

TEST_CASE("dns rate monitor cooldown: 11 q/s for 30 s gives exactly 3 alerts") {
    auto r = replay_monitor(evenly_spaced(11.0, 0.0, 30.0), 10.0, 10.0);
    CHECK(r.alert_times.size() == 3);
}

TEST_CASE("dns throttle clamps delivered rate") {
    SECTION("offered 20 q/s delivers 5 per whole second") {
        DnsThrottleDetector det(throttle_spec(5.0));
        Payload q = make_dns_query("q.example", 1);
        std::map<int, int> per_second;
        for (double t : evenly_spaced(20.0, 0.0, 10.0)) {
            Verdict v = det.inspect(dns_flow(), q, t);
            if (v.action == VerdictAction::Pass) per_second[static_cast<int>(t)]++;
        }
        for (int s = 0; s < 10; ++s) CHECK(per_second[s] == 5);
    }
    SECTION("offered at the limit passes everything") {
        DnsThrottleDetector det(throttle_spec(5.0));
        Payload q = make_dns_query("q.example", 1);
        for (double t : evenly_spaced(5.0, 0.0, 10.0))
            CHECK(det.inspect(dns_flow(), q, t).action == VerdictAction::Pass);
    }
    SECTION("offered 50 q/s for 10 s delivers exactly 50") {
        DnsThrottleDetector det(throttle_spec(5.0));
        Payload q = make_dns_query("q.example", 1);
        int delivered = 0;
        for (double t : evenly_spaced(50.0, 0.0, 10.0))
            if (det.inspect(dns_flow(), q, t).action == VerdictAction::Pass) delivered++;
        CHECK(delivered == 50);
    }
    SECTION("non-dns buffers pass unconditionally") {
        DnsThrottleDetector det(throttle_spec(1.0));
        Payload h = make_http_request("GET", "x.example", "/", 0);
        for (int i = 0; i < 10; ++i)
            CHECK(det.inspect(dns_flow(), h, 0.01 * i).action == VerdictAction::Pass);
    }
}

TEST_CASE("throttle conservation bound over whole-second intervals") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> times;
        int n = 200 + static_cast<int>(rng() % 800);
        for (int i = 0; i < n; ++i) times.push_back(static_cast<double>(rng() % 100000) / 10000.0);
        std::sort(times.begin(), times.end());

        double limit = 1.0 + static_cast<double>(rng() % 8);
        DnsThrottleDetector det(throttle_spec(limit));
        Payload q = make_dns_query("q.example", 1);
        std::vector<double> delivered;
        for (double t : times)
            if (det.inspect(dns_flow(), q, t).action == VerdictAction::Pass) delivered.push_back(t);

        for (double t0 = 0.0; t0 + 1.0 <= 10.0; t0 += 0.25) {
            for (int span = 1; span <= 5; ++span) {
                size_t count = 0;
                for (double d : delivered)
                    if (d >= t0 && d < t0 + span) count++;
                CHECK(static_cast<double>(count) <= limit * span + limit);
            }
        }
    }
}

TEST_CASE("oracle equivalence on randomized sequences") {
    std::mt19937_64 rng(4242);
    for (int trial = 0; trial < 30; ++trial) {
        int n = 50 + static_cast<int>(rng() % 1000);
        std::vector<double> times;
        for (int i = 0; i < n; ++i) times.push_back(static_cast<double>(rng() % 1000000) / 10000.0);
        std::sort(times.begin(), times.end());

        RateWindow window;
        for (size_t i = 0; i < times.size(); ++i) {
            window.add(times[i]);
            REQUIRE(window.count(times[i]) == brute_force_window_count(times, i));
        }

        double limit = 1.0 + static_cast<double>(rng() % 10);
        DnsThrottleDetector det(throttle_spec(limit));
        Payload q = make_dns_query("q.example", 1);
        auto expected = brute_force_throttle(times, limit);
        for (size_t i = 0; i < times.size(); ++i) {
            bool pass = det.inspect(dns_flow(), q, times[i]).action == VerdictAction::Pass;
            REQUIRE(pass == expected[i]);
        }
    }
}

TEST_CASE("http url blocker") {
    HttpUrlBlockDetector det(block_spec({"exampleurl.com"}));

    Verdict v = det.inspect(http_flow(0), make_http_request("GET", "exampleurl.com", "/", 0), 1.0);
    CHECK(v.action == VerdictAction::Drop);
    REQUIRE(v.alert);
    CHECK(v.alert->kind == ConditionKind::MaliciousUrlContact);
    CHECK(*v.alert->url == "exampleurl.com");
    CHECK(v.alert->uid == 0);

    CHECK(det.inspect(http_flow(0), make_http_request("GET", "benign.example", "/", 0), 2.0).action ==
          VerdictAction::Pass);

    // Case-insensitive match; cooldown suppresses the repeat alert.
    Verdict upper = det.inspect(http_flow(0), make_http_request("GET", "EXAMPLEURL.COM", "/", 0), 3.0);
    CHECK(upper.action == VerdictAction::Drop);
    CHECK(!upper.alert);

    // Non-root clients are blocked too; the alert records the uid.
    HttpUrlBlockDetector det2(block_spec({"exampleurl.com"}));
    Verdict nonroot = det2.inspect(http_flow(1000), make_http_request("GET", "exampleurl.com", "/", 1000), 1.0);
    CHECK(nonroot.action == VerdictAction::Drop);
    REQUIRE(nonroot.alert);
    CHECK(nonroot.alert->uid == 1000);
}

TEST_CASE("root http monitor poisons root requests and feeds back urls") {
    RootHttpMonitorDetector det(rootmon_spec({"exampleurl.com"}));

    Verdict v = det.inspect(http_flow(0), make_http_request("GET", "newbad.example", "/", 0), 1.0);
    CHECK(v.action == VerdictAction::Poison);
    REQUIRE(v.alert);
    CHECK(v.alert->kind == ConditionKind::RootHttpAttempt);
    CHECK(*v.alert->url == "newbad.example");

    // uid gate: non-root requests pass through this module.
    CHECK(det.inspect(http_flow(1000), make_http_request("GET", "exampleurl.com", "/", 1000), 2.0).action ==
          VerdictAction::Pass);

    // DNS buffers are not its business.
    CHECK(det.inspect(dns_flow(0), make_dns_query("q.example", 1), 3.0).action == VerdictAction::Pass);
}

TEST_CASE("poisoned requests keep length but no longer parse") {
    Payload req = make_http_request("GET", "newbad.example", "/", 0);
    Payload bad = poison(req);
    CHECK(bad.raw.size() == req.raw.size());
    CHECK(parse_http(req.raw));
    CHECK(!parse_http(bad.raw));
}
