#include <catch2/catch_amalgamated.hpp>

#include <idsorch/simnet.hpp>
#include <idsorch/summary.hpp>

using namespace idsorch;
using namespace idsorch::sim;

TEST_CASE("dns jit scenario reproduces the expected event structure") {
    RunResult r = run_scenario(scenario_dns_jit());

    for (const std::string attacker : {"VM2", "VM3"}) {
        auto a = r.first_event(attacker, TimelineLabel::A_AlertRaised);
        auto b = r.first_event(attacker, TimelineLabel::B_OrchestratorNotified);
        auto c = r.first_event(attacker, TimelineLabel::C_ModuleDeployed);
        auto d = r.first_event(attacker, TimelineLabel::D_ResponseEffective);
        REQUIRE(a);
        REQUIRE(b);
        REQUIRE(c);
        REQUIRE(d);
        CHECK(*a >= 10.0);
        CHECK(*a < 11.0);
        CHECK(*b > *a);
        CHECK(*b <= *a + 5.0);
        CHECK(*c >= *b);
        CHECK(*d >= *c);
    }

    // The benign host receives the module despite never alerting, and later
    // than both attackers.
    auto benign_c = r.first_event("VM1", TimelineLabel::C_ModuleDeployed);
    REQUIRE(benign_c);
    CHECK(!r.first_event("VM1", TimelineLabel::A_AlertRaised));
    CHECK(*benign_c > *r.first_event("VM2", TimelineLabel::C_ModuleDeployed));
    CHECK(*benign_c > *r.first_event("VM3", TimelineLabel::C_ModuleDeployed));
}

TEST_CASE("quiescent all-benign scenario emits no timeline events") {
    Scenario s = scenario_dns_jit();
    s.name = "all_benign";
    for (auto& h : s.hosts) {
        h.profile.kind = TrafficKind::Benign;
        h.profile.attack_rate = h.profile.baseline_rate;
    }
    RunResult r = run_scenario(s);
    CHECK(r.timeline.empty());
    CHECK(r.alerts.empty());
    // All delivered rates stay at baseline.
    for (const auto& [host, by_sec] : r.rates)
        for (const auto& [sec, n] : by_sec)
            if (sec > 0 && sec < 59) CHECK(n == 5);
}

TEST_CASE("throttled hosts stay at or under the limit after D") {
    RunResult r = run_scenario(scenario_dns_jit());
    for (const std::string host : {"VM1", "VM2", "VM3"}) {
        auto d = r.first_event(host, TimelineLabel::D_ResponseEffective);
        REQUIRE(d);
        int from = static_cast<int>(std::floor(*d)) + 1;
        for (int sec = from; sec < 60; ++sec) CHECK(r.rates.at(host).at(sec) <= 5);
    }
}

TEST_CASE("prebuilt response is faster than jit end to end") {
    RunResult jit = run_scenario(scenario_dns_jit());
    RunResult pre = run_scenario(scenario_dns_prebuilt());
    auto total = [](const RunResult& r) {
        auto a = r.first_event_any(TimelineLabel::A_AlertRaised);
        auto d = r.last_event_any(TimelineLabel::D_ResponseEffective);
        REQUIRE(a);
        REQUIRE(d);
        return *d - *a;
    };
    CHECK(total(pre) < total(jit));
}

TEST_CASE("two attackers in one poll produce one deployment per host") {
    RunResult r = run_scenario(scenario_dns_jit());
    std::map<std::string, int> c_events;
    for (const auto& e : r.timeline)
        if (e.label == TimelineLabel::C_ModuleDeployed) c_events[e.host.name]++;
    for (const auto& [host, n] : c_events) CHECK(n == 1);
    CHECK(c_events.size() == 3);
}

TEST_CASE("root http scenario: nullification and feedback loop") {
    RunResult r = run_scenario(scenario_root_http());

    // The root request to the known malicious url never reaches the server.
    CHECK(r.http.bytes_for_url("exampleurl.com") == 0);
    CHECK(r.http.response_count_for_url("exampleurl.com") == 0);

    // Its url is recorded in the alert database.
    bool seen = false;
    for (const auto& a : r.alerts)
        if (a.condition.url && *a.condition.url == "exampleurl.com") seen = true;
    CHECK(seen);

    // Post-deployment root request to an unseen url is poisoned: bytes arrive
    // but no request for that url ever parses.
    CHECK(r.http.response_count_for_url("newbad.example") == 0);
    bool newbad_alert = false;
    for (const auto& a : r.alerts)
        if (a.condition.kind == ConditionKind::RootHttpAttempt && a.condition.url &&
            *a.condition.url == "newbad.example")
            newbad_alert = true;
    CHECK(newbad_alert);

    // The final monitor module's blocklist contains the fed-back url.
    const ModuleSpec* final_monitor = nullptr;
    for (const auto& spec : r.final_modules)
        if (spec.kind == ModuleKind::RootHttpMonitor) final_monitor = &spec;
    REQUIRE(final_monitor);
    REQUIRE(final_monitor->params.blocklist);
    auto& bl = *final_monitor->params.blocklist;
    CHECK(std::find(bl.begin(), bl.end(), "newbad.example") != bl.end());
    CHECK(std::find(bl.begin(), bl.end(), "exampleurl.com") != bl.end());
}

TEST_CASE("dns server sees only surviving queries") {
    // Two throttled senders at 20 q/s each: aggregate <= 10/s once both are
    // mitigated.
    Scenario s = scenario_dns_jit();
    s.name = "two_midlevel";
    s.hosts[2].profile.attack_rate = 20.0;
    s.hosts[1].profile.attack_rate = 20.0;
    RunResult r = run_scenario(s);
    auto d2 = r.first_event("VM2", TimelineLabel::D_ResponseEffective);
    auto d3 = r.first_event("VM3", TimelineLabel::D_ResponseEffective);
    REQUIRE(d2);
    REQUIRE(d3);
    int from = static_cast<int>(std::floor(std::max(*d2, *d3))) + 1;
    for (int sec = from; sec < 60; ++sec)
        CHECK(r.rates.at("VM2").at(sec) + r.rates.at("VM3").at(sec) <= 10);
}

TEST_CASE("same seed gives byte-identical exports; different seed differs") {
    for (const std::string name : {"scenario_dns_jit", "scenario_dns_prebuilt", "scenario_root_http"}) {
        Scenario s = *library_scenario(name);
        RunResult r1 = run_scenario(s);
        RunResult r2 = run_scenario(s);
        CHECK(r1.timeline_csv == r2.timeline_csv);
        CHECK(r1.rates_csv == r2.rates_csv);
        CHECK(r1.alerts_csv == r2.alerts_csv);
    }
    Scenario s = scenario_dns_jit();
    s.seed = 17;
    CHECK(run_scenario(s).timeline_csv != run_scenario(scenario_dns_jit()).timeline_csv);
}

TEST_CASE("scenario validation rejects bad configurations") {
    Scenario s = scenario_dns_jit();
    CHECK(validate_scenario(s).empty());

    Scenario bad = s;
    bad.hosts[1].profile.attack_start = 100.0;  // beyond duration
    CHECK(!validate_scenario(bad).empty());

    Scenario dup = s;
    dup.hosts[1].host.name = "VM1";
    CHECK(!validate_scenario(dup).empty());

    Scenario badrule = s;
    badrule.rules[0].jit_fields = {"no_such_field"};
    CHECK(!validate_scenario(badrule).empty());
}

TEST_CASE("scenario json round-trip preserves behavior") {
    for (const std::string name : {"scenario_dns_jit", "scenario_root_http"}) {
        Scenario s = *library_scenario(name);
        json j = s;
        Scenario restored = j.get<Scenario>();
        CHECK(run_scenario(restored).timeline_csv == run_scenario(s).timeline_csv);
    }
}

TEST_CASE("summary derives from the csv exports") {
    RunResult r = run_scenario(scenario_dns_jit());
    RunSummary s = compute_summary("scenario_dns_jit", r.timeline_csv, r.rates_csv);
    REQUIRE(s.total_response_s);
    CHECK(*s.total_response_s > 30.0);
    REQUIRE(s.post_mitigation_max_rate);
    CHECK(*s.post_mitigation_max_rate <= 5);
    CHECK(s.alert_count == r.alerts.size());
    CHECK(s.hosts.at("VM2").a);
    CHECK(!s.hosts.at("VM1").a);
    CHECK(s.hosts.at("VM1").c);

    json j = s;
    RunSummary restored = j.get<RunSummary>();
    CHECK(restored.scenario == s.scenario);
    CHECK(restored.total_response_s == s.total_response_s);
}
