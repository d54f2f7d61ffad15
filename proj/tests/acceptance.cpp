// Acceptance runner: one PASS/FAIL line per primary criterion.
//
// Most criteria run the named unit test cases through doctest; the oracle
// suite runs its own 200 seeds. Limits are wall-clock and fixed here.

#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "support/equivalence.hpp"

namespace {

using Clock = std::chrono::steady_clock;

// Counts executed test cases and assertions across doctest runs.
struct Tally : doctest::IReporter {
    static inline int cases = 0;
    static inline int failedCases = 0;
    static inline long asserts = 0;

    explicit Tally(const doctest::ContextOptions&) {}
    void report_query(const doctest::QueryData&) override {}
    void test_run_start() override {}
    void test_run_end(const doctest::TestRunStats&) override {}
    void test_case_start(const doctest::TestCaseData&) override { ++cases; }
    void test_case_reenter(const doctest::TestCaseData&) override {}
    void test_case_end(const doctest::CurrentTestCaseStats& s) override {
        if (s.failure_flags) ++failedCases;
    }
    void test_case_exception(const doctest::TestCaseException&) override {}
    void subcase_start(const doctest::SubcaseSignature&) override {}
    void subcase_end() override {}
    void log_assert(const doctest::AssertData&) override { ++asserts; }
    void log_message(const doctest::MessageData&) override {}
    void test_case_skipped(const doctest::TestCaseData&) override {}
};

REGISTER_LISTENER("tally", 1, Tally);

struct Outcome {
    bool pass = false;
    std::string detail;
};

// Runs the test cases matching `filters` (doctest wildcards, comma-separated).
// Fails when nothing matched so a renamed test cannot pass silently.
Outcome runCases(const std::string& filters, int expectedCases) {
    Tally::cases = Tally::failedCases = 0;
    Tally::asserts = 0;
    doctest::Context ctx;
    ctx.setOption("test-case", filters.c_str());
    ctx.setOption("minimal", true);
    ctx.setOption("no-version", true);
    int rc = ctx.run();
    Outcome o;
    o.pass = rc == 0 && Tally::failedCases == 0 && Tally::cases == expectedCases;
    o.detail = std::to_string(Tally::cases) + "/" + std::to_string(expectedCases) + " cases, " +
               std::to_string(Tally::asserts) + " assertions, " + std::to_string(Tally::failedCases) + " failed";
    return o;
}

Outcome oracleSuite() {
    constexpr std::uint64_t kModels = 200;
    std::size_t failures = 0, steps = 0, withSub = 0, withError = 0, oversized = 0;
    std::string first;
    for (std::uint64_t seed = 1; seed <= kModels; ++seed) {
        auto out = equivalence::runSeed(seed);
        steps += out.steps;
        withSub += out.usedSubprocess;
        withError += out.raisedError;
        oversized += out.elements > 12;
        if (!out.failure.empty()) {
            if (!failures) first = "seed " + std::to_string(seed) + ": " + out.failure;
            ++failures;
        }
    }
    Outcome o;
    o.pass = failures == 0 && oversized == 0 && withSub > 0 && withError > 0;
    o.detail = std::to_string(kModels) + " models, " + std::to_string(steps) + " steps compared, " +
               std::to_string(withSub) + " with sub-process, " + std::to_string(withError) + " raising, " +
               std::to_string(failures) + " mismatches, " + std::to_string(oversized) + " over 12 elements";
    if (!first.empty()) o.detail += "\n    first mismatch: " + first;
    return o;
}

struct Criterion {
    const char* name;
    double limitSeconds;  // 0 = no time bound
    std::function<Outcome()> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {"fig1-golden-scenarios", 5.0,
         [] { return runCases("fig1 happy path*,fig1 exclusive alternative*,fig1 exception path*,fig1 index*", 4); }},
        {"oracle-equivalence", 60.0, oracleSuite},
        {"event-propagation-matrix", 0,
         [] {
             return runCases("event propagation matrix,message and none ends*,error codes must match*,"
                             "a fired boundary*,an interrupting event sub-process*",
                             5);
         }},
        {"multi-instance", 0,
         [] { return runCases("parallel multi-instance*,sequential multi-instance*", 2); }},
        {"sender-authentication", 0,
         [] { return runCases("external calls to engine internals are rejected,execScript is reserved*", 2); }},
        {"dynamic-update", 0, [] { return runCases("a setElement reroute*", 1); }},
        {"cost-structure", 0,
         [] {
             return runCases("one interpreter per ledger*,registration cost is linear*,"
                             "instantiation cost does not depend*",
                             3);
         }},
        {"rest-contract", 0,
         [] {
             return runCases("interpreter and model routes,flow node routes,case routes drive Fig.1,"
                             "replaying the Fig.1 traces is deterministic,revert reasons map*,"
                             "each mutating request*,http adapter*",
                             7);
         }},
        {"bitset-codec", 0,
         [] {
             return runCases("type info round trip*,every decodable description*,textual bit constraints*,"
                             "writer and reader round trip,hex*addresses and bit sets",
                             5);
         }},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        auto t0 = Clock::now();
        auto o = c.run();
        double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        bool inTime = c.limitSeconds == 0 || secs < c.limitSeconds;
        bool pass = o.pass && inTime;
        failed += !pass;
        char timing[64];
        if (c.limitSeconds > 0)
            std::snprintf(timing, sizeof timing, "%.3fs (limit %.0fs)", secs, c.limitSeconds);
        else
            std::snprintf(timing, sizeof timing, "%.3fs", secs);
        std::printf("%s %-26s %s  %s%s\n", pass ? "PASS" : "FAIL", c.name, timing, o.detail.c_str(),
                    inTime ? "" : "  [over time limit]");
        std::fflush(stdout);
    }
    std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
    return failed ? 1 : 0;
}
