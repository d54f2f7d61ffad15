#include <doctest.h>

#include <algorithm>
#include <bit>
#include <functional>
#include <random>

#include "chainflow/interpreter.hpp"
#include "support/builder.hpp"
#include "support/fig1_model.hpp"
#include "support/harness.hpp"
#include "support/proxy.hpp"

using namespace chainflow;

namespace {

EdgeSet edges(std::initializer_list<unsigned> xs) { return EdgeSet(xs); }

TypeInfo kindOf(const ElementKind& k) { return TypeInfo::encode(k); }

}  // namespace

TEST_CASE("token helpers") {
    const auto andJoin = kindOf(builder::gateway(GatewayKind::Parallel, true));
    const auto xorJoin = kindOf(builder::gateway(GatewayKind::Exclusive, true));
    const auto task = kindOf(builder::userTask());

    ProcessState s;
    s.tokens = edges({1});
    CHECK_FALSE(isEnabled(edges({1, 2}), andJoin, s));
    s.tokens = edges({1, 2});
    CHECK(isEnabled(edges({1, 2}), andJoin, s));

    s.tokens = edges({2});
    CHECK(isEnabled(edges({1, 2}), xorJoin, s));
    removeTokens(s, edges({1, 2}), xorJoin);
    CHECK(s.tokens.none());

    ProcessState empty;
    addTokens(empty, edges({3}));
    CHECK(empty.tokens == edges({3}));

    CHECK_FALSE(isEnabled(EdgeSet{}, task, s));

    addSubProcess(s, 8);
    CHECK_FALSE(isCompleted(s));
    removeSubProcess(s, 8);
    CHECK(isCompleted(s));
}

TEST_CASE("consumption rules over random markings") {
    std::mt19937_64 rng(7);
    const TypeInfo kinds[] = {
        kindOf(builder::userTask()),
        kindOf(builder::scriptTask()),
        kindOf(builder::endEvent(EventTrigger::None)),
        kindOf(builder::gateway(GatewayKind::Exclusive, true)),
        kindOf(builder::gateway(GatewayKind::Exclusive, false)),
        kindOf(builder::gateway(GatewayKind::Parallel, true)),
        kindOf(builder::gateway(GatewayKind::Parallel, false)),
        kindOf(builder::gateway(GatewayKind::Inclusive, true)),
    };
    for (int i = 0; i < 5000; ++i) {
        EdgeSet preC, tokens;
        for (unsigned b = 0; b < 8; ++b) {
            if (rng() % 3 == 0) preC.set(b);
            if (rng() % 2 == 0) tokens.set(b);
        }
        auto t = kinds[rng() % std::size(kinds)];
        ProcessState s{tokens, {}};
        const bool enabled = isEnabled(preC, t, s);
        const bool parallelJoin = t.isJoin() && t.isParallelGateway();
        CHECK(enabled == (parallelJoin ? preC.any() && preC.isSubsetOf(tokens) : preC.intersects(tokens)));
        if (!enabled) continue;

        removeTokens(s, preC, t);
        // tokens outside preC are never touched
        CHECK((s.tokens & ~preC) == (tokens & ~preC));
        EdgeSet consumed = tokens & ~s.tokens;
        if (t.isGateway() && !(t.isJoin() && t.isExclusiveGateway())) {
            CHECK(consumed == (tokens & preC));
        } else {
            CHECK(consumed == EdgeSet::single((tokens & preC).lowest()));
        }
    }
}

TEST_CASE("parallel multi-instance creates every child up front") {
    Ledger ledger;
    Runtime rt(ledger);
    builder::Proc p{"P", {}, {}, {}};
    p.elements = {
        {1, builder::startEvent(), {0}, {1}},
        {2, builder::subProcess(MultiInstance::Parallel), {1}, {2}, "", kNoElement, 3, "C"},
        {3, builder::userTask(), {2}, {3}},
        {4, builder::endEvent(EventTrigger::None), {3}, {}},
    };
    builder::Proc c{"C", {}, {}, {}};
    c.elements = {
        {1, builder::startEvent(), {0}, {1}},
        {2, builder::userTask(), {1}, {2}},
        {3, builder::endEvent(EventTrigger::None), {2}, {}},
    };
    auto b = builder::deploy(rt, {p, c}, "P");
    auto root = rt.startCase(b.rootFlow, "alice");

    auto v = rt.inspect(root);
    REQUIRE(v.children.size() == 3);
    CHECK(v.state.tokens.none());
    CHECK(v.state.running == EdgeSet({2}));
    CHECK(v.instCount.at(2) == 3);
    for (const auto& k : v.children) CHECK(k.enabled == std::vector<ElementIndex>{2});

    std::vector<Address> kids;
    for (const auto& k : v.children) kids.push_back(k.address);
    for (std::size_t i = 0; i < 3; ++i) {
        rt.checkIn(kids[i], 2, {}, "alice");
        v = rt.inspect(root);
        CHECK(v.children.size() == 3);
        if (i < 2) {
            CHECK(v.state.tokens.none());
            CHECK(v.state.running.test(2));
            CHECK(v.instCount.at(2) == 2 - i);
        }
    }
    CHECK(v.state.tokens == EdgeSet({2}));
    CHECK(v.state.running.none());
    CHECK(v.enabled == std::vector<ElementIndex>{3});
}

TEST_CASE("sequential multi-instance creates one child at a time") {
    Ledger ledger;
    Runtime rt(ledger);
    builder::Proc p{"P", {}, {}, {}};
    p.elements = {
        {1, builder::startEvent(), {0}, {1}},
        {2, builder::subProcess(MultiInstance::Sequential), {1}, {2}, "", kNoElement, 3, "C"},
        {3, builder::userTask(), {2}, {3}},
        {4, builder::endEvent(EventTrigger::None), {3}, {}},
    };
    builder::Proc c{"C", {}, {}, {}};
    c.elements = {
        {1, builder::startEvent(), {0}, {1}},
        {2, builder::userTask(), {1}, {2}},
        {3, builder::endEvent(EventTrigger::None), {2}, {}},
    };
    auto b = builder::deploy(rt, {p, c}, "P");
    auto root = rt.startCase(b.rootFlow, "alice");

    for (std::size_t round = 1; round <= 3; ++round) {
        auto v = rt.inspect(root);
        REQUIRE(v.children.size() == round);
        std::size_t live = 0;
        for (const auto& k : v.children) live += !k.state.isCompleted();
        CHECK(live == 1);
        CHECK(v.state.tokens.none());
        CHECK(v.state.running == EdgeSet({2}));
        rt.checkIn(v.children.back().address, 2, {}, "alice");
    }
    auto v = rt.inspect(root);
    CHECK(v.children.size() == 3);
    CHECK(v.state.tokens == EdgeSet({2}));
    CHECK(v.state.running.none());
}

TEST_CASE("sub-process without a factory is rejected") {
    Ledger ledger;
    Runtime rt(ledger);
    builder::Proc p{"P", {}, {}, {}};
    p.elements = {
        {1, builder::startEvent(), {0}, {1}},
        {2, builder::subProcess(), {1}, {2}},
        {3, builder::endEvent(EventTrigger::None), {2}, {}},
    };
    auto b = builder::deploy(rt, {p}, "P");
    CHECK_THROWS_WITH_AS(rt.startCase(b.rootFlow, "alice"), "REJECTED", Revert);
    CHECK(rt.cases(b.rootFlow).empty());
}

TEST_CASE("external calls to engine internals are rejected") {
    harness::Deployed d(harness::fixture("fig1.bpmn"));
    auto& ledger = d.ledger();
    auto& rt = d.runtime();
    testkit::Proxy::registerOn(ledger);
    auto proxy = ledger.deploy("mallory", "test-proxy", {}).created;
    REQUIRE_FALSE(proxy.isZero());

    auto root = d.startCase();
    rt.checkIn(root, 2, {script::Value(true)}, "alice");
    rt.checkIn(root, 4, {script::Value(false)}, "alice");
    auto child = rt.inspect(root).children.at(0).address;
    auto interpreter = *rt.interpreter();
    AccountInvoker viewer(ledger, "x", AccountInvoker::Mode::View);
    auto factory = DataNodeRef(viewer, root).info().factory;

    struct Op {
        Address target;
        std::string name;
        std::function<Bytes(std::mt19937_64&, const Address&)> args;
    };
    auto anyNode = [&](std::mt19937_64& rng) { return rng() % 2 ? root : child; };
    auto anyIndex = [](std::mt19937_64& rng) { return static_cast<std::uint32_t>(rng() % 12); };
    std::vector<Op> ops = {
        {interpreter, "executeElements", [&](auto& r, auto&) { return Writer().address(anyNode(r)).u32(anyIndex(r)).take(); }},
        {interpreter, "createInstance", [&](auto& r, auto&) { return Writer().address(anyNode(r)).u32(anyIndex(r)).take(); }},
        {interpreter, "throwEvent",
         [&](auto& r, auto&) {
             return Writer().address(anyNode(r)).hash(sha256(std::to_string(r()))).u16(static_cast<std::uint16_t>(r())).take();
         }},
        {interpreter, "tryCatchEvent",
         [&](auto& r, auto&) {
             return Writer().address(anyNode(r)).hash(Hash32{}).u16(static_cast<std::uint16_t>(r())).take();
         }},
        {interpreter, "killSubProcess", [&](auto& r, auto&) { return Writer().address(anyNode(r)).take(); }},
        {interpreter, "broadcastSignal", [&](auto& r, auto&) { return Writer().address(anyNode(r)).take(); }},
        {factory, "newInstance", [](auto&, auto&) { return Bytes{}; }},
    };
    for (const auto& target : {root, child}) {
        ops.push_back({target, "setParent", [&](auto& r, auto& self) {
                           return Writer().address(self).address(anyNode(r)).u32(anyIndex(r)).take();
                       }});
        ops.push_back({target, "updateProcessState", [](auto& r, auto&) {
                           Writer w;
                           writeState(w, ProcessState{EdgeSet::fromU64(r()), EdgeSet::fromU64(r())});
                           return w.take();
                       }});
        ops.push_back({target, "addChild", [&](auto& r, auto& self) { return Writer().u32(anyIndex(r)).address(self).take(); }});
        ops.push_back({target, "decreaseInstCount", [&](auto& r, auto&) { return Writer().u32(anyIndex(r)).take(); }});
        ops.push_back({target, "setCountInst",
                       [&](auto& r, auto&) { return Writer().u32(anyIndex(r)).u32(static_cast<std::uint32_t>(r() % 5)).take(); }});
        ops.push_back({target, "close", [](auto&, auto&) { return Bytes{}; }});
        ops.push_back({target, "execScript", [&](auto& r, auto&) { return Writer().u32(anyIndex(r)).take(); }});
    }

    auto before = toJson(rt.inspect(root));
    auto logBefore = ledger.logSize();
    std::mt19937_64 rng(99);
    std::set<std::string> covered;
    for (int i = 0; i < 400; ++i) {
        const auto& op = ops[rng() % ops.size()];
        auto args = op.args(rng, proxy);
        const int caller = static_cast<int>(rng() % 3);
        Receipt r;
        if (caller == 2) {
            r = ledger.call("mallory", proxy, "forward", Writer().address(op.target).str(op.name).bytes(args).take());
        } else {
            r = ledger.call(caller == 0 ? "alice" : rt.admin(), op.target, op.name, args);
        }
        CAPTURE(op.name);
        CHECK_FALSE(r.ok);
        CHECK(r.reason == "REJECTED");
        CHECK(ledger.transactions().back().status == TxStatus::Reverted);
        covered.insert(op.name);
    }
    CHECK(covered.size() == 14);
    CHECK(toJson(rt.inspect(root)) == before);
    CHECK(ledger.logSize() == logBefore);
}

TEST_CASE("a setElement reroute reaches running and fresh cases alike") {
    using namespace harness;
    Deployed d(fixture("fig1.bpmn"));
    auto model = fig1::model();
    auto& root = model.processes.at("Root");
    // G2 now feeds edge 9 (the recovery path) instead of edge 7.
    std::erase_if(root.edges, [](const oracle::Edge& e) { return e.id == "f7"; });
    for (auto& e : root.edges)
        if (e.id == "f9") e.source = "G2";

    oracle::Task t1{{}, "T1"}, t2{{}, "T2"};
    auto running = d.startCase();
    oracle::Simulator simRunning(model);
    simRunning.start();
    d.fire(running, t1, {{"_t1Field", true}});
    simRunning.fire(t1, {{"_t1Field", true}});
    REQUIRE(diff(d, running, simRunning) == "");

    AccountInvoker admin(d.ledger(), d.runtime().admin());
    FlowNodeRef flow(admin, d.rootFlow());
    auto g2 = d.elementIndex("Root", "G2");
    ElementEntry entry;
    auto flowInfo = flow.info();
    for (const auto& e : flowInfo.elements)
        if (e.eInd == g2) entry = e;
    entry.postC = EdgeSet::single(d.edgeIndex("Root", "f9"));
    flow.setElement(entry);

    auto fresh = d.startCase();
    oracle::Simulator simFresh(model);
    simFresh.start();
    d.fire(fresh, t1, {{"_t1Field", true}});
    simFresh.fire(t1, {{"_t1Field", true}});

    for (auto [c, sim] : {std::pair{running, &simRunning}, std::pair{fresh, &simFresh}}) {
        d.fire(c, t2, {{"_t2Field", true}});
        sim->fire(t2, {{"_t2Field", true}});
        CHECK(diff(d, c, *sim) == "");
        oracle::Task recovery{{{"S2", 0}}, "C_task"};
        CHECK(sim->enabled() == std::set<oracle::Task>{recovery});
        d.fire(c, recovery, {{"_note", "rerouted"}});
        sim->fire(recovery, {{"_note", "rerouted"}});
        CHECK(diff(d, c, *sim) == "");
        CHECK(d.runtime().inspect(c).state.isCompleted());
    }
    CHECK(d.snapshot(running) == d.snapshot(fresh));
}

TEST_CASE("interleaved cases do not see each other") {
    using namespace harness;
    const oracle::Task t1{{}, "T1"}, t2{{}, "T2"}, review{{{"S1", 0}}, "R_task"}, recovery{{{"S2", 0}}, "C_task"};
    const std::vector<std::pair<oracle::Task, nlohmann::json>> a = {
        {t1, {{"_t1Field", true}}}, {t2, {{"_t2Field", false}}}, {review, {{"_approved", true}}}};
    const std::vector<std::pair<oracle::Task, nlohmann::json>> b = {
        {t1, {{"_t1Field", false}}}, {review, {{"_approved", false}}}, {recovery, {{"_note", "x"}}}};

    // Solo reference runs.
    auto solo = [](const auto& steps) {
        Deployed d(fixture("fig1.bpmn"));
        auto c = d.startCase();
        std::vector<Snapshot> out{d.snapshot(c)};
        for (const auto& [t, p] : steps) {
            d.fire(c, t, p);
            out.push_back(d.snapshot(c));
        }
        return out;
    };
    auto soloA = solo(a), soloB = solo(b);

    // Every interleaving of the two three-step sequences.
    for (unsigned mask = 0; mask < 64; ++mask) {
        if (std::popcount(mask) != 3) continue;
        Deployed d(fixture("fig1.bpmn"));
        auto ca = d.startCase();
        auto cb = d.startCase("bob");
        std::size_t ia = 0, ib = 0;
        for (unsigned k = 0; k < 6; ++k) {
            if (mask >> k & 1) {
                d.fire(ca, a[ia].first, a[ia].second);
                ++ia;
            } else {
                d.fire(cb, b[ib].first, b[ib].second, "bob");
                ++ib;
            }
            CHECK(d.snapshot(ca) == soloA[ia]);
            CHECK(d.snapshot(cb) == soloB[ib]);
        }
    }
}

TEST_CASE("disabled check-ins leave the case untouched") {
    harness::Deployed d(harness::fixture("fig1.bpmn"));
    auto& rt = d.runtime();
    std::mt19937_64 rng(3);
    for (int round = 0; round < 20; ++round) {
        auto root = d.startCase();
        if (round % 2) rt.checkIn(root, 2, {script::Value(round % 4 == 1)}, "alice");
        for (int i = 0; i < 10; ++i) {
            auto e = static_cast<ElementIndex>(rng() % 14);
            auto view = rt.inspect(root);
            bool enabled = std::find(view.enabled.begin(), view.enabled.end(), e) != view.enabled.end();
            if (enabled) continue;
            auto before = toJson(view);
            CHECK_THROWS_AS(rt.checkIn(root, e, {}, "alice"), Revert);
            CHECK(toJson(rt.inspect(root)) == before);
        }
    }
}

TEST_CASE("a token-increasing cycle hits the execution budget") {
    Ledger ledger;
    Runtime rt(ledger);
    builder::Proc p{"P", {}, {}, {}};
    p.elements = {
        {1, builder::startEvent(), {0}, {1}},
        {2, builder::gateway(GatewayKind::Parallel, false), {1}, {2, 3}},
        {3, builder::scriptTask(), {2}, {1}},
        {4, builder::userTask(), {3}, {4}},
        {5, builder::endEvent(EventTrigger::None), {4}, {}},
    };
    auto b = builder::deploy(rt, {p}, "P");
    auto txs = ledger.transactionCount();
    CHECK_THROWS_WITH_AS(rt.startCase(b.rootFlow, "alice"), "BUDGET", Revert);
    CHECK(ledger.transactionCount() == txs + 1);
    CHECK(ledger.transactions().back().status == TxStatus::Reverted);
    CHECK(rt.cases(b.rootFlow).empty());
}

TEST_CASE("kill is idempotent and spares ancestors") {
    // Three levels: root -> A -> B, B holding a user task; an error thrown
    // in B is caught by a boundary on A in the root.
    Ledger ledger;
    Runtime rt(ledger);
    builder::Proc root{"R", {}, {}, {}};
    root.elements = {
        {1, builder::startEvent(), {0}, {1}},
        {2, builder::gateway(GatewayKind::Parallel, false), {1}, {2, 3}},
        {3, builder::subProcess(), {2}, {4}, "", kNoElement, 1, "A"},
        {4, builder::userTask(), {3}, {5}},
        {5, builder::endEvent(EventTrigger::None), {4}, {}},
        {6, builder::endEvent(EventTrigger::None), {5}, {}},
        {7, builder::boundary(EventTrigger::Error, true), {}, {6}, "E", 3},
        {8, builder::endEvent(EventTrigger::None), {6}, {}},
    };
    builder::Proc a{"A", {}, {}, {}};
    a.elements = {
        {1, builder::startEvent(), {0}, {1}},
        {2, builder::gateway(GatewayKind::Parallel, false), {1}, {2, 3}},
        {3, builder::subProcess(), {2}, {4}, "", kNoElement, 1, "B"},
        {4, builder::userTask(), {3}, {5}},
        {5, builder::endEvent(EventTrigger::None), {4}, {}},
        {6, builder::endEvent(EventTrigger::Error), {5}, {}, "E"},
    };
    builder::Proc bp{"B", {}, {}, {}};
    bp.elements = {
        {1, builder::startEvent(), {0}, {1}},
        {2, builder::userTask(), {1}, {2}},
        {3, builder::endEvent(EventTrigger::None), {2}, {}},
    };
    auto built = builder::deploy(rt, {root, a, bp}, "R");
    auto c = rt.startCase(built.rootFlow, "alice");
    auto v = rt.inspect(c);
    auto aNode = v.children.at(0).address;
    CHECK(v.children.at(0).children.size() == 1);

    rt.checkIn(aNode, 4, {}, "alice");  // A throws E
    v = rt.inspect(c);
    CHECK(v.state.tokens == EdgeSet({3}));  // root keeps its own task
    CHECK(v.state.running.none());
    CHECK(v.children.at(0).state.isCompleted());
    CHECK(v.children.at(0).children.at(0).state.isCompleted());
    CHECK(enabledTasks(v) == std::vector<EnabledTask>{{c, 4, "R"}});
}
