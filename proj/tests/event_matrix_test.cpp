#include <doctest.h>

#include <set>

#include "support/builder.hpp"

using namespace chainflow;
using builder::El;

namespace {

// Parent P: start -> AND -> {S, W}; S -> endA, W -> endW, plus the catcher.
// Child S: start -> AND -> {T -> thrower, U -> end}. Checking in T throws.
// Catchers: boundary on S leading to user task K, or an event sub-process
// whose body is start -> X -> end.
enum class Column { BoundaryInt, BoundaryNonInt, EspInt, EspNonInt, Uncaught };

constexpr ElementIndex kS = 3, kW = 4, kCatcher = 7, kK = 8, kEsp = 10;
constexpr ElementIndex kT = 3, kU = 5;

struct Fixture {
    Ledger ledger;
    Runtime rt{ledger};
    builder::Built built;
    Address root;
};

std::vector<builder::Proc> procs(EventTrigger trigger, Column col, const std::string& thrownCode,
                                 const std::string& catchCode) {
    builder::Proc p{"P", {}, {}, {}};
    p.elements = {
        {1, builder::startEvent(), {0}, {1}},
        {2, builder::gateway(GatewayKind::Parallel, false), {1}, {2, 3}},
        {kS, builder::subProcess(), {2}, {4}, "", kNoElement, 1, "S"},
        {kW, builder::userTask(), {3}, {5}},
        {5, builder::endEvent(EventTrigger::None), {4}, {}},
        {6, builder::endEvent(EventTrigger::None), {5}, {}},
    };
    switch (col) {
        case Column::BoundaryInt:
        case Column::BoundaryNonInt: {
            El b{kCatcher, builder::boundary(trigger, col == Column::BoundaryInt), {}, {6}, catchCode, kS};
            p.elements.push_back(b);
            p.elements.push_back({kK, builder::userTask(), {6}, {7}});
            p.elements.push_back({9, builder::endEvent(EventTrigger::None), {7}, {}});
            break;
        }
        case Column::EspInt:
        case Column::EspNonInt: {
            p.elements.push_back({kEsp, builder::eventSubProcess(), {}, {}, "", kNoElement, 1, "E"});
            El s{kCatcher, builder::espStart(trigger, col == Column::EspInt), {}, {}, catchCode, kEsp};
            p.elements.push_back(s);
            break;
        }
        case Column::Uncaught: break;
    }

    builder::Proc s{"S", {}, {}, {}};
    s.elements = {
        {1, builder::startEvent(), {0}, {1}},
        {2, builder::gateway(GatewayKind::Parallel, false), {1}, {2, 3}},
        {kT, builder::userTask(), {2}, {4}},
        {4, builder::endEvent(trigger), {4}, {}, thrownCode},
        {kU, builder::userTask(), {3}, {5}},
        {6, builder::endEvent(EventTrigger::None), {5}, {}},
    };

    builder::Proc e{"E", {}, {}, {}};
    e.elements = {
        {1, builder::startEvent(), {0}, {1}},
        {2, builder::userTask(), {1}, {2}},
        {3, builder::endEvent(EventTrigger::None), {2}, {}},
    };
    return {p, s, e};
}

struct Observed {
    std::set<std::string> enabled;  // "proc/eInd"
    std::set<unsigned> pTokens;
    std::set<ElementIndex> pRunning;
    std::set<unsigned> sTokens;
    friend bool operator==(const Observed&, const Observed&) = default;
};

std::string show(const Observed& o) {
    std::string out = "enabled{";
    for (const auto& x : o.enabled) out += x + " ";
    out += "} pTokens{";
    for (auto x : o.pTokens) out += std::to_string(x) + " ";
    out += "} pRunning{";
    for (auto x : o.pRunning) out += std::to_string(x) + " ";
    out += "} sTokens{";
    for (auto x : o.sTokens) out += std::to_string(x) + " ";
    return out + "}";
}

Observed observe(Fixture& f) {
    auto v = f.rt.inspect(f.root);
    Observed o;
    for (const auto& t : enabledTasks(v)) o.enabled.insert(t.process + "/" + std::to_string(t.eInd));
    for (auto e : v.state.tokens.indexes()) o.pTokens.insert(e);
    for (auto e : v.state.running.indexes()) o.pRunning.insert(e);
    for (const auto& c : v.children)
        if (c.indexInParent == kS)
            for (auto e : c.state.tokens.indexes()) o.sTokens.insert(e);
    return o;
}

Address childS(Fixture& f) {
    for (const auto& c : f.rt.inspect(f.root).children)
        if (c.indexInParent == kS) return c.address;
    throw std::logic_error("no S child");
}

std::size_t messagesSent(const Ledger& l) {
    std::size_t n = 0;
    for (const auto& e : l.readLog(0)) n += e.name == "MessageSent";
    return n;
}

struct Cell {
    EventTrigger trigger;
    Column col;
    std::set<std::string> enabled;
    std::set<unsigned> pTokens;
    std::set<ElementIndex> pRunning;
    std::set<unsigned> sTokens;
};

// W pending in P is edge 3, U pending in S is edge 3, K pending is edge 6.
const std::set<std::string> kWU = {"P/4", "S/5"};

std::vector<Cell> expectedCells() {
    std::vector<Cell> cells;
    for (auto t : {EventTrigger::Error, EventTrigger::Escalation, EventTrigger::Signal}) {
        cells.push_back({t, Column::BoundaryInt, {"P/4", "P/8"}, {3, 6}, {}, {}});
        cells.push_back({t, Column::BoundaryNonInt, {"P/4", "P/8", "S/5"}, {3, 6}, {kS}, {3}});
        cells.push_back({t, Column::EspInt, {"E/2"}, {}, {kEsp}, {}});
        cells.push_back({t, Column::EspNonInt, {"P/4", "S/5", "E/2"}, {3}, {kS, kEsp}, {3}});
    }
    // Uncaught: an error kills the whole case at the root; escalations are
    // dropped at the root; a signal with no catcher does nothing.
    cells.push_back({EventTrigger::Error, Column::Uncaught, {}, {}, {}, {}});
    cells.push_back({EventTrigger::Escalation, Column::Uncaught, kWU, {3}, {kS}, {3}});
    cells.push_back({EventTrigger::Signal, Column::Uncaught, kWU, {3}, {kS}, {3}});

    // Terminate ends S at once, which then completes normally; message and
    // none ends only notify once S has no work left. None of them is caught.
    for (auto col : {Column::BoundaryInt, Column::BoundaryNonInt, Column::EspInt, Column::EspNonInt,
                     Column::Uncaught}) {
        cells.push_back({EventTrigger::Terminate, col, {"P/4"}, {3}, {}, {}});
        cells.push_back({EventTrigger::Message, col, kWU, {3}, {kS}, {3}});
        cells.push_back({EventTrigger::None, col, kWU, {3}, {kS}, {3}});
    }
    return cells;
}

const char* name(Column c) {
    switch (c) {
        case Column::BoundaryInt: return "boundary-interrupting";
        case Column::BoundaryNonInt: return "boundary-non-interrupting";
        case Column::EspInt: return "event-subprocess-interrupting";
        case Column::EspNonInt: return "event-subprocess-non-interrupting";
        case Column::Uncaught: return "uncaught";
    }
    return "";
}

std::unique_ptr<Fixture> setUp(EventTrigger t, Column col, const std::string& thrown = "C",
                               const std::string& caught = "C") {
    auto f = std::make_unique<Fixture>();
    f->built = builder::deploy(f->rt, procs(t, col, thrown, caught), "P");
    f->root = f->rt.startCase(f->built.rootFlow, "alice");
    return f;
}

}  // namespace

TEST_CASE("event propagation matrix") {
    auto cells = expectedCells();
    REQUIRE(cells.size() == 30);
    for (const auto& cell : cells) {
        std::string label = std::string(toString(cell.trigger)) + " x " + name(cell.col);
        CAPTURE(label);
        // Only codes matter for error/escalation; everything else is thrown code-less.
        bool coded = cell.trigger == EventTrigger::Error || cell.trigger == EventTrigger::Escalation;
        auto f = setUp(cell.trigger, cell.col, coded ? "C" : "", coded ? "C" : "");

        Observed before = observe(*f);
        CHECK(before.enabled == std::set<std::string>{"P/4", "S/3", "S/5"});

        auto s = childS(*f);
        auto sent = messagesSent(f->ledger);
        f->rt.checkIn(s, kT, {}, "alice");

        Observed expected{cell.enabled, cell.pTokens, cell.pRunning, cell.sTokens};
        Observed got = observe(*f);
        INFO("got      " << show(got));
        INFO("expected " << show(expected));
        CHECK(got == expected);
        CHECK(messagesSent(f->ledger) - sent == (cell.trigger == EventTrigger::Message ? 1u : 0u));
    }
}

TEST_CASE("message and none ends notify the parent once the child has no work left") {
    for (auto t : {EventTrigger::Message, EventTrigger::None}) {
        auto f = setUp(t, Column::Uncaught, "", "");
        auto s = childS(*f);
        f->rt.checkIn(s, kT, {}, "alice");
        f->rt.checkIn(s, kU, {}, "alice");
        auto o = observe(*f);
        CHECK(o.enabled == std::set<std::string>{"P/4"});
        CHECK(o.pRunning.empty());
        CHECK(o.pTokens == std::set<unsigned>{3});
        f->rt.checkIn(f->root, kW, {}, "alice");
        CHECK(f->rt.inspect(f->root).state.isCompleted());
    }
}

TEST_CASE("error codes must match unless the catcher has none") {
    SUBCASE("mismatch falls through to the root and kills the case") {
        auto f = setUp(EventTrigger::Error, Column::BoundaryInt, "C", "OTHER");
        f->rt.checkIn(childS(*f), kT, {}, "alice");
        auto v = f->rt.inspect(f->root);
        CHECK(v.state.isCompleted());
        CHECK(enabledTasks(v).empty());
    }
    SUBCASE("code-less boundary catches every error") {
        auto f = setUp(EventTrigger::Error, Column::BoundaryInt, "C", "");
        f->rt.checkIn(childS(*f), kT, {}, "alice");
        CHECK(observe(*f).enabled == std::set<std::string>{"P/4", "P/8"});
    }
    SUBCASE("escalation mismatch is dropped at the root") {
        auto f = setUp(EventTrigger::Escalation, Column::EspInt, "C", "OTHER");
        f->rt.checkIn(childS(*f), kT, {}, "alice");
        CHECK(observe(*f).enabled == kWU);
    }
}

TEST_CASE("a fired boundary continues the parent and the case can complete") {
    auto f = setUp(EventTrigger::Error, Column::BoundaryInt);
    f->rt.checkIn(childS(*f), kT, {}, "alice");
    f->rt.checkIn(f->root, kK, {}, "alice");
    f->rt.checkIn(f->root, kW, {}, "alice");
    CHECK(f->rt.inspect(f->root).state.isCompleted());
}

TEST_CASE("an interrupting event sub-process completes its parent when done") {
    auto f = setUp(EventTrigger::Error, Column::EspInt);
    f->rt.checkIn(childS(*f), kT, {}, "alice");
    Address esp;
    for (const auto& c : f->rt.inspect(f->root).children)
        if (c.indexInParent == kEsp) esp = c.address;
    REQUIRE_FALSE(esp.isZero());
    f->rt.checkIn(esp, 2, {}, "alice");
    CHECK(f->rt.inspect(f->root).state.isCompleted());
}
