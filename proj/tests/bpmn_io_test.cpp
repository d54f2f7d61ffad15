#include <doctest.h>

#include <filesystem>
#include <regex>
#include <sstream>

#include <unistd.h>

#include "chainflow/bpmn_io.hpp"
#include "chainflow/codec.hpp"
#include "support/builder.hpp"
#include "support/harness.hpp"

using namespace chainflow;
using namespace chainflow::bpmn;

namespace {

const std::string kHead = R"(<?xml version="1.0" encoding="UTF-8"?>
<bpmn:definitions xmlns:bpmn="http://www.omg.org/spec/BPMN/20100524/MODEL" id="D">
)";

std::string process(const std::string& body, const std::string& vars = "") {
    return kHead + "<bpmn:process id=\"P\" isExecutable=\"true\">\n" +
           (vars.empty() ? "" : "<bpmn:documentation>" + vars + "</bpmn:documentation>\n") + body +
           "</bpmn:process>\n</bpmn:definitions>\n";
}

std::string errorCode(const std::string& xml) {
    try {
        parse(xml);
    } catch (const ParseError& e) {
        return e.code();
    }
    return "";
}

std::string chainBody(std::size_t tasks) {
    std::ostringstream o;
    o << "<bpmn:startEvent id=\"s\"/>\n";
    for (std::size_t i = 1; i <= tasks; ++i) o << "<bpmn:userTask id=\"t" << i << "\"/>\n";
    o << "<bpmn:endEvent id=\"e\"/>\n";
    std::string prev = "s";
    for (std::size_t i = 1; i <= tasks + 1; ++i) {
        std::string next = i <= tasks ? "t" + std::to_string(i) : "e";
        o << "<bpmn:sequenceFlow id=\"f" << i << "\" sourceRef=\"" << prev << "\" targetRef=\"" << next << "\"/>\n";
        prev = next;
    }
    return o.str();
}

std::string fig1() { return harness::fixture("fig1.bpmn"); }

}  // namespace

TEST_CASE("Fig.1 parses into three numbered processes") {
    auto m = parse(fig1());
    REQUIRE(m.processes.size() == 3);
    const auto& root = m.root();
    CHECK(root.id == "Root");
    CHECK(root.elements.size() == 11);
    CHECK(root.edges.size() == 10);

    const std::vector<std::string> order = {"E1", "T1", "G1", "T2", "T3", "G2", "B7", "S1", "E2", "S2", "E3"};
    for (std::size_t i = 0; i < order.size(); ++i) CHECK(root.elementIndex.at(order[i]) == i + 1);
    for (unsigned i = 1; i <= 10; ++i) CHECK(root.edgeIndex.at("f" + std::to_string(i)) == i);

    const auto* b7 = root.element("B7");
    CHECK(b7->attachedTo == 8);
    CHECK(b7->eventCode == "REJECT");
    CHECK(b7->evtCode == builder::code("REJECT"));
    CHECK(b7->typeInfo.isBoundaryEvent());
    CHECK(m.processes[static_cast<std::size_t>(root.element("S1")->childProcess)].id == "Review");
    CHECK(m.processes[static_cast<std::size_t>(root.element("S2")->childProcess)].id == "Recovery");

    CHECK(root.element("E1")->preC.test(kInitEdge));
    CHECK(root.element("G1")->postC.indexes() == std::vector<unsigned>{3, 4});
    CHECK(root.element("G2")->preC.indexes() == std::vector<unsigned>{5, 6});
    CHECK(root.element("G2")->typeInfo.isJoin());

    const auto& t = root.tmpl;
    CHECK(t.variables.size() == 2);
    CHECK(t.gateways.at(3).defaultEdge == 4u);
    REQUIRE(t.gateways.at(3).guards.size() == 1);
    CHECK(t.gateways.at(3).guards[0] == std::pair<unsigned, std::string>{3, "t1Field"});
    CHECK(t.scripts.at(5) == "t2Field = !t1Field;");
    CHECK(t.checkIns.at(4).imports == std::vector<script::VarDecl>{{script::ValueType::Bool, "_t2Field"}});
    CHECK(t.checkOuts.at(4) == std::vector<script::VarDecl>{{script::ValueType::Bool, "t1Field"}});
    CHECK(t.checkIns.at(2).imports == std::vector<script::VarDecl>{{script::ValueType::Bool, "_t1Field"}});
    CHECK(m.roles.empty());
}

TEST_CASE("numbering and hash are deterministic") {
    auto a = parse(fig1());
    auto b = parse(fig1());
    CHECK(a.modelHash == b.modelHash);
    CHECK(a.indexMaps() == b.indexMaps());
    CHECK(a.modelHash == toHex(sha256(a.canonicalXml)));
    CHECK(a.modelHash.size() == 64);

    // Layout whitespace does not change the identity of a model.
    auto squeezed = std::regex_replace(fig1(), std::regex(">\\s+<"), "><");
    CHECK(parse(squeezed).modelHash == a.modelHash);

    auto renamed = std::regex_replace(fig1(), std::regex("name=\"T1\""), "name=\"First\"");
    CHECK(parse(renamed).modelHash != a.modelHash);
}

TEST_CASE("appending elements keeps existing indexes") {
    auto base = parse(fig1());
    auto edited = fig1();
    auto at = edited.find("<bpmn:sequenceFlow id=\"f1\"");
    edited.insert(at, "<bpmn:userTask id=\"T9\"/>\n");
    at = edited.find("</bpmn:process>");
    edited.insert(at, "<bpmn:sequenceFlow id=\"f11\" sourceRef=\"T9\" targetRef=\"E3\"/>\n");
    auto m = parse(edited);
    for (const auto& [id, e] : base.root().elementIndex) CHECK(m.root().elementIndex.at(id) == e);
    for (const auto& [id, e] : base.root().edgeIndex) CHECK(m.root().edgeIndex.at(id) == e);
    CHECK(m.root().elementIndex.at("T9") == 12);
    CHECK(m.root().edgeIndex.at("f11") == 11);
}

TEST_CASE("parse errors carry a code") {
    CHECK(errorCode("<not xml") == "MALFORMED");
    CHECK(errorCode(kHead + "</bpmn:definitions>") == "MALFORMED");
    CHECK(errorCode(process("<bpmn:startEvent id=\"s\"/><bpmn:sequenceFlow id=\"f\" sourceRef=\"s\" targetRef=\"x\"/>")) ==
          "MALFORMED");
    CHECK(errorCode(process("<bpmn:startEvent id=\"s\"/><bpmn:userTask id=\"s\"/>")) == "MALFORMED");

    CHECK(errorCode(process("<bpmn:startEvent id=\"s\"><bpmn:timerEventDefinition/></bpmn:startEvent>")) ==
          "UNSUPPORTED");
    CHECK(errorCode(process("<bpmn:startEvent id=\"s\"/><bpmn:sendTask id=\"x\"/>")) == "UNSUPPORTED");
    CHECK(errorCode(process("<bpmn:startEvent id=\"s\"/><bpmn:eventBasedGateway id=\"x\"/>")) == "UNSUPPORTED");
    CHECK(errorCode(process("<bpmn:startEvent id=\"s\"/><bpmn:userTask id=\"x\"><bpmn:standardLoopCharacteristics/>"
                            "</bpmn:userTask>")) == "UNSUPPORTED");
    CHECK(errorCode(process(R"(<bpmn:startEvent id="s1"/><bpmn:startEvent id="s2"/>
<bpmn:parallelGateway id="g"/><bpmn:endEvent id="e1"/><bpmn:endEvent id="e2"/>
<bpmn:sequenceFlow id="a" sourceRef="s1" targetRef="g"/><bpmn:sequenceFlow id="b" sourceRef="s2" targetRef="g"/>
<bpmn:sequenceFlow id="c" sourceRef="g" targetRef="e1"/><bpmn:sequenceFlow id="d" sourceRef="g" targetRef="e2"/>)")) ==
          "UNSUPPORTED");

    CHECK(errorCode(process("<bpmn:startEvent id=\"s\"/><bpmn:userTask id=\"t\"><bpmn:documentation>(bool x : "
                            "</bpmn:documentation></bpmn:userTask>",
                            "bool x;")) == "ANNOTATION");
    CHECK(errorCode(process("<bpmn:startEvent id=\"s\"/><bpmn:scriptTask id=\"t\"><bpmn:script>y = true;</bpmn:script>"
                            "</bpmn:scriptTask>",
                            "bool x;")) == "SCOPE");
}

TEST_CASE("element limit") {
    // start + end + tasks
    CHECK(errorCode(process(chainBody(253))).empty());
    CHECK(errorCode(process(chainBody(254))) == "TOO_LARGE");
}

TEST_CASE("roles come from task documentation") {
    auto m = parse(process(R"(<bpmn:startEvent id="s"/>
<bpmn:userTask id="a"><bpmn:documentation>role:clerk</bpmn:documentation></bpmn:userTask>
<bpmn:userTask id="b"><bpmn:documentation>role: boss
() : (bool _y) -> {y = _y;}</bpmn:documentation></bpmn:userTask>
<bpmn:endEvent id="e"/>
<bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="a"/>
<bpmn:sequenceFlow id="f2" sourceRef="a" targetRef="b"/>
<bpmn:sequenceFlow id="f3" sourceRef="b" targetRef="e"/>)",
                           "bool y;"));
    CHECK(m.root().element("a")->role == "clerk");
    CHECK(m.root().element("b")->role == "boss");
    CHECK(m.roles == std::vector<std::string>{"boss", "clerk"});
    CHECK(m.root().tmpl.checkIns.at(3).imports.size() == 1);
}

TEST_CASE("multi-instance cardinality") {
    auto m = parse(process(R"(<bpmn:startEvent id="s"/>
<bpmn:subProcess id="sp"><bpmn:multiInstanceLoopCharacteristics isSequential="true"><bpmn:loopCardinality>3</bpmn:loopCardinality></bpmn:multiInstanceLoopCharacteristics>
<bpmn:startEvent id="is"/><bpmn:userTask id="it"/><bpmn:endEvent id="ie"/>
<bpmn:sequenceFlow id="g1" sourceRef="is" targetRef="it"/><bpmn:sequenceFlow id="g2" sourceRef="it" targetRef="ie"/>
</bpmn:subProcess>
<bpmn:endEvent id="e"/>
<bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="sp"/>
<bpmn:sequenceFlow id="f2" sourceRef="sp" targetRef="e"/>)"));
    const auto* sp = m.root().element("sp");
    CHECK(sp->countInst == 3);
    CHECK(sp->typeInfo.isSequentialMultiInstance());
    CHECK(m.processes.size() == 2);
}

TEST_CASE("registration plan shape") {
    auto m = parse(fig1());
    auto plan = emitRegistrationPlan(m);
    const auto s1 = m.process("Review")->elements.size();
    const auto s2 = m.process("Recovery")->elements.size();
    CHECK(s1 == 5);
    CHECK(s2 == 3);
    CHECK(plan.count("deployFlowNode") == 3);
    CHECK(plan.count("deployFactory") == 3);
    CHECK(plan.count("deployAccessControl") == 1);
    CHECK(plan.count("setElement") == 11 + s1 + s2);
    CHECK(plan.count("linkSubprocess") == 2);
    CHECK(plan.count("setFactory") == 3);
    CHECK(plan.rootRef == "flow:Root");
    CHECK(plan.modelHash == m.modelHash);

    auto back = RegistrationPlan::fromJson(plan.toJson());
    CHECK(back.steps == plan.steps);
    CHECK(back.modelHash == plan.modelHash);

    auto single = emitRegistrationPlan(parse(process(chainBody(1))));
    CHECK(single.count("deployFlowNode") == 1);
    CHECK(single.count("setElement") == 3);
    CHECK(single.count("linkSubprocess") == 0);
}

namespace {

void checkAgainstParse(Ledger& ledger, const ParsedModel& m, const Deployment& d) {
    AccountInvoker view(ledger, "reader", AccountInvoker::Mode::View);
    for (const auto& p : m.processes) {
        CAPTURE(p.id);
        FlowNodeRef flow(view, d.refs.at("flow:" + p.id));
        std::vector<ElementIndex> catching;
        for (const auto& e : p.elements) {
            CAPTURE(e.id);
            auto r = flow.find(e.eInd);
            CHECK(r.preC == e.preC);
            CHECK(r.postC == e.postC);
            CHECK(r.typeInfo == e.typeInfo);
            CHECK(flow.getEvtCode(e.eInd) == e.evtCode);
            CHECK(flow.getAttachedTo(e.eInd) == e.attachedTo);
            if (e.typeInfo.isCatching()) catching.push_back(e.eInd);
            if (e.childProcess >= 0) {
                const auto& child = m.processes[static_cast<std::size_t>(e.childProcess)];
                CHECK(flow.getChildFlow(e.eInd) == d.refs.at("flow:" + child.id));
                CHECK(flow.getFactory(e.eInd) == d.refs.at("factory:" + child.id));
            }
        }
        CHECK(flow.getEventList() == catching);
        CHECK(flow.elementIndexes().size() == p.elements.size());
    }
}

}  // namespace

TEST_CASE("registered flow nodes answer with the parsed relation") {
    auto m = parse(fig1());
    auto plan = emitRegistrationPlan(m);
    Ledger ledger;
    Runtime rt(ledger);
    auto interp = rt.ensureInterpreter();
    auto d = executePlan(ledger, "admin", interp, plan);
    CHECK(d.rootFlow == d.refs.at("flow:Root"));
    checkAgainstParse(ledger, m, d);

    SUBCASE("replaying over the deployment deploys nothing new") {
        auto before = ledger.instancesOfKind(FlowNode::kKind).size();
        auto again = executePlan(ledger, "admin", interp, plan, d.refs);
        CHECK(ledger.instancesOfKind(FlowNode::kKind).size() == before);
        for (const auto& r : again.receipts)
            if (r.op.starts_with("deploy")) CHECK(r.skipped);
        CHECK(again.refs == d.refs);
        checkAgainstParse(ledger, m, again);
    }
    SUBCASE("deployment record round trip") {
        auto back = Deployment::fromJson(d.toJson());
        CHECK(back.refs == d.refs);
        CHECK(back.rootFlow == d.rootFlow);
        CHECK(back.receipts.size() == d.receipts.size());
        CHECK(back.cost("setElement") == d.cost("setElement"));
    }
    SUBCASE("a non-admin cannot replay") {
        CHECK_THROWS_AS(executePlan(ledger, "mallory", interp, plan, d.refs), Revert);
    }
}

TEST_CASE("template json round trip") {
    for (const auto& p : parse(fig1()).processes) {
        auto back = templateFromJson(templateToJson(p.tmpl));
        CHECK(back.encode() == p.tmpl.encode());
    }
}

TEST_CASE("repository persists models and deployments") {
    auto dir = std::filesystem::temp_directory_path() / ("chainflow-repo-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::string hash;
    {
        ProcessRepository repo(dir);
        const auto& e = repo.add(fig1());
        hash = e.modelHash;
        CHECK(&repo.add(fig1()) == &e);
        CHECK(repo.hashes().size() == 1);
        Deployment d;
        d.modelHash = hash;
        d.refs["flow:Root"] = Ledger::accountAddress("x");
        d.rootFlow = d.refs["flow:Root"];
        repo.setDeployment(hash, d);
        CHECK_THROWS(repo.setDeployment("nope", d));
    }
    CHECK(std::filesystem::exists(dir / hash / "model.bpmn"));
    CHECK(std::filesystem::exists(dir / hash / "plan.json"));
    {
        ProcessRepository repo(dir);
        const auto* e = repo.find(hash);
        REQUIRE(e);
        CHECK(e->name == "Fig1");
        REQUIRE(e->deployment);
        CHECK(e->deployment->rootFlow == Ledger::accountAddress("x"));
        CHECK(e->plan.steps == emitRegistrationPlan(parse(fig1())).steps);
        CHECK(repo.find("missing") == nullptr);
    }
    std::filesystem::remove_all(dir);
}
