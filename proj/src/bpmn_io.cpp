#include "chainflow/bpmn_io.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "chainflow/access_control.hpp"
#include "chainflow/invoker.hpp"

namespace chainflow::bpmn {

namespace pt = boost::property_tree;
using nlohmann::json;

namespace {

std::string localName(const std::string& tag) {
    auto p = tag.find(':');
    return p == std::string::npos ? tag : tag.substr(p + 1);
}

std::string attr(const pt::ptree& n, const std::string& name, const std::string& def = "") {
    if (auto a = n.get_child_optional("<xmlattr>")) {
        for (const auto& [k, v] : *a)
            if (k == name || localName(k) == name) return v.data();
    }
    return def;
}

std::string trimmed(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

/// Text of the first <documentation> child, or empty.
std::string documentation(const pt::ptree& n) {
    for (const auto& [k, v] : n)
        if (localName(k) == "documentation") return trimmed(v.data());
    return {};
}

const pt::ptree* child(const pt::ptree& n, const std::string& local) {
    for (const auto& [k, v] : n)
        if (localName(k) == local) return &v;
    return nullptr;
}

std::string hexOf(const Bits256& b) { return b.toHex(); }

const std::set<std::string> kIgnoredTags = {
    "<xmlattr>",       "<xmlcomment>",    "documentation",   "extensionElements", "incoming",
    "outgoing",        "laneSet",         "dataObject",      "dataObjectReference", "dataStoreReference",
    "textAnnotation",  "association",     "ioSpecification", "dataInputAssociation", "dataOutputAssociation",
    "property",        "multiInstanceLoopCharacteristics", "script", "conditionExpression", "group",
};

const std::set<std::string> kUnsupportedTags = {
    "eventBasedGateway", "complexGateway", "sendTask", "receiveTask", "manualTask", "businessRuleTask",
    "transaction", "adHocSubProcess", "standardLoopCharacteristics",
};

struct EventCatalog {
    std::map<std::string, std::string> errors, messages, signals, escalations;
};

/// Element read from XML before indexes exist.
struct RawElement {
    const pt::ptree* node = nullptr;
    std::string tag;
    std::string id;
    ParsedElement parsed;
    std::string attachedToId;
    bool espProxy = false;
    std::string proxyOf;  // ESP element id for proxies
};

class Parser {
public:
    explicit Parser(std::string_view xml) {
        std::istringstream in{std::string(xml)};
        try {
            pt::read_xml(in, tree_);
        } catch (const pt::xml_parser_error& e) {
            throw ParseError("MALFORMED", "", e.what());
        }
        for (const auto& [k, v] : tree_)
            if (localName(k) == "definitions") defs_ = &v;
        if (!defs_) throw ParseError("MALFORMED", "", "no <definitions> element");
        for (const auto& [k, v] : *defs_) {
            auto t = localName(k);
            auto id = attr(v, "id");
            auto name = attr(v, "name");
            if (t == "error") catalog_.errors[id] = attr(v, "errorCode", name.empty() ? id : name);
            if (t == "message") catalog_.messages[id] = name.empty() ? id : name;
            if (t == "signal") catalog_.signals[id] = name.empty() ? id : name;
            if (t == "escalation") catalog_.escalations[id] = attr(v, "escalationCode", name.empty() ? id : name);
            if (t == "process") topLevel_[id] = &v;
        }
        if (topLevel_.empty()) throw ParseError("MALFORMED", "", "no <process> element");
    }

    ParsedModel run() {
        // Root: the executable process not called by any other, else the first.
        std::set<std::string> called;
        collectCalled(*defs_, called);
        std::string rootId;
        for (const auto& [k, v] : *defs_) {
            if (localName(k) != "process") continue;
            auto id = attr(v, "id");
            if (rootId.empty()) rootId = id;
            if (!called.count(id) && attr(v, "isExecutable", "true") != "false") {
                rootId = id;
                break;
            }
        }
        model_.processes.reserve(16);
        parseScope(*topLevel_.at(rootId), rootId, attr(*topLevel_.at(rootId), "name"));
        model_.roles.assign(roles_.begin(), roles_.end());
        return std::move(model_);
    }

private:
    void collectCalled(const pt::ptree& n, std::set<std::string>& out) {
        for (const auto& [k, v] : n) {
            if (localName(k) == "callActivity") out.insert(attr(v, "calledElement"));
            if (k != "<xmlattr>") collectCalled(v, out);
        }
    }

    std::pair<EventTrigger, std::string> trigger(const pt::ptree& n, const std::string& id) {
        std::vector<std::pair<std::string, const pt::ptree*>> defs;
        for (const auto& [k, v] : n) {
            auto t = localName(k);
            if (t.size() > 15 && t.ends_with("EventDefinition")) defs.emplace_back(t, &v);
        }
        if (defs.empty()) return {EventTrigger::None, ""};
        if (defs.size() > 1) throw ParseError("UNSUPPORTED", id, "multiple event definitions");
        const auto& [t, d] = defs.front();
        auto lookup = [&](const std::map<std::string, std::string>& m, const char* ref) {
            auto r = attr(*d, ref);
            if (r.empty()) return std::string();
            auto it = m.find(r);
            return it == m.end() ? r : it->second;
        };
        if (t == "messageEventDefinition") return {EventTrigger::Message, lookup(catalog_.messages, "messageRef")};
        if (t == "errorEventDefinition") return {EventTrigger::Error, lookup(catalog_.errors, "errorRef")};
        if (t == "signalEventDefinition") return {EventTrigger::Signal, lookup(catalog_.signals, "signalRef")};
        if (t == "escalationEventDefinition")
            return {EventTrigger::Escalation, lookup(catalog_.escalations, "escalationRef")};
        if (t == "terminateEventDefinition") return {EventTrigger::Terminate, ""};
        throw ParseError("UNSUPPORTED", id, t);
    }

    static void setEvent(ParsedElement& p, EventTrigger trig, const std::string& code, EventPosition pos, bool throwing,
                         bool interrupting) {
        p.kind.category = Category::Event;
        p.kind.trigger = trig;
        p.kind.position = pos;
        p.kind.throwing = throwing;
        p.kind.interrupting = interrupting;
        p.eventCode = code;
        if (!code.empty()) p.evtCode = sha256(code);
    }

    /// Reads multi-instance markers of a sub-process or call activity.
    void multiInstance(const pt::ptree& n, ParsedElement& p) {
        const auto* mi = child(n, "multiInstanceLoopCharacteristics");
        if (!mi) return;
        p.kind.multi = attr(*mi, "isSequential") == "true" ? MultiInstance::Sequential : MultiInstance::Parallel;
        const auto* card = child(*mi, "loopCardinality");
        if (!card) throw ParseError("UNSUPPORTED", p.id, "multi-instance without loopCardinality");
        try {
            auto v = std::stoll(trimmed(card->data()));
            if (v < 0 || v > 0xFFFF) throw std::out_of_range("cardinality");
            p.countInst = static_cast<std::uint32_t>(v);
        } catch (const std::logic_error&) {
            throw ParseError("UNSUPPORTED", p.id, "loopCardinality must be an integer constant");
        }
    }

    int parseScope(const pt::ptree& scope, const std::string& id, const std::string& name) {
        int self = static_cast<int>(model_.processes.size());
        model_.processes.emplace_back();
        inProgress_.insert(id);
        {
            auto& proc = model_.processes[self];
            proc.id = id;
            proc.name = name.empty() ? id : name;
            proc.tmpl.name = proc.name;
            try {
                proc.variables = script::parseDeclarations(documentation(scope));
            } catch (const script::CompileError& e) {
                throw ParseError("ANNOTATION", id, e.what());
            }
            proc.tmpl.variables = proc.variables;
        }

        std::vector<RawElement> raw;
        std::vector<ParsedEdge> edges;
        std::map<std::string, std::string> defaultFlow;  // gateway id -> flow id
        for (const auto& [k, v] : scope) {
            auto tag = localName(k);
            if (kIgnoredTags.count(tag)) continue;
            auto eid = attr(v, "id");
            if (tag == "sequenceFlow") {
                ParsedEdge e;
                e.id = eid;
                e.source = attr(v, "sourceRef");
                e.target = attr(v, "targetRef");
                if (const auto* c = child(v, "conditionExpression"))
                    e.guard = trimmed(c->data());
                else
                    e.guard = documentation(v);
                edges.push_back(std::move(e));
                continue;
            }
            if (kUnsupportedTags.count(tag)) throw ParseError("UNSUPPORTED", eid, tag);
            if (child(v, "standardLoopCharacteristics")) throw ParseError("UNSUPPORTED", eid, "loop marker");

            RawElement r;
            r.node = &v;
            r.tag = tag;
            r.id = eid;
            auto& p = r.parsed;
            p.id = eid;
            p.name = attr(v, "name");
            p.tag = tag;
            if (eid.empty()) throw ParseError("MALFORMED", "", tag + " without id");

            if (tag == "startEvent") {
                auto [trig, code] = trigger(v, eid);
                setEvent(p, trig, code, EventPosition::Start, false, false);
            } else if (tag == "endEvent") {
                auto [trig, code] = trigger(v, eid);
                setEvent(p, trig, code, EventPosition::End, true, false);
            } else if (tag == "intermediateThrowEvent" || tag == "intermediateCatchEvent") {
                auto [trig, code] = trigger(v, eid);
                if (trig == EventTrigger::Terminate) throw ParseError("UNSUPPORTED", eid, "intermediate terminate");
                setEvent(p, trig, code, EventPosition::Intermediate, tag == "intermediateThrowEvent", false);
            } else if (tag == "boundaryEvent") {
                auto [trig, code] = trigger(v, eid);
                if (trig == EventTrigger::None || trig == EventTrigger::Terminate)
                    throw ParseError("UNSUPPORTED", eid, "boundary event without a supported trigger");
                setEvent(p, trig, code, EventPosition::Boundary, false, attr(v, "cancelActivity", "true") != "false");
                r.attachedToId = attr(v, "attachedToRef");
            } else if (tag == "task" || tag == "userTask" || tag == "scriptTask" || tag == "serviceTask") {
                if (child(v, "multiInstanceLoopCharacteristics"))
                    throw ParseError("UNSUPPORTED", eid, "multi-instance is supported on sub-processes only");
                p.kind.category = Category::Activity;
                p.kind.activity = tag == "userTask"     ? ActivityKind::UserTask
                                  : tag == "scriptTask" ? ActivityKind::ScriptTask
                                  : tag == "serviceTask" ? ActivityKind::ServiceTask
                                                         : ActivityKind::NoneTask;
            } else if (tag == "subProcess" || tag == "callActivity") {
                p.kind.category = Category::Activity;
                if (tag == "subProcess" && attr(v, "triggeredByEvent") == "true") {
                    p.kind.activity = ActivityKind::EventSubProcess;
                    if (child(v, "multiInstanceLoopCharacteristics"))
                        throw ParseError("UNSUPPORTED", eid, "multi-instance event sub-process");
                } else {
                    p.kind.activity = tag == "subProcess" ? ActivityKind::SubProcess : ActivityKind::CallActivity;
                    multiInstance(v, p);
                }
            } else if (tag == "exclusiveGateway" || tag == "parallelGateway" || tag == "inclusiveGateway") {
                p.kind.category = Category::Gateway;
                p.kind.gateway = tag == "exclusiveGateway"   ? GatewayKind::Exclusive
                                 : tag == "parallelGateway" ? GatewayKind::Parallel
                                                            : GatewayKind::Inclusive;
                auto d = attr(v, "default");
                if (!d.empty()) defaultFlow[eid] = d;
            } else {
                throw ParseError("UNSUPPORTED", eid, tag);
            }
            raw.push_back(std::move(r));

            // An event sub-process is started from its parent through a
            // catching proxy placed right after it.
            if (raw.back().parsed.kind.activity == ActivityKind::EventSubProcess &&
                raw.back().parsed.kind.category == Category::Activity) {
                const pt::ptree* start = nullptr;
                std::string startId;
                for (const auto& [ck, cv] : v)
                    if (localName(ck) == "startEvent") {
                        if (start) throw ParseError("UNSUPPORTED", eid, "event sub-process with several starts");
                        start = &cv;
                        startId = attr(cv, "id");
                    }
                if (!start) throw ParseError("MALFORMED", eid, "event sub-process without start event");
                auto [trig, code] = trigger(*start, startId);
                if (trig == EventTrigger::None || trig == EventTrigger::Terminate)
                    throw ParseError("UNSUPPORTED", startId, "event sub-process start needs a trigger");
                RawElement proxy;
                proxy.id = startId + "#start";
                proxy.tag = "startEvent";
                proxy.espProxy = true;
                proxy.proxyOf = eid;
                proxy.parsed.id = proxy.id;
                proxy.parsed.name = attr(*start, "name");
                proxy.parsed.tag = "startEvent";
                setEvent(proxy.parsed, trig, code, EventPosition::EventSubProcessStart, false,
                         attr(*start, "isInterrupting", "true") != "false");
                raw.push_back(std::move(proxy));
            }
        }

        // Indexes in document order.
        auto& proc0 = model_.processes[self];
        if (raw.size() > kMaxElementIndex) throw ParseError("TOO_LARGE", id, "more than 255 elements");
        if (edges.size() > Bits256::kWidth - 1) throw ParseError("TOO_LARGE", id, "more than 255 sequence flows");
        for (std::size_t i = 0; i < raw.size(); ++i) {
            raw[i].parsed.eInd = static_cast<ElementIndex>(i + 1);
            if (!proc0.elementIndex.emplace(raw[i].id, raw[i].parsed.eInd).second)
                throw ParseError("MALFORMED", raw[i].id, "duplicate id");
        }
        for (std::size_t i = 0; i < edges.size(); ++i) {
            edges[i].index = static_cast<unsigned>(i + 1);
            proc0.edgeIndex[edges[i].id] = edges[i].index;
        }

        std::map<std::string, RawElement*> byId;
        for (auto& r : raw) byId[r.id] = &r;
        std::map<std::string, int> incoming;
        for (const auto& e : edges) {
            auto s = byId.find(e.source);
            auto t = byId.find(e.target);
            if (s == byId.end() || t == byId.end()) throw ParseError("MALFORMED", e.id, "dangling sequence flow");
            s->second->parsed.postC.set(e.index);
            t->second->parsed.preC.set(e.index);
            ++incoming[e.target];
        }

        for (auto& r : raw) {
            auto& p = r.parsed;
            if (p.kind.category == Category::Event && p.kind.position == EventPosition::Start) p.preC.set(kInitEdge);
            if (p.kind.category == Category::Gateway) {
                int in = incoming[r.id];
                int out = static_cast<int>(p.postC.count());
                if (in > 1 && out > 1) throw ParseError("UNSUPPORTED", r.id, "mixed gateway");
                p.kind.join = in > 1;
            }
            if (!r.attachedToId.empty()) {
                auto it = byId.find(r.attachedToId);
                if (it == byId.end() || it->second->parsed.kind.category != Category::Activity ||
                    !(it->second->tag == "subProcess" || it->second->tag == "callActivity") ||
                    it->second->parsed.kind.activity == ActivityKind::EventSubProcess)
                    throw ParseError("UNSUPPORTED", r.id, "boundary events attach to sub-processes only");
                p.attachedTo = it->second->parsed.eInd;
            }
            if (r.espProxy) p.attachedTo = byId.at(r.proxyOf)->parsed.eInd;
            p.typeInfo = TypeInfo::encode(p.kind);
        }

        // Data: scripts, gateway guards, check-in/out tables.
        DataTemplateSource tmpl = proc0.tmpl;
        std::map<ElementIndex, std::string> idOf;
        for (auto& r : raw) {
            auto& p = r.parsed;
            idOf[p.eInd] = p.id;
            if (r.espProxy) continue;
            const auto& n = *r.node;
            if (r.tag == "scriptTask") {
                const auto* s = child(n, "script");
                tmpl.scripts[p.eInd] = s ? trimmed(s->data()) : documentation(n);
            } else if (r.tag == "userTask" || r.tag == "serviceTask") {
                std::istringstream lines(documentation(n));
                std::string line, rest;
                static const std::regex roleLine(R"(^\s*role\s*:\s*([A-Za-z_][A-Za-z0-9_.-]*)\s*$)");
                std::smatch m;
                while (std::getline(lines, line)) {
                    if (std::regex_match(line, m, roleLine))
                        p.role = m[1];
                    else
                        rest += line + "\n";
                }
                DataTemplateSource::CheckIn ci;
                if (!trimmed(rest).empty()) {
                    try {
                        auto a = script::parseAnnotation(trimmed(rest));
                        ci.imports = a.imports;
                        ci.operations = a.body;
                        if (!a.exports.empty()) tmpl.checkOuts[p.eInd] = a.exports;
                    } catch (const script::CompileError& e) {
                        throw ParseError("ANNOTATION", p.id, e.what());
                    }
                }
                tmpl.checkIns[p.eInd] = std::move(ci);
                if (!p.role.empty()) roles_.insert(p.role);
            } else if (p.kind.category == Category::Event && p.kind.position == EventPosition::Intermediate &&
                       !p.kind.throwing && p.kind.trigger != EventTrigger::Signal) {
                tmpl.checkIns[p.eInd] = {};
            } else if (p.kind.category == Category::Gateway && !p.kind.join &&
                       p.kind.gateway != GatewayKind::Parallel) {
                DataTemplateSource::Gateway g;
                g.inclusive = p.kind.gateway == GatewayKind::Inclusive;
                auto def = defaultFlow.find(r.id);
                for (const auto& e : edges) {
                    if (e.source != r.id) continue;
                    if (def != defaultFlow.end() && def->second == e.id) {
                        g.defaultEdge = e.index;
                        continue;
                    }
                    g.guards.emplace_back(e.index, e.guard.empty() ? "true" : e.guard);
                }
                if (def != defaultFlow.end() && !g.defaultEdge)
                    throw ParseError("MALFORMED", r.id, "default flow is not an outgoing flow");
                tmpl.gateways[p.eInd] = std::move(g);
            }
        }
        try {
            DataTemplate::compile(tmpl);
        } catch (const script::CompileError& e) {
            std::string msg = e.what();
            std::string where = id;
            static const std::regex at(R"(^element (\d+): )");
            std::smatch m;
            if (std::regex_search(msg, m, at)) where = idOf[static_cast<ElementIndex>(std::stoul(m[1]))];
            auto code = msg.find("undeclared") != std::string::npos || msg.find("not declared") != std::string::npos ||
                                msg.find("cannot assign") != std::string::npos
                            ? "SCOPE"
                            : "ANNOTATION";
            throw ParseError(code, where, msg);
        }

        // Children. Recursion may reallocate processes; re-fetch by index.
        for (auto& r : raw) {
            auto& p = r.parsed;
            if (p.kind.category != Category::Activity) continue;
            if (r.tag == "subProcess") {
                p.childProcess = parseScope(*r.node, r.id, p.name);
            } else if (r.tag == "callActivity") {
                auto called = attr(*r.node, "calledElement");
                auto it = topLevel_.find(called);
                if (it == topLevel_.end()) throw ParseError("MALFORMED", r.id, "unknown calledElement '" + called + "'");
                if (auto done = parsedTop_.find(called); done != parsedTop_.end()) {
                    p.childProcess = done->second;
                } else {
                    if (inProgress_.count(called)) throw ParseError("UNSUPPORTED", r.id, "recursive call activity");
                    p.childProcess = parseScope(*it->second, called, attr(*it->second, "name"));
                    parsedTop_[called] = p.childProcess;
                }
            }
        }

        auto& proc = model_.processes[self];
        proc.tmpl = std::move(tmpl);
        for (auto& r : raw) proc.elements.push_back(std::move(r.parsed));
        proc.edges = std::move(edges);
        inProgress_.erase(id);
        return self;
    }

    pt::ptree tree_;
    const pt::ptree* defs_ = nullptr;
    EventCatalog catalog_;
    std::map<std::string, const pt::ptree*> topLevel_;
    std::map<std::string, int> parsedTop_;
    std::set<std::string> inProgress_;
    std::set<std::string> roles_;
    ParsedModel model_;
};

json declsToJson(const std::vector<script::VarDecl>& decls) {
    json a = json::array();
    for (const auto& d : decls) a.push_back({{"type", std::string(script::typeName(d.type))}, {"name", d.name}});
    return a;
}

std::vector<script::VarDecl> declsFromJson(const json& a) {
    std::vector<script::VarDecl> out;
    for (const auto& d : a) {
        auto t = script::typeFromName(d.at("type").get<std::string>());
        if (!t) throw std::invalid_argument("bad variable type");
        out.push_back({*t, d.at("name").get<std::string>()});
    }
    return out;
}

}  // namespace

const ParsedElement* ParsedProcess::element(const std::string& id) const {
    auto it = elementIndex.find(id);
    return it == elementIndex.end() ? nullptr : element(it->second);
}

const ParsedElement* ParsedProcess::element(ElementIndex e) const {
    if (e == 0 || e > elements.size()) return nullptr;
    return &elements[e - 1];
}

const ParsedProcess* ParsedModel::process(const std::string& id) const {
    for (const auto& p : processes)
        if (p.id == id) return &p;
    return nullptr;
}

json ParsedModel::indexMaps() const {
    json out = json::object();
    for (const auto& p : processes) {
        json elements = json::object(), edges = json::object();
        for (const auto& [id, e] : p.elementIndex) elements[id] = e;
        for (const auto& [id, e] : p.edgeIndex) edges[id] = e;
        out[p.id] = {{"elements", elements}, {"edges", edges}};
    }
    return out;
}

std::string canonicalize(std::string_view xml) {
    pt::ptree tree;
    std::istringstream in{std::string(xml)};
    try {
        pt::read_xml(in, tree, pt::xml_parser::trim_whitespace | pt::xml_parser::no_comments);
    } catch (const pt::xml_parser_error& e) {
        throw ParseError("MALFORMED", "", e.what());
    }
    std::ostringstream out;
    pt::write_xml(out, tree);
    return out.str();
}

ParsedModel parse(std::string_view xml) {
    auto canonical = canonicalize(xml);
    Parser parser(xml);
    auto model = parser.run();
    model.canonicalXml = canonical;
    model.modelHash = toHex(sha256(canonical));
    return model;
}

json templateToJson(const DataTemplateSource& src) {
    json j;
    j["name"] = src.name;
    j["variables"] = declsToJson(src.variables);
    j["scripts"] = json::array();
    for (const auto& [e, s] : src.scripts) j["scripts"].push_back({{"eInd", e}, {"program", s}});
    j["gateways"] = json::array();
    for (const auto& [e, g] : src.gateways) {
        json guards = json::array();
        for (const auto& [edge, text] : g.guards) guards.push_back({{"edge", edge}, {"guard", text}});
        j["gateways"].push_back({{"eInd", e},
                                 {"inclusive", g.inclusive},
                                 {"guards", guards},
                                 {"defaultEdge", g.defaultEdge ? json(*g.defaultEdge) : json(nullptr)}});
    }
    j["checkIns"] = json::array();
    for (const auto& [e, c] : src.checkIns)
        j["checkIns"].push_back({{"eInd", e}, {"imports", declsToJson(c.imports)}, {"operations", c.operations}});
    j["checkOuts"] = json::array();
    for (const auto& [e, d] : src.checkOuts) j["checkOuts"].push_back({{"eInd", e}, {"exports", declsToJson(d)}});
    return j;
}

DataTemplateSource templateFromJson(const json& j) {
    DataTemplateSource s;
    s.name = j.at("name").get<std::string>();
    s.variables = declsFromJson(j.at("variables"));
    for (const auto& x : j.at("scripts")) s.scripts[x.at("eInd").get<ElementIndex>()] = x.at("program");
    for (const auto& x : j.at("gateways")) {
        DataTemplateSource::Gateway g;
        g.inclusive = x.at("inclusive").get<bool>();
        for (const auto& gd : x.at("guards")) g.guards.emplace_back(gd.at("edge").get<unsigned>(), gd.at("guard"));
        if (!x.at("defaultEdge").is_null()) g.defaultEdge = x.at("defaultEdge").get<unsigned>();
        s.gateways[x.at("eInd").get<ElementIndex>()] = std::move(g);
    }
    for (const auto& x : j.at("checkIns"))
        s.checkIns[x.at("eInd").get<ElementIndex>()] = {declsFromJson(x.at("imports")), x.at("operations")};
    for (const auto& x : j.at("checkOuts")) s.checkOuts[x.at("eInd").get<ElementIndex>()] = declsFromJson(x.at("exports"));
    return s;
}

// ---- registration plan ----------------------------------------------------

json RegistrationPlan::toJson() const {
    return {{"version", kVersion}, {"modelHash", modelHash}, {"root", rootRef}, {"steps", steps}};
}

RegistrationPlan RegistrationPlan::fromJson(const json& j) {
    if (j.at("version").get<int>() != kVersion) throw std::invalid_argument("unsupported plan version");
    RegistrationPlan p;
    p.modelHash = j.at("modelHash");
    p.rootRef = j.at("root");
    p.steps = j.at("steps");
    return p;
}

std::size_t RegistrationPlan::count(std::string_view op) const {
    return static_cast<std::size_t>(
        std::count_if(steps.begin(), steps.end(), [&](const json& s) { return s.at("op") == op; }));
}

RegistrationPlan emitRegistrationPlan(const ParsedModel& model) {
    RegistrationPlan plan;
    plan.modelHash = model.modelHash;
    auto flowRef = [&](const ParsedProcess& p) { return "flow:" + p.id; };
    auto factoryRef = [&](const ParsedProcess& p) { return "factory:" + p.id; };
    plan.rootRef = flowRef(model.root());

    for (const auto& p : model.processes) plan.steps.push_back({{"op", "deployFlowNode"}, {"ref", flowRef(p)}});

    json requirements = json::array();
    for (const auto& p : model.processes)
        for (const auto& e : p.elements)
            if (!e.role.empty()) requirements.push_back({{"flow", flowRef(p)}, {"eInd", e.eInd}, {"role", e.role}});
    plan.steps.push_back(
        {{"op", "deployAccessControl"}, {"ref", "access-control"}, {"roles", model.roles}, {"requirements", requirements}});

    for (const auto& p : model.processes)
        plan.steps.push_back({{"op", "deployFactory"}, {"ref", factoryRef(p)}, {"template", templateToJson(p.tmpl)}});

    auto setElement = [&](const ParsedProcess& p, const ParsedElement& e) {
        plan.steps.push_back({{"op", "setElement"},
                              {"flow", flowRef(p)},
                              {"id", e.id},
                              {"eInd", e.eInd},
                              {"preC", hexOf(e.preC)},
                              {"postC", hexOf(e.postC)},
                              {"typeInfo", e.typeInfo.bits()},
                              {"evtCode", toHex(e.evtCode)},
                              {"attachedTo", e.attachedTo == kNoElement ? json(nullptr) : json(e.attachedTo)},
                              {"countInst", e.countInst}});
    };
    for (const auto& p : model.processes) {
        // Attached events reference their sub-process, so they go last.
        for (const auto& e : p.elements)
            if (e.attachedTo == kNoElement) setElement(p, e);
        for (const auto& e : p.elements)
            if (e.attachedTo != kNoElement) setElement(p, e);
    }
    for (const auto& p : model.processes) {
        for (const auto& e : p.elements) {
            if (e.childProcess < 0) continue;
            json attached = json::array();
            for (const auto& b : p.elements)
                if (b.attachedTo == e.eInd && b.typeInfo.isBoundaryEvent()) attached.push_back(b.eInd);
            const auto& child = model.processes[static_cast<std::size_t>(e.childProcess)];
            plan.steps.push_back({{"op", "linkSubprocess"},
                                  {"flow", flowRef(p)},
                                  {"eInd", e.eInd},
                                  {"child", flowRef(child)},
                                  {"attached", attached},
                                  {"countInst", e.countInst}});
        }
    }
    plan.steps.push_back(
        {{"op", "setFactory"}, {"flow", plan.rootRef}, {"eInd", kRootMarker}, {"factory", factoryRef(model.root())}});
    for (const auto& p : model.processes)
        for (const auto& e : p.elements)
            if (e.childProcess >= 0)
                plan.steps.push_back({{"op", "setFactory"},
                                      {"flow", flowRef(p)},
                                      {"eInd", e.eInd},
                                      {"factory", factoryRef(model.processes[static_cast<std::size_t>(e.childProcess)])}});
    return plan;
}

// ---- deployment -----------------------------------------------------------

CostUnits Deployment::cost(std::string_view op) const {
    CostUnits total = 0;
    for (const auto& r : receipts)
        if (op.empty() || r.op == op) total += r.cost;
    return total;
}

json Deployment::toJson() const {
    json refsJ = json::object();
    for (const auto& [k, v] : refs) refsJ[k] = v.str();
    json rec = json::array();
    for (const auto& r : receipts)
        rec.push_back({{"op", r.op}, {"ref", r.ref}, {"cost", r.cost}, {"skipped", r.skipped}});
    return {{"modelHash", modelHash},
            {"refs", refsJ},
            {"rootFlow", rootFlow.str()},
            {"accessControl", accessControl.str()},
            {"receipts", rec}};
}

Deployment Deployment::fromJson(const json& j) {
    Deployment d;
    d.modelHash = j.at("modelHash");
    for (const auto& [k, v] : j.at("refs").items()) d.refs[k] = Address::parse(v.get<std::string>());
    d.rootFlow = Address::parse(j.at("rootFlow").get<std::string>());
    d.accessControl = Address::parse(j.at("accessControl").get<std::string>());
    for (const auto& r : j.at("receipts"))
        d.receipts.push_back({r.at("op"), r.at("ref"), r.at("cost").get<CostUnits>(), r.at("skipped").get<bool>()});
    return d;
}

Deployment executePlan(Ledger& ledger, const AccountId& admin, const Address& interpreter, const RegistrationPlan& plan,
                       const std::map<std::string, Address>& existing) {
    Deployment d;
    d.modelHash = plan.modelHash;
    d.refs = existing;
    d.refs["interpreter"] = interpreter;
    auto ref = [&](const json& name) {
        auto it = d.refs.find(name.get<std::string>());
        if (it == d.refs.end()) throw std::invalid_argument("unbound reference " + name.get<std::string>());
        return it->second;
    };
    AccountInvoker inv(ledger, admin);

    for (const auto& step : plan.steps) {
        const std::string op = step.at("op");
        StepReceipt rec{op, step.value("ref", step.value("flow", std::string())), 0, false};
        auto deploy = [&](std::string_view kind, const Bytes& args) {
            const std::string name = step.at("ref");
            if (d.refs.count(name)) {
                rec.skipped = true;
                return;
            }
            auto r = ledger.deploy(admin, kind, args);
            rec.cost = r.cost;
            if (!r.ok) throw Revert(r.reason);
            d.refs[name] = r.created;
        };
        if (op == "deployFlowNode") {
            deploy(FlowNode::kKind, {});
        } else if (op == "deployAccessControl") {
            std::vector<RoleRequirement> reqs;
            for (const auto& r : step.at("requirements"))
                reqs.push_back({ref(r.at("flow")), r.at("eInd").get<ElementIndex>(), r.at("role")});
            deploy(AccessControl::kKind,
                   AccessControl::initArgs(step.at("roles").get<std::vector<std::string>>(), reqs));
        } else if (op == "deployFactory") {
            deploy(Factory::kKind,
                   Factory::initArgs(interpreter, ref(json("access-control")), templateFromJson(step.at("template"))));
        } else {
            FlowNodeRef fl(inv, ref(step.at("flow")));
            if (op == "setElement") {
                ElementEntry e;
                e.eInd = step.at("eInd");
                e.preC = Bits256::fromHex(step.at("preC").get<std::string>());
                e.postC = Bits256::fromHex(step.at("postC").get<std::string>());
                e.typeInfo = TypeInfo(step.at("typeInfo").get<std::uint16_t>());
                auto code = fromHex(step.at("evtCode").get<std::string>());
                std::copy_n(code.begin(), std::min<std::size_t>(code.size(), 32), e.evtCode.begin());
                e.attachedTo = step.at("attachedTo").is_null() ? kNoElement : step.at("attachedTo").get<ElementIndex>();
                e.countInst = step.at("countInst");
                fl.setElement(e);
            } else if (op == "linkSubprocess") {
                fl.linkSubprocess(step.at("eInd"), ref(step.at("child")),
                                  step.at("attached").get<std::vector<ElementIndex>>(), step.at("countInst"));
            } else if (op == "setFactory") {
                fl.setFactory(step.at("eInd"), ref(step.at("factory")));
            } else {
                throw std::invalid_argument("unknown plan step " + op);
            }
            rec.cost = inv.lastReceipt().cost;
        }
        d.receipts.push_back(std::move(rec));
    }
    d.rootFlow = ref(json(plan.rootRef));
    d.accessControl = ref(json("access-control"));
    return d;
}

// ---- repository -----------------------------------------------------------

ProcessRepository::ProcessRepository(std::filesystem::path root) : root_(std::move(root)) {
    if (!root_.empty()) {
        std::filesystem::create_directories(root_);
        loadAll();
    }
}

const ProcessRepository::Entry& ProcessRepository::add(std::string_view xml) {
    auto model = parse(xml);
    if (auto it = entries_.find(model.modelHash); it != entries_.end()) return it->second;
    Entry e;
    e.modelHash = model.modelHash;
    e.name = model.root().name;
    e.xml = std::string(xml);
    e.indexMaps = model.indexMaps();
    e.plan = emitRegistrationPlan(model);
    auto& stored = entries_[e.modelHash] = std::move(e);
    persist(stored);
    return stored;
}

void ProcessRepository::setDeployment(const std::string& modelHash, const Deployment& d) {
    auto it = entries_.find(modelHash);
    if (it == entries_.end()) throw std::invalid_argument("unknown model " + modelHash);
    it->second.deployment = d;
    persist(it->second);
}

const ProcessRepository::Entry* ProcessRepository::find(const std::string& modelHash) const {
    auto it = entries_.find(modelHash);
    return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> ProcessRepository::hashes() const {
    std::vector<std::string> out;
    for (const auto& [h, e] : entries_) out.push_back(h);
    return out;
}

void ProcessRepository::persist(const Entry& e) const {
    if (root_.empty()) return;
    auto dir = root_ / e.modelHash;
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "model.bpmn") << e.xml;
    std::ofstream(dir / "indexes.json") << e.indexMaps.dump(2) << "\n";
    std::ofstream(dir / "plan.json") << e.plan.toJson().dump(2) << "\n";
    if (e.deployment) std::ofstream(dir / "deployment.json") << e.deployment->toJson().dump(2) << "\n";
}

void ProcessRepository::loadAll() {
    for (const auto& dirent : std::filesystem::directory_iterator(root_)) {
        if (!dirent.is_directory()) continue;
        auto dir = dirent.path();
        std::ifstream xmlIn(dir / "model.bpmn");
        if (!xmlIn) continue;
        std::stringstream xml;
        xml << xmlIn.rdbuf();
        auto model = parse(xml.str());
        Entry e;
        e.modelHash = model.modelHash;
        e.name = model.root().name;
        e.xml = xml.str();
        e.indexMaps = model.indexMaps();
        e.plan = emitRegistrationPlan(model);
        if (std::ifstream dep(dir / "deployment.json"); dep) e.deployment = Deployment::fromJson(json::parse(dep));
        entries_[e.modelHash] = std::move(e);
    }
}

}  // namespace chainflow::bpmn
