#include "chainflow/replayer.hpp"

#include <cstdio>
#include <istream>
#include <sstream>

namespace chainflow {

using nlohmann::json;

std::vector<Trace> readTraces(std::istream& in) {
    std::vector<Trace> out;
    bool breakPending = true;
    std::string line;
    std::size_t lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            breakPending = true;
            continue;
        }
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error&) {
            throw std::invalid_argument("line " + std::to_string(lineNo) + ": not JSON");
        }
        if (!j.is_object() || !j.contains("case") || !j.contains("element"))
            throw std::invalid_argument("line " + std::to_string(lineNo) + ": need \"case\" and \"element\"");
        TraceEvent ev;
        ev.caseRef = j["case"].is_string() ? j["case"].get<std::string>() : j["case"].dump();
        ev.element = j["element"].is_string() ? j["element"].get<std::string>() : j["element"].dump();
        ev.payload = j.value("payload", json::object());
        ev.actor = j.value("actor", std::string());
        ev.line = lineNo;
        if (breakPending || out.empty() || out.back().caseRef != ev.caseRef) out.push_back({ev.caseRef, {}});
        breakPending = false;
        out.back().events.push_back(std::move(ev));
    }
    return out;
}

namespace {

json optNum(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string fmt(const std::optional<double>& v) {
    if (!v) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", *v);
    return buf;
}

ApiResponse call(Api& api, std::string method, std::string path, const AccountId& actor, const json& body = nullptr) {
    ApiRequest r;
    r.method = std::move(method);
    r.path = std::move(path);
    r.account = actor;
    if (!body.is_null()) {
        r.body = body.dump();
        r.contentType = "application/json";
    }
    return api.handle(r);
}

std::string reasonOf(const ApiResponse& r) { return r.body.value("reason", std::string("HTTP ") + std::to_string(r.status)); }

}  // namespace

json CostReport::toJson() const {
    json v = json::array();
    for (const auto& x : violations)
        v.push_back({{"case", x.caseRef}, {"line", x.line}, {"element", x.element}, {"reason", x.reason}});
    return {{"version", kVersion},
            {"model", model},
            {"modelHash", modelHash},
            {"elements", elements},
            {"interpreterDeployCost", interpreterDeployCost},
            {"flowDeployCost", flowDeployCost},
            {"registrationCost", registrationCost},
            {"avgRegistrationCostPerElement", optNum(avgRegistrationCostPerElement)},
            {"cases", cases},
            {"conformantCases", conformantCases},
            {"completedCases", completedCases},
            {"avgInstantiationCost", optNum(avgInstantiationCost)},
            {"avgTraceExecutionCost", optNum(avgTraceExecutionCost)},
            {"violations", v}};
}

std::string CostReport::toText() const {
    std::ostringstream o;
    char buf[256];
    o << "Model " << model << " (" << modelHash.substr(0, 12) << ")\n";
    std::snprintf(buf, sizeof buf, "%-28s %14llu\n", "Interpreter deploy", static_cast<unsigned long long>(interpreterDeployCost));
    o << buf;
    std::snprintf(buf, sizeof buf, "%-28s %14llu\n", "Flow node deploy", static_cast<unsigned long long>(flowDeployCost));
    o << buf;
    std::snprintf(buf, sizeof buf, "%-28s %14zu\n", "Elements", elements);
    o << buf;
    std::snprintf(buf, sizeof buf, "%-28s %14s\n", "Avg. reg. cost / element", fmt(avgRegistrationCostPerElement).c_str());
    o << buf;
    std::snprintf(buf, sizeof buf, "%-28s %14zu\n", "Cases replayed", cases);
    o << buf;
    std::snprintf(buf, sizeof buf, "%-28s %14s\n", "Avg. instantiation cost", fmt(avgInstantiationCost).c_str());
    o << buf;
    std::snprintf(buf, sizeof buf, "%-28s %14s\n", "Avg. trace execution cost", fmt(avgTraceExecutionCost).c_str());
    o << buf;
    std::snprintf(buf, sizeof buf, "%-28s %14zu\n", "Conformance violations", violations.size());
    o << buf;
    for (const auto& v : violations) o << "  case " << v.caseRef << " line " << v.line << " " << v.element << ": " << v.reason << "\n";
    return o.str();
}

CostReport replay(Api& api, Runtime& rt, const std::string& modelXml, const std::vector<Trace>& traces) {
    const auto& admin = rt.admin();
    CostReport rep;

    auto interp = call(api, "POST", "/interpreter", admin);
    if (interp.status >= 300) throw std::runtime_error("interpreter deploy failed: " + reasonOf(interp));
    if (interp.status == 201) rep.interpreterDeployCost = interp.body.at("cost").get<CostUnits>();

    ApiRequest reg;
    reg.method = "POST";
    reg.path = "/interpreter/models";
    reg.account = admin;
    reg.body = json{{"xml", modelXml}, {"register", true}}.dump();
    reg.contentType = "application/json";
    auto model = api.handle(reg);
    if (model.status >= 300) throw std::runtime_error("model registration failed: " + model.body.dump());
    rep.model = model.body.at("name");
    rep.modelHash = model.body.at("modelHash");
    const auto deployment = bpmn::Deployment::fromJson(model.body.at("deployment"));
    const auto indexes = model.body.at("indexes");
    const std::string rootFlow = model.body.at("rootFlow");

    for (const auto& r : deployment.receipts) {
        if (r.op == "deployFlowNode") rep.flowDeployCost += r.cost;
        else rep.registrationCost += r.cost;
        if (r.op == "setElement") ++rep.elements;
    }
    if (rep.elements) rep.avgRegistrationCostPerElement = double(rep.registrationCost) / double(rep.elements);

    CostUnits instTotal = 0, execTotal = 0;
    std::size_t instSamples = 0, execSamples = 0;
    for (const auto& trace : traces) {
        ++rep.cases;
        auto violate = [&](const TraceEvent& ev, std::string reason) {
            rep.violations.push_back({trace.caseRef, ev.line, ev.element, std::move(reason)});
        };
        std::size_t i = 0;
        AccountId starter = admin;
        if (!trace.events.empty() && trace.events[0].element == "start") {
            if (!trace.events[0].actor.empty()) starter = trace.events[0].actor;
            i = 1;
        }
        auto created = call(api, "POST", "/i-flow/p-cases/" + rootFlow, starter);
        if (created.status != 201) {
            rep.violations.push_back({trace.caseRef, trace.events.empty() ? 0 : trace.events[0].line, "start", reasonOf(created)});
            continue;
        }
        instTotal += created.body.at("cost").get<CostUnits>();
        ++instSamples;
        const std::string root = created.body.at("caseAddress");

        CostUnits caseCost = 0;
        bool ok = true;
        for (; i < trace.events.size() && ok; ++i) {
            const auto& ev = trace.events[i];
            if (ev.element == "start") {
                violate(ev, "start inside a case");
                ok = false;
                break;
            }
            auto state = call(api, "GET", "/i-data/" + root, admin);
            const json* match = nullptr;
            // Numeric elements address the root process.
            bool numeric = !ev.element.empty() && ev.element.find_first_not_of("0123456789") == std::string::npos;
            for (const auto& item : state.body.at("worklist")) {
                bool hit = numeric ? (item.at("case") == root && std::to_string(item.at("eInd").get<unsigned>()) == ev.element)
                                   : item.value("elementId", std::string()) == ev.element;
                if (hit) {
                    match = &item;
                    break;
                }
            }
            if (!match) {
                bool known = numeric;
                for (const auto& [proc, maps] : indexes.items()) known = known || maps.at("elements").contains(ev.element);
                violate(ev, known ? "NOT_ENABLED" : "UNKNOWN_ELEMENT");
                ok = false;
                break;
            }
            auto actor = ev.actor.empty() ? admin : ev.actor;
            ApiRequest req;
            req.method = "PATCH";
            req.path = "/i-data/" + match->at("case").get<std::string>() + "/i-flow/" +
                       std::to_string(match->at("eInd").get<unsigned>());
            req.account = actor;
            req.body = ev.payload.dump();
            req.contentType = "application/json";
            auto res = api.handle(req);
            if (res.status != 200) {
                violate(ev, reasonOf(res));
                ok = false;
                break;
            }
            caseCost += res.body.at("cost").get<CostUnits>();
        }
        if (!ok) continue;
        ++rep.conformantCases;
        execTotal += caseCost;
        ++execSamples;
        auto fin = call(api, "GET", "/i-data/" + root, admin);
        if (fin.body.value("completed", false)) ++rep.completedCases;
    }
    if (instSamples) rep.avgInstantiationCost = double(instTotal) / double(instSamples);
    if (execSamples) rep.avgTraceExecutionCost = double(execTotal) / double(execSamples);
    return rep;
}

}  // namespace chainflow
