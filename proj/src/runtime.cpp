#include "chainflow/runtime.hpp"

#include "chainflow/access_control.hpp"
#include "chainflow/invoker.hpp"

namespace chainflow {

using nlohmann::json;

std::vector<EnabledTask> enabledTasks(const NodeView& root) {
    std::vector<EnabledTask> out;
    auto walk = [&](auto& self, const NodeView& v) -> void {
        for (auto e : v.enabled) out.push_back({v.address, e, v.process});
        for (const auto& c : v.children) self(self, c);
    };
    walk(walk, root);
    return out;
}

json valueToJson(const script::Value& v) {
    return std::visit([](const auto& x) { return json(x); }, v);
}

json toJson(const NodeView& v) {
    json tokens = json::array(), running = json::array(), enabled = json::array(), children = json::array();
    for (auto e : v.state.tokens.indexes()) tokens.push_back(e);
    for (auto e : v.state.running.indexes()) running.push_back(e);
    for (auto e : v.enabled) enabled.push_back(e);
    for (const auto& c : v.children) children.push_back(toJson(c));
    json vars = json::object();
    for (const auto& [name, value] : v.variables) vars[name] = valueToJson(value);
    json counts = json::object();
    for (const auto& [e, n] : v.instCount) counts[std::to_string(e)] = n;
    return {{"address", v.address.str()},
            {"flow", v.flow.str()},
            {"parent", v.parent.isZero() ? json(nullptr) : json(v.parent.str())},
            {"indexInParent", v.indexInParent == kNoElement ? json(nullptr) : json(v.indexInParent)},
            {"process", v.process},
            {"tokens", tokens},
            {"runningSubProcesses", running},
            {"completed", v.state.isCompleted()},
            {"enabled", enabled},
            {"instCount", counts},
            {"variables", vars},
            {"children", children}};
}

Payload payloadFromJson(const json& j, const std::vector<script::VarDecl>& signature) {
    if (!j.is_object()) throw std::invalid_argument("payload must be a JSON object");
    Payload out;
    for (const auto& d : signature) {
        auto it = j.find(d.name);
        if (it == j.end()) throw std::invalid_argument("missing parameter '" + d.name + "'");
        switch (d.type) {
            case script::ValueType::Bool:
                if (!it->is_boolean()) throw std::invalid_argument("'" + d.name + "' must be a bool");
                out.emplace_back(it->get<bool>());
                break;
            case script::ValueType::Int:
                if (!it->is_number_integer()) throw std::invalid_argument("'" + d.name + "' must be an integer");
                out.emplace_back(it->get<std::int64_t>());
                break;
            case script::ValueType::Text:
                if (!it->is_string()) throw std::invalid_argument("'" + d.name + "' must be a string");
                out.emplace_back(it->get<std::string>());
                break;
        }
    }
    for (const auto& [k, v] : j.items()) {
        bool known = false;
        for (const auto& d : signature) known = known || d.name == k;
        if (!known) throw std::invalid_argument("unexpected parameter '" + k + "'");
    }
    return out;
}

json payloadToJson(const Payload& p, const std::vector<script::VarDecl>& signature) {
    json out = json::object();
    for (std::size_t i = 0; i < p.size() && i < signature.size(); ++i) out[signature[i].name] = valueToJson(p[i]);
    return out;
}

Runtime::Runtime(Ledger& ledger, AccountId admin, std::filesystem::path repoDir)
    : ledger_(ledger), admin_(std::move(admin)), repo_(std::move(repoDir)) {
    if (!ledger_.hasKind(Interpreter::kKind)) registerEngineKinds(ledger_);
}

std::optional<Address> Runtime::interpreter() const {
    auto all = ledger_.instancesOfKind(Interpreter::kKind);
    if (all.empty()) return std::nullopt;
    return all.front();
}

Address Runtime::ensureInterpreter(bool* created) {
    if (created) *created = false;
    if (auto existing = interpreter()) return *existing;
    auto r = ledger_.deploy(admin_, Interpreter::kKind, {});
    last_ = r;
    if (!r.ok) throw Revert(r.reason);
    if (created) *created = true;
    return r.created;
}

const bpmn::ProcessRepository::Entry& Runtime::addModel(std::string_view xml, bool deploy) {
    const auto& entry = repo_.add(xml);
    if (deploy && !entry.deployment) registerModel(entry.modelHash);
    return entry;
}

const bpmn::Deployment& Runtime::registerModel(const std::string& modelHash) {
    const auto* entry = repo_.find(modelHash);
    if (!entry) throw std::invalid_argument("unknown model " + modelHash);
    if (entry->deployment) return *entry->deployment;
    auto d = bpmn::executePlan(ledger_, admin_, ensureInterpreter(), entry->plan);
    repo_.setDeployment(modelHash, d);
    return *repo_.find(modelHash)->deployment;
}

Address Runtime::startCase(const Address& rootFlow, const AccountId& actor) {
    auto interp = interpreter();
    if (!interp) throw Revert("NO_INTERPRETER");
    AccountInvoker inv(ledger_, actor);
    try {
        auto addr = InterpreterRef(inv, *interp).createRootInstance(rootFlow);
        last_ = inv.lastReceipt();
        return addr;
    } catch (const Revert&) {
        last_ = inv.lastReceipt();
        throw;
    }
}

void Runtime::checkIn(const Address& node, ElementIndex eInd, const Payload& payload, const AccountId& actor) {
    AccountInvoker inv(ledger_, actor);
    try {
        DataNodeRef(inv, node).checkIn(eInd, payload);
        last_ = inv.lastReceipt();
    } catch (const Revert&) {
        last_ = inv.lastReceipt();
        throw;
    }
}

Payload Runtime::checkOut(const Address& node, ElementIndex eInd, const AccountId& actor) {
    AccountInvoker inv(ledger_, actor, AccountInvoker::Mode::View);
    return DataNodeRef(inv, node).checkOut(eInd);
}

void Runtime::bindRole(const Address& rootCase, const std::string& role, const AccountId& actor, const AccountId& caller) {
    AccountInvoker view(ledger_, caller, AccountInvoker::Mode::View);
    auto ac = DataNodeRef(view, rootCase).getAccessControl();
    AccountInvoker inv(ledger_, caller);
    try {
        AccessControlRef(inv, ac).bind(rootCase, role, actor);
        last_ = inv.lastReceipt();
    } catch (const Revert&) {
        last_ = inv.lastReceipt();
        throw;
    }
}

void Runtime::releaseRole(const Address& rootCase, const std::string& role, const AccountId& caller) {
    AccountInvoker view(ledger_, caller, AccountInvoker::Mode::View);
    auto ac = DataNodeRef(view, rootCase).getAccessControl();
    AccountInvoker inv(ledger_, caller);
    try {
        AccessControlRef(inv, ac).release(rootCase, role);
        last_ = inv.lastReceipt();
    } catch (const Revert&) {
        last_ = inv.lastReceipt();
        throw;
    }
}

DataTemplateSource Runtime::templateOf(const Address& node) {
    AccountInvoker inv(ledger_, admin_, AccountInvoker::Mode::View);
    // DataNodeInfo carries the factory; the factory holds the template.
    auto info = DataNodeRef(inv, node).info();
    std::lock_guard lock(cacheMutex_);
    auto it = templates_.find(info.factory);
    if (it == templates_.end()) it = templates_.emplace(info.factory, FactoryRef(inv, info.factory).templateSource()).first;
    return it->second;
}

NodeView Runtime::inspect(const Address& node) {
    AccountInvoker inv(ledger_, admin_, AccountInvoker::Mode::View);
    auto info = DataNodeRef(inv, node).info();
    NodeView v;
    v.address = node;
    v.flow = info.flow;
    v.parent = info.parent;
    v.indexInParent = info.indexInParent;
    v.process = info.templateName;
    v.state = info.state;
    v.instCount = info.instCount;
    v.variables = info.variables;
    if (!info.flow.isZero()) {
        auto flow = FlowNodeRef(inv, info.flow).info();
        for (const auto& el : flow.elements)
            if (el.typeInfo.requiresExternalInteraction() && isEnabled(el.preC, el.typeInfo, info.state))
                v.enabled.push_back(el.eInd);
    }
    for (const auto& [e, kids] : info.children)
        for (const auto& c : kids) v.children.push_back(inspect(c));
    return v;
}

std::vector<Address> Runtime::cases(const Address& rootFlow) const {
    std::vector<Address> out;
    for (const auto& ev : ledger_.readLog(0)) {
        if (ev.name != "CaseCreated") continue;
        Reader r(ev.payload);
        auto node = r.address();
        if (r.address() == rootFlow) out.push_back(node);
    }
    return out;
}

}  // namespace chainflow
