#include "chainflow/gateway.hpp"

#include <fstream>
#include <sstream>

#include "chainflow/access_control.hpp"
#include "chainflow/invoker.hpp"

namespace chainflow {

using nlohmann::json;

namespace {

struct HttpError {
    int status;
    std::string reason;
};

const char* errorName(int status) {
    switch (status) {
        case 400: return "BAD_REQUEST";
        case 403: return "FORBIDDEN";
        case 404: return "NOT_FOUND";
        case 405: return "METHOD_NOT_ALLOWED";
        case 409: return "CONFLICT";
        default: return "REVERTED";
    }
}

ApiResponse error(int status, const std::string& reason) { return {status, {{"error", errorName(status)}, {"reason", reason}}}; }

std::vector<std::string> segments(std::string_view path) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < path.size()) {
        auto j = path.find('/', i);
        if (j == std::string_view::npos) j = path.size();
        if (j > i) out.emplace_back(path.substr(i, j - i));
        i = j + 1;
    }
    return out;
}

Address addressArg(const std::string& s) {
    try {
        return Address::parse(s);
    } catch (const std::invalid_argument&) {
        throw HttpError{400, "malformed address '" + s + "'"};
    }
}

ElementIndex indexArg(const std::string& s) {
    try {
        std::size_t used = 0;
        auto v = std::stoul(s, &used);
        if (used != s.size() || v > kMaxElementIndex) throw std::invalid_argument(s);
        return static_cast<ElementIndex>(v);
    } catch (const std::exception&) {
        throw HttpError{400, "malformed element index '" + s + "'"};
    }
}

json parseBody(const ApiRequest& req) {
    if (req.body.empty()) return json::object();
    try {
        return json::parse(req.body);
    } catch (const json::parse_error&) {
        throw HttpError{400, "body is not valid JSON"};
    }
}

json edgesJson(const EdgeSet& s) {
    json out = json::array();
    for (auto e : s.indexes()) out.push_back(e);
    return out;
}

EdgeSet edgesArg(const json& j) {
    if (j.is_string()) return Bits256::fromHex(j.get<std::string>());
    EdgeSet s;
    for (const auto& e : j) {
        auto v = e.get<unsigned>();
        if (v > 255) throw std::invalid_argument("edge index out of range");
        s.set(v);
    }
    return s;
}

json declsJson(const std::vector<script::VarDecl>& decls) {
    json out = json::array();
    for (const auto& d : decls) out.push_back({{"name", d.name}, {"type", script::typeName(d.type)}});
    return out;
}

json stateJson(const ProcessState& s) {
    return {{"tokens", edgesJson(s.tokens)}, {"runningSubProcesses", edgesJson(s.running)}, {"completed", s.isCompleted()}};
}

json eventJson(const LogEvent& ev) {
    json j = {{"seq", ev.logIndex},
              {"tx", ev.txSeq},
              {"emitter", ev.emitter.str()},
              {"name", ev.name},
              {"payload", toHex(ev.payload)}};
    try {
        Reader r(ev.payload);
        if (ev.name == "CaseCreated") {
            auto node = r.address();
            j["data"] = {{"case", node.str()}, {"flow", r.address().str()}};
        } else if (ev.name == "StateUpdated") {
            j["data"] = stateJson(readState(r));
        } else if (ev.name == "MessageSent") {
            auto node = r.address();
            j["data"] = {{"node", node.str()}, {"code", toHex(r.hash())}};
        } else if (ev.name == "BindingChanged") {
            auto c = r.address();
            auto role = r.str();
            j["data"] = {{"case", c.str()}, {"role", role}, {"actor", r.str()}};
        } else if (ev.name == "CheckedIn") {
            auto e = r.u32();
            j["data"] = {{"eInd", e}, {"actor", r.str()}};
        } else if (ev.name == "ElementRegistered") {
            j["data"] = {{"eInd", r.u32()}};
        } else if (ev.name == "SubprocessLinked" || ev.name == "FactorySet") {
            auto e = r.u32();
            j["data"] = {{"eInd", e}, {"address", r.address().str()}};
        }
    } catch (const DecodeError&) {
        // undecodable payloads are still delivered raw
    }
    return j;
}

json receiptJson(const Receipt& r) { return {{"tx", r.seq}, {"cost", r.cost}}; }

}  // namespace

int statusForReason(const std::string& reason) {
    if (reason == "NO_INSTANCE" || reason == "Not Found") return 404;
    if (reason == "NOT_ENABLED" || reason == "ROLE_TAKEN" || reason == "ALREADY_BOUND" || reason == "NO_INTERPRETER")
        return 409;
    if (reason == "UNAUTHORIZED" || reason == "REJECTED") return 403;
    if (reason == "BAD_PAYLOAD") return 400;
    return 422;
}

Api::Api(Runtime& runtime, std::optional<std::filesystem::path> snapshot) : rt_(runtime), snapshot_(std::move(snapshot)) {}

void Api::persist() {
    if (!snapshot_) return;
    auto tmp = *snapshot_;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        rt_.ledger().saveSnapshot(out);
    }
    std::filesystem::rename(tmp, *snapshot_);
}

std::optional<std::string> Api::elementId(const Address& flow, ElementIndex e) {
    if (!elementIds_.count(flow)) {
        // Refresh from every registered model; cheap at repository sizes.
        for (const auto& h : rt_.repository().hashes()) {
            const auto* entry = rt_.repository().find(h);
            if (!entry->deployment) continue;
            for (const auto& [proc, maps] : entry->indexMaps.items()) {
                auto it = entry->deployment->refs.find("flow:" + proc);
                if (it == entry->deployment->refs.end()) continue;
                auto& ids = elementIds_[it->second];
                for (const auto& [id, idx] : maps.at("elements").items()) ids[idx.get<ElementIndex>()] = id;
            }
        }
    }
    auto it = elementIds_.find(flow);
    if (it == elementIds_.end()) return std::nullopt;
    auto jt = it->second.find(e);
    if (jt == it->second.end()) return std::nullopt;
    return jt->second;
}

json Api::flowInfoJson(const Address& flow) {
    AccountInvoker inv(rt_.ledger(), rt_.admin(), AccountInvoker::Mode::View);
    auto info = FlowNodeRef(inv, flow).info();
    json elements = json::array();
    for (const auto& el : info.elements) {
        json j = {{"eInd", el.eInd},
                  {"preC", edgesJson(el.preC)},
                  {"postC", edgesJson(el.postC)},
                  {"typeInfo", el.typeInfo.bits()},
                  {"kind", el.typeInfo.describe()},
                  {"evtCode", toHex(el.evtCode)},
                  {"attachedTo", el.attachedTo == kNoElement ? json(nullptr) : json(el.attachedTo)},
                  {"countInst", el.countInst}};
        if (auto id = elementId(flow, el.eInd)) j["id"] = *id;
        elements.push_back(std::move(j));
    }
    json children = json::object(), factories = json::object();
    for (const auto& [e, a] : info.children) children[std::to_string(e)] = a.str();
    for (const auto& [e, a] : info.factories) factories[std::to_string(e)] = a.str();
    return {{"address", flow.str()},
            {"owner", info.owner},
            {"initElement", info.initElement == kNoElement ? json(nullptr) : json(info.initElement)},
            {"eventList", info.eventList},
            {"elements", elements},
            {"children", children},
            {"factories", factories}};
}

json Api::caseJson(const Address& node) {
    auto view = rt_.inspect(node);
    json out = toJson(view);
    json worklist = json::array();
    std::function<void(const NodeView&)> walk = [&](const NodeView& v) {
        if (!v.enabled.empty()) {
            auto tmpl = rt_.templateOf(v.address);
            for (auto e : v.enabled) {
                json item = {{"case", v.address.str()}, {"eInd", e}, {"process", v.process}};
                if (auto id = elementId(v.flow, e)) item["elementId"] = *id;
                auto ci = tmpl.checkIns.find(e);
                item["imports"] = ci == tmpl.checkIns.end() ? json::array() : declsJson(ci->second.imports);
                auto co = tmpl.checkOuts.find(e);
                item["exports"] = co == tmpl.checkOuts.end() ? json::array() : declsJson(co->second);
                worklist.push_back(std::move(item));
            }
        }
        for (const auto& c : v.children) walk(c);
    };
    walk(view);
    out["worklist"] = worklist;
    return out;
}

ApiResponse Api::handle(const ApiRequest& req) {
    try {
        if (req.method == "GET" && req.path == "/monitor") return monitor(req);
        std::lock_guard lock(mutex_);
        return dispatch(req);
    } catch (const HttpError& e) {
        return error(e.status, e.reason);
    } catch (const bpmn::ParseError& e) {
        return {422, {{"error", "PARSE_ERROR"}, {"reason", e.code()}, {"element", e.elementId()}, {"detail", e.what()}}};
    } catch (const Revert& e) {
        return error(statusForReason(e.reason()), e.reason());
    } catch (const json::exception& e) {
        return error(400, e.what());
    } catch (const std::invalid_argument& e) {
        return error(400, e.what());
    } catch (const std::exception& e) {
        return error(500, e.what());
    }
}

ApiResponse Api::monitor(const ApiRequest& req) {
    std::uint64_t since = 0;
    long timeoutMs = 0;
    try {
        if (auto it = req.query.find("since"); it != req.query.end()) since = std::stoull(it->second);
        if (auto it = req.query.find("timeout"); it != req.query.end()) timeoutMs = std::stol(it->second);
    } catch (const std::exception&) {
        throw HttpError{400, "since/timeout must be integers"};
    }
    auto wait = std::min(std::chrono::milliseconds(std::max(0L, timeoutMs)), kMaxPoll);
    auto& ledger = rt_.ledger();
    if (ledger.logSize() <= since && wait.count() > 0) ledger.waitForLog(since, wait);
    json events = json::array();
    for (const auto& ev : ledger.readLog(since)) events.push_back(eventJson(ev));
    return {200, {{"events", events}, {"next", ledger.logSize()}}};
}

ApiResponse Api::dispatch(const ApiRequest& req) {
    auto seg = segments(req.path);
    const auto& m = req.method;
    auto& ledger = rt_.ledger();
    const AccountId& account = req.account.empty() ? rt_.admin() : req.account;

    auto requireKind = [&](const Address& a, std::string_view kind) {
        if (ledger.kindOf(a) != std::optional<std::string>(std::string(kind))) throw HttpError{404, "NO_INSTANCE"};
    };
    // One ledger transaction: persist the snapshot whatever the outcome.
    auto submit = [&](auto&& fn) {
        struct Persist {
            Api* self;
            ~Persist() { self->persist(); }
        } guard{this};
        return fn();
    };

    if (seg.empty()) return error(404, "no route");

    if (seg[0] == "interpreter") {
        if (seg.size() == 1 && m == "POST") {
            bool created = false;
            auto addr = submit([&] { return rt_.ensureInterpreter(&created); });
            json body = {{"address", addr.str()}, {"created", created}};
            if (created) body["cost"] = rt_.lastReceipt().cost;
            return {created ? 201 : 200, body};
        }
        if (seg.size() >= 2 && seg[1] == "models") {
            if (seg.size() == 2 && m == "GET") {
                json out = json::array();
                for (const auto& h : rt_.repository().hashes()) {
                    const auto* e = rt_.repository().find(h);
                    out.push_back({{"modelHash", h},
                                   {"name", e->name},
                                   {"registered", e->deployment.has_value()},
                                   {"rootFlow", e->deployment ? json(e->deployment->rootFlow.str()) : json(nullptr)}});
                }
                return {200, out};
            }
            if (seg.size() == 3 && m == "GET") {
                const auto* e = rt_.repository().find(seg[2]);
                if (!e) return error(404, "unknown model " + seg[2]);
                json out = {{"modelHash", e->modelHash},
                            {"name", e->name},
                            {"xml", e->xml},
                            {"indexes", e->indexMaps},
                            {"plan", e->plan.toJson()},
                            {"deployment", e->deployment ? e->deployment->toJson() : json(nullptr)},
                            {"rootFlow", e->deployment ? json(e->deployment->rootFlow.str()) : json(nullptr)}};
                return {200, out};
            }
            if (seg.size() == 2 && m == "POST") {
                std::string xml;
                bool reg = true;
                if (req.contentType.find("json") != std::string::npos) {
                    auto body = parseBody(req);
                    xml = body.at("xml").get<std::string>();
                    reg = body.value("register", true);
                } else {
                    xml = req.body;
                    if (auto it = req.query.find("register"); it != req.query.end()) reg = it->second != "false";
                }
                if (xml.empty()) throw HttpError{400, "empty model"};
                if (reg && account != rt_.admin()) throw HttpError{403, "UNAUTHORIZED"};
                if (reg && !rt_.interpreter()) throw HttpError{409, "NO_INTERPRETER"};
                const auto& entry = rt_.addModel(xml, false);
                bool fresh = false;
                if (reg && !entry.deployment) {
                    fresh = true;
                    submit([&] { return rt_.registerModel(entry.modelHash); });
                    elementIds_.clear();
                }
                json out = {{"modelHash", entry.modelHash},
                            {"name", entry.name},
                            {"indexes", entry.indexMaps},
                            {"steps", entry.plan.steps.size()},
                            {"registered", entry.deployment.has_value()}};
                if (entry.deployment) {
                    out["rootFlow"] = entry.deployment->rootFlow.str();
                    out["deployment"] = entry.deployment->toJson();
                    out["cost"] = entry.deployment->cost("");
                }
                return {fresh || !reg ? 201 : 200, out};
            }
        }
        return error(404, "no route");
    }

    if (seg[0] == "i-flow") {
        if (seg.size() == 1 && m == "POST") {
            auto r = submit([&] { return ledger.deploy(account, FlowNode::kKind, {}); });
            if (!r.ok) return error(statusForReason(r.reason), r.reason);
            return {201, {{"address", r.created.str()}, {"tx", r.seq}, {"cost", r.cost}}};
        }
        if (seg.size() == 3 && m == "PATCH" && (seg[1] == "element" || seg[1] == "child" || seg[1] == "factory")) {
            auto flow = addressArg(seg[2]);
            requireKind(flow, FlowNode::kKind);
            auto body = parseBody(req);
            AccountInvoker inv(ledger, account);
            FlowNodeRef ref(inv, flow);
            if (seg[1] == "element") {
                ElementEntry e;
                e.eInd = body.at("eInd").get<ElementIndex>();
                e.preC = edgesArg(body.at("preC"));
                e.postC = edgesArg(body.at("postC"));
                e.typeInfo = TypeInfo(body.at("typeInfo").get<std::uint16_t>());
                if (body.contains("evtCode")) {
                    auto code = fromHex(body.at("evtCode").get<std::string>());
                    if (code.size() != 32) throw HttpError{400, "evtCode must be 32 bytes"};
                    std::copy(code.begin(), code.end(), e.evtCode.begin());
                } else if (body.contains("eventCode")) {
                    e.evtCode = sha256(body.at("eventCode").get<std::string>());
                }
                auto att = body.value("attachedTo", json(nullptr));
                e.attachedTo = att.is_null() ? kNoElement : att.get<ElementIndex>();
                e.countInst = body.value("countInst", 1u);
                submit([&] {
                    ref.setElement(e);
                    return 0;
                });
            } else if (seg[1] == "child") {
                auto child = addressArg(body.at("child").get<std::string>());
                auto attached = body.value("attached", std::vector<ElementIndex>{});
                submit([&] {
                    ref.linkSubprocess(body.at("eInd").get<ElementIndex>(), child, attached,
                                       body.value("countInst", 1u));
                    return 0;
                });
            } else {
                auto factory = addressArg(body.at("factory").get<std::string>());
                requireKind(factory, Factory::kKind);
                submit([&] {
                    ref.setFactory(body.at("eInd").get<ElementIndex>(), factory);
                    return 0;
                });
            }
            elementIds_.erase(flow);
            return {200, receiptJson(inv.lastReceipt())};
        }
        if (seg.size() == 3 && seg[1] == "p-cases") {
            auto flow = addressArg(seg[2]);
            requireKind(flow, FlowNode::kKind);
            if (m == "POST") {
                auto addr = submit([&] { return rt_.startCase(flow, account); });
                json out = receiptJson(rt_.lastReceipt());
                out["caseAddress"] = addr.str();
                return {201, out};
            }
            if (m == "GET") {
                json out = json::array();
                for (const auto& c : rt_.cases(flow)) out.push_back(c.str());
                return {200, {{"flow", flow.str()}, {"cases", out}}};
            }
        }
        if (seg.size() == 2 && m == "GET") {
            auto flow = addressArg(seg[1]);
            requireKind(flow, FlowNode::kKind);
            return {200, flowInfoJson(flow)};
        }
        return error(404, "no route");
    }

    if (seg[0] == "i-data" && seg.size() >= 2) {
        auto node = addressArg(seg[1]);
        requireKind(node, DataNode::kKind);
        if (seg.size() == 2 && m == "GET") return {200, caseJson(node)};
        if (seg.size() == 4 && seg[2] == "i-flow") {
            auto e = indexArg(seg[3]);
            auto tmpl = rt_.templateOf(node);
            if (m == "GET") {
                auto co = tmpl.checkOuts.find(e);
                if (co == tmpl.checkOuts.end()) return error(404, "Not Found");
                return {200, payloadToJson(rt_.checkOut(node, e, account), co->second)};
            }
            if (m == "PATCH") {
                auto ci = tmpl.checkIns.find(e);
                Payload payload;
                if (ci != tmpl.checkIns.end()) payload = payloadFromJson(parseBody(req), ci->second.imports);
                submit([&] {
                    rt_.checkIn(node, e, payload, account);
                    return 0;
                });
                return {200, receiptJson(rt_.lastReceipt())};
            }
        }
        if (seg.size() >= 3 && seg[2] == "roles") {
            if (seg.size() == 3 && m == "POST") {
                auto body = parseBody(req);
                submit([&] {
                    rt_.bindRole(node, body.at("role").get<std::string>(), body.at("actor").get<std::string>(), account);
                    return 0;
                });
                return {200, receiptJson(rt_.lastReceipt())};
            }
            if (seg.size() == 4 && m == "DELETE") {
                submit([&] {
                    rt_.releaseRole(node, seg[3], account);
                    return 0;
                });
                return {200, receiptJson(rt_.lastReceipt())};
            }
        }
        return error(404, "no route");
    }

    if (seg[0] == "factories" && seg.size() == 1 && m == "POST") {
        auto body = parseBody(req);
        auto interp = rt_.interpreter();
        if (!interp) throw HttpError{409, "NO_INTERPRETER"};
        auto ac = addressArg(body.at("accessControl").get<std::string>());
        requireKind(ac, AccessControl::kKind);
        auto src = bpmn::templateFromJson(body.at("template"));
        auto r = submit([&] { return ledger.deploy(account, Factory::kKind, Factory::initArgs(*interp, ac, src)); });
        if (!r.ok) return error(statusForReason(r.reason), r.reason);
        return {201, {{"address", r.created.str()}, {"tx", r.seq}, {"cost", r.cost}}};
    }

    return error(404, "no route");
}

}  // namespace chainflow
