#include "chainflow/data_node.hpp"

#include <algorithm>
#include <mutex>

#include "chainflow/access_control.hpp"
#include "chainflow/interpreter.hpp"

namespace chainflow {

namespace {

void writeDecls(Writer& w, const std::vector<script::VarDecl>& decls) {
    w.u32(static_cast<std::uint32_t>(decls.size()));
    for (const auto& d : decls) w.u8(static_cast<std::uint8_t>(d.type)).str(d.name);
}

std::vector<script::VarDecl> readDecls(Reader& r) {
    std::vector<script::VarDecl> out(r.u32());
    for (auto& d : out) {
        auto t = r.u8();
        if (t > static_cast<std::uint8_t>(script::ValueType::Text)) throw DecodeError("bad value type");
        d.type = static_cast<script::ValueType>(t);
        d.name = r.str();
    }
    return out;
}

void writeValue(Writer& w, const script::Value& v) {
    w.u8(static_cast<std::uint8_t>(script::typeOf(v)));
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, bool>)
                w.boolean(x);
            else if constexpr (std::is_same_v<T, std::int64_t>)
                w.i64(x);
            else
                w.str(x);
        },
        v);
}

script::Value readValue(Reader& r) {
    switch (r.u8()) {
        case 0: return r.boolean();
        case 1: return r.i64();
        case 2: return r.str();
        default: throw DecodeError("bad value type");
    }
}

/// Compiling a template is the expensive part of deploying a data node, and
/// every node of one kind carries identical bytes.
std::shared_ptr<const DataTemplate> compileCached(const Bytes& bytes) {
    static std::mutex mu;
    static std::map<Hash32, std::shared_ptr<const DataTemplate>> cache;
    auto key = sha256(bytes);
    std::lock_guard lock(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    Reader r(bytes);
    auto src = DataTemplateSource::decode(r);
    r.expectEnd();
    auto tmpl = DataTemplate::compile(src);
    cache.emplace(key, tmpl);
    return tmpl;
}

[[noreturn]] void rethrowAt(ElementIndex e, const script::CompileError& err) {
    std::string msg = err.what();
    auto cut = msg.rfind(" at offset ");
    if (cut != std::string::npos) msg.resize(cut);
    throw script::CompileError("element " + std::to_string(e) + ": " + msg, err.offset());
}

Bytes encodeAddresses(const std::vector<Address>& v) {
    Writer w;
    w.u32(static_cast<std::uint32_t>(v.size()));
    for (const auto& a : v) w.address(a);
    return w.take();
}

}  // namespace

void writePayload(Writer& w, const Payload& p) {
    w.u32(static_cast<std::uint32_t>(p.size()));
    for (const auto& v : p) writeValue(w, v);
}

Payload readPayload(Reader& r) {
    Payload p(r.u32());
    for (auto& v : p) v = readValue(r);
    return p;
}

void writeState(Writer& w, const ProcessState& s) { w.bits(s.tokens).bits(s.running); }

ProcessState readState(Reader& r) {
    ProcessState s;
    s.tokens = r.bits();
    s.running = r.bits();
    return s;
}

// ---- template -------------------------------------------------------------

Bytes DataTemplateSource::encode() const {
    Writer w;
    w.str(name);
    writeDecls(w, variables);
    w.u32(static_cast<std::uint32_t>(scripts.size()));
    for (const auto& [e, text] : scripts) w.u32(e).str(text);
    w.u32(static_cast<std::uint32_t>(gateways.size()));
    for (const auto& [e, g] : gateways) {
        w.u32(e).boolean(g.inclusive).u32(static_cast<std::uint32_t>(g.guards.size()));
        for (const auto& [edge, text] : g.guards) w.u32(edge).str(text);
        w.boolean(g.defaultEdge.has_value()).u32(g.defaultEdge.value_or(0));
    }
    w.u32(static_cast<std::uint32_t>(checkIns.size()));
    for (const auto& [e, c] : checkIns) {
        w.u32(e);
        writeDecls(w, c.imports);
        w.str(c.operations);
    }
    w.u32(static_cast<std::uint32_t>(checkOuts.size()));
    for (const auto& [e, decls] : checkOuts) {
        w.u32(e);
        writeDecls(w, decls);
    }
    return w.take();
}

DataTemplateSource DataTemplateSource::decode(Reader& r) {
    DataTemplateSource s;
    s.name = r.str();
    s.variables = readDecls(r);
    for (auto n = r.u32(); n > 0; --n) {
        auto e = r.u32();
        s.scripts[e] = r.str();
    }
    for (auto n = r.u32(); n > 0; --n) {
        auto e = r.u32();
        Gateway g;
        g.inclusive = r.boolean();
        for (auto k = r.u32(); k > 0; --k) {
            auto edge = r.u32();
            g.guards.emplace_back(edge, r.str());
        }
        bool hasDefault = r.boolean();
        auto d = r.u32();
        if (hasDefault) g.defaultEdge = d;
        s.gateways[e] = std::move(g);
    }
    for (auto n = r.u32(); n > 0; --n) {
        auto e = r.u32();
        CheckIn c;
        c.imports = readDecls(r);
        c.operations = r.str();
        s.checkIns[e] = std::move(c);
    }
    for (auto n = r.u32(); n > 0; --n) {
        auto e = r.u32();
        s.checkOuts[e] = readDecls(r);
    }
    return s;
}

std::shared_ptr<const DataTemplate> DataTemplate::compile(const DataTemplateSource& src) {
    auto t = std::make_shared<DataTemplate>();
    t->source_ = src;
    for (const auto& v : src.variables) {
        if (!t->scope_.emplace(v.name, v.type).second)
            throw script::CompileError("duplicate variable '" + v.name + "'", 0);
    }
    for (const auto& [e, text] : src.scripts) {
        try {
            t->scripts_.emplace(e, script::Program::compile(text, t->scope_, t->scope_));
        } catch (const script::CompileError& err) {
            rethrowAt(e, err);
        }
    }
    for (const auto& [e, g] : src.gateways) {
        GatewayProgram prog;
        prog.inclusive = g.inclusive;
        prog.defaultEdge = g.defaultEdge;
        try {
            for (const auto& [edge, text] : g.guards) {
                auto expr = script::Expression::compile(text, t->scope_);
                if (expr.type() != script::ValueType::Bool)
                    throw script::CompileError("guard on edge " + std::to_string(edge) + " is not boolean", 0);
                prog.guards.push_back({edge, std::move(expr)});
            }
        } catch (const script::CompileError& err) {
            rethrowAt(e, err);
        }
        std::sort(prog.guards.begin(), prog.guards.end(),
                  [](const GatewayGuard& a, const GatewayGuard& b) { return a.edge < b.edge; });
        t->gateways_.emplace(e, std::move(prog));
    }
    for (const auto& [e, c] : src.checkIns) {
        auto readable = t->scope_;
        for (const auto& imp : c.imports) {
            if (t->scope_.count(imp.name))
                rethrowAt(e, script::CompileError("import '" + imp.name + "' shadows a variable", 0));
            readable[imp.name] = imp.type;
        }
        try {
            t->checkIns_.emplace(e, CheckInEntry{c.imports, script::Program::compile(c.operations, readable, t->scope_)});
        } catch (const script::CompileError& err) {
            rethrowAt(e, err);
        }
    }
    for (const auto& [e, decls] : src.checkOuts) {
        for (const auto& d : decls) {
            auto it = t->scope_.find(d.name);
            if (it == t->scope_.end())
                rethrowAt(e, script::CompileError("export '" + d.name + "' is not declared", 0));
            if (it->second != d.type)
                rethrowAt(e, script::CompileError("export '" + d.name + "' has the wrong type", 0));
        }
    }
    return t;
}

const script::Program* DataTemplate::script(ElementIndex e) const {
    auto it = scripts_.find(e);
    return it == scripts_.end() ? nullptr : &it->second;
}

const GatewayProgram* DataTemplate::gateway(ElementIndex e) const {
    auto it = gateways_.find(e);
    return it == gateways_.end() ? nullptr : &it->second;
}

const CheckInEntry* DataTemplate::checkIn(ElementIndex e) const {
    auto it = checkIns_.find(e);
    return it == checkIns_.end() ? nullptr : &it->second;
}

const std::vector<script::VarDecl>* DataTemplate::checkOut(ElementIndex e) const {
    auto it = source_.checkOuts.find(e);
    return it == source_.checkOuts.end() ? nullptr : &it->second;
}

// ---- data node ------------------------------------------------------------

/// Case variables plus, during a check-in, the imported parameters.
class DataNode::VarEnv final : public script::Environment {
public:
    VarEnv(std::map<std::string, script::Value, std::less<>>& vars) : vars_(vars) {}

    void bind(const std::string& name, script::Value v) { locals_[name] = std::move(v); }

    const script::Value& get(std::string_view name) const override {
        if (auto it = locals_.find(name); it != locals_.end()) return it->second;
        if (auto it = vars_.find(name); it != vars_.end()) return it->second;
        throw script::EvalError("unknown variable " + std::string(name));
    }
    void set(std::string_view name, script::Value v) override {
        auto it = vars_.find(name);
        if (it == vars_.end()) throw script::EvalError("unknown variable " + std::string(name));
        it->second = std::move(v);
    }

private:
    std::map<std::string, script::Value, std::less<>>& vars_;
    std::map<std::string, script::Value, std::less<>> locals_;
};

DataNode::DataNode(Address interpreter, Address factory, Address accessControl, Bytes templateBytes,
                   std::shared_ptr<const DataTemplate> tmpl)
    : interpreter_(interpreter),
      factory_(factory),
      accessControl_(accessControl),
      templateBytes_(std::move(templateBytes)),
      tmpl_(std::move(tmpl)) {
    for (const auto& v : tmpl_->source().variables) vars_[v.name] = script::defaultValue(v.type);
}

Bytes DataNode::initArgs(const Address& interpreter, const Address& accessControl, const Bytes& templateBytes) {
    return Writer().address(interpreter).address(accessControl).bytes(templateBytes).take();
}

InstanceKind DataNode::kindDescriptor() {
    return {[](CallContext& ctx, Reader& init) -> std::unique_ptr<Instance> {
                auto interpreter = init.address();
                auto ac = init.address();
                auto bytes = init.bytes();
                init.expectEnd();
                std::shared_ptr<const DataTemplate> tmpl;
                try {
                    tmpl = compileCached(bytes);
                } catch (const script::CompileError&) {
                    ctx.revert("BAD_TEMPLATE");
                }
                return std::make_unique<DataNode>(interpreter, ctx.sender(), ac, std::move(bytes), std::move(tmpl));
            },
            &DataNode::load};
}

void DataNode::requireAuthorized(CallContext& ctx, ElementIndex e) {
    if (accessControl_.isZero()) return;
    NestedInvoker inv(ctx);
    if (!AccessControlRef(inv, accessControl_).canPerform(ctx.self(), e, ctx.origin())) ctx.revert("UNAUTHORIZED");
}

EdgeSet DataNode::execScript(CallContext& ctx, ElementIndex e) {
    VarEnv env(vars_);
    try {
        if (const auto* prog = tmpl_->script(e)) {
            ctx.sload(static_cast<unsigned>(vars_.size()));
            prog->run(env);
            ctx.sstore(static_cast<unsigned>(prog->size()));
            NestedInvoker inv(ctx);
            return FlowNodeRef(inv, flow_).getPostC(e);
        }
        if (const auto* gw = tmpl_->gateway(e)) {
            ctx.sload(static_cast<unsigned>(vars_.size()));
            EdgeSet out;
            for (const auto& g : gw->guards) {
                if (!std::get<bool>(g.guard.eval(env))) continue;
                out.set(g.edge);
                if (!gw->inclusive) return out;
            }
            if (out.none()) {
                if (!gw->defaultEdge) ctx.revert("NO_PATH");
                out.set(*gw->defaultEdge);
            }
            return out;
        }
    } catch (const script::EvalError&) {
        ctx.revert("SCRIPT_ERROR");
    }
    return {};
}

void DataNode::checkIn(CallContext& ctx, ElementIndex e, const Payload& payload) {
    const auto* entry = tmpl_->checkIn(e);
    if (!entry) ctx.revert("Not Found");
    requireAuthorized(ctx, e);
    if (payload.size() != entry->imports.size()) ctx.revert("BAD_PAYLOAD");
    for (std::size_t i = 0; i < payload.size(); ++i)
        if (script::typeOf(payload[i]) != entry->imports[i].type) ctx.revert("BAD_PAYLOAD");

    NestedInvoker inv(ctx);
    ctx.sload();
    if (!FlowNodeRef(inv, flow_).getPreC(e).intersects(state_.tokens)) ctx.revert("NOT_ENABLED");

    VarEnv env(vars_);
    for (std::size_t i = 0; i < payload.size(); ++i) env.bind(entry->imports[i].name, payload[i]);
    try {
        entry->operations.run(env);
    } catch (const script::EvalError&) {
        ctx.revert("SCRIPT_ERROR");
    }
    ctx.sstore(static_cast<unsigned>(entry->operations.size()));
    Writer ev;
    ev.u32(e).str(ctx.origin());
    writePayload(ev, payload);
    ctx.emit("CheckedIn", ev.take());

    InterpreterRef(inv, interpreter_).executeElements(ctx.self(), e);
}

Payload DataNode::checkOut(CallContext& ctx, ElementIndex e) {
    const auto* decls = tmpl_->checkOut(e);
    if (!decls) ctx.revert("Not Found");
    requireAuthorized(ctx, e);
    ctx.sload(static_cast<unsigned>(decls->size()));
    Payload out;
    for (const auto& d : *decls) out.push_back(vars_.at(d.name));
    return out;
}

Bytes DataNode::invoke(CallContext& ctx, std::string_view op, Reader& args) {
    // Readers.
    if (op == "getFlowNode") {
        ctx.sload();
        return Writer().address(flow_).take();
    }
    if (op == "getParent") {
        ctx.sload();
        return Writer().address(parent_).take();
    }
    if (op == "getRoot") {
        ctx.sload();
        return Writer().address(root_).take();
    }
    if (op == "getIndexInParent") {
        ctx.sload();
        return Writer().u32(indexInParent_).take();
    }
    if (op == "getSubProcessState") {
        ctx.sload(2);
        Writer w;
        writeState(w, state_);
        return w.take();
    }
    if (op == "getChildren") {
        auto e = args.u32();
        args.expectEnd();
        ctx.sload();
        auto it = children_.find(e);
        return encodeAddresses(it == children_.end() ? std::vector<Address>{} : it->second);
    }
    if (op == "getCountInst") {
        auto e = args.u32();
        args.expectEnd();
        ctx.sload();
        auto it = instCount_.find(e);
        return Writer().u32(it == instCount_.end() ? 0 : it->second).take();
    }
    if (op == "getAccessControl") return Writer().address(accessControl_).take();
    if (op == "info") {
        Writer w;
        w.address(flow_).address(parent_).u32(indexInParent_).address(root_);
        w.address(interpreter_).address(factory_).address(accessControl_);
        writeState(w, state_);
        w.u32(static_cast<std::uint32_t>(children_.size()));
        for (const auto& [e, v] : children_) w.u32(e).bytes(encodeAddresses(v));
        w.u32(static_cast<std::uint32_t>(instCount_.size()));
        for (const auto& [e, n] : instCount_) w.u32(e).u32(n);
        const auto& decls = tmpl_->source().variables;
        w.u32(static_cast<std::uint32_t>(decls.size()));
        for (const auto& d : decls) {
            w.str(d.name);
            writeValue(w, vars_.at(d.name));
        }
        w.str(tmpl_->source().name);
        return w.take();
    }

    // Mutators reserved for the interpreter and the factory.
    if (op == "setParent") {
        auto parent = args.address();
        auto flow = args.address();
        auto index = args.u32();
        args.expectEnd();
        requireMutator(ctx);
        if (!flow_.isZero()) ctx.revert("ALREADY_BOUND");
        flow_ = flow;
        parent_ = parent;
        indexInParent_ = parent.isZero() ? kNoElement : index;
        if (parent.isZero()) {
            root_ = ctx.self();
        } else {
            NestedInvoker inv(ctx);
            root_ = DataNodeRef(inv, parent).getRoot();
        }
        ctx.sstore(4);
        return {};
    }
    if (op == "updateProcessState") {
        auto s = readState(args);
        args.expectEnd();
        requireMutator(ctx);
        state_ = s;
        ctx.sstore(2);
        Writer w;
        writeState(w, s);
        ctx.emit("StateUpdated", w.take());
        return {};
    }
    if (op == "addChild") {
        auto e = args.u32();
        auto child = args.address();
        args.expectEnd();
        requireMutator(ctx);
        children_[e].push_back(child);
        ctx.sstore();
        return {};
    }
    if (op == "decreaseInstCount") {
        auto e = args.u32();
        args.expectEnd();
        requireMutator(ctx);
        auto& n = instCount_[e];
        if (n > 0) --n;
        ctx.sstore();
        return {};
    }
    if (op == "setCountInst") {
        auto e = args.u32();
        auto n = args.u32();
        args.expectEnd();
        requireMutator(ctx);
        instCount_[e] = n;
        ctx.sstore();
        return {};
    }
    if (op == "close") {
        args.expectEnd();
        requireMutator(ctx);
        ctx.sload();
        bool wasOpen = !closed_;
        if (wasOpen) {
            closed_ = true;
            ctx.sstore();
        }
        return Writer().boolean(wasOpen).take();
    }
    if (op == "execScript") {
        auto e = args.u32();
        args.expectEnd();
        ctx.requireSender({interpreter_});
        return Writer().bits(execScript(ctx, e)).take();
    }

    // Actor entry points.
    if (op == "checkIn") {
        auto e = args.u32();
        auto payload = readPayload(args);
        args.expectEnd();
        checkIn(ctx, e, payload);
        return {};
    }
    if (op == "checkOut") {
        auto e = args.u32();
        args.expectEnd();
        Writer w;
        writePayload(w, checkOut(ctx, e));
        return w.take();
    }
    ctx.revert("UNKNOWN_OP");
}

void DataNode::save(Writer& out) const {
    out.address(interpreter_).address(factory_).address(accessControl_).bytes(templateBytes_);
    out.address(flow_).address(parent_).u32(indexInParent_).address(root_);
    writeState(out, state_);
    out.u32(static_cast<std::uint32_t>(children_.size()));
    for (const auto& [e, v] : children_) out.u32(e).bytes(encodeAddresses(v));
    out.u32(static_cast<std::uint32_t>(instCount_.size()));
    for (const auto& [e, n] : instCount_) out.u32(e).u32(n);
    out.u32(static_cast<std::uint32_t>(vars_.size()));
    for (const auto& [name, v] : vars_) {
        out.str(name);
        writeValue(out, v);
    }
    out.boolean(closed_);
}

std::unique_ptr<Instance> DataNode::load(Reader& in) {
    auto interpreter = in.address();
    auto factory = in.address();
    auto ac = in.address();
    auto bytes = in.bytes();
    auto node = std::make_unique<DataNode>(interpreter, factory, ac, bytes, compileCached(bytes));
    node->flow_ = in.address();
    node->parent_ = in.address();
    node->indexInParent_ = in.u32();
    node->root_ = in.address();
    node->state_ = readState(in);
    for (auto n = in.u32(); n > 0; --n) {
        auto e = in.u32();
        auto raw = in.bytes();
        Reader r(raw);
        std::vector<Address> v(r.u32());
        for (auto& a : v) a = r.address();
        node->children_[e] = std::move(v);
    }
    for (auto n = in.u32(); n > 0; --n) {
        auto e = in.u32();
        node->instCount_[e] = in.u32();
    }
    for (auto n = in.u32(); n > 0; --n) {
        auto name = in.str();
        node->vars_[name] = readValue(in);
    }
    node->closed_ = in.boolean();
    return node;
}

// ---- factory --------------------------------------------------------------

Bytes Factory::initArgs(const Address& interpreter, const Address& accessControl, const DataTemplateSource& src) {
    return Writer().address(interpreter).address(accessControl).bytes(src.encode()).take();
}

InstanceKind Factory::kindDescriptor() {
    return {[](CallContext& ctx, Reader& init) -> std::unique_ptr<Instance> {
                auto interpreter = init.address();
                auto ac = init.address();
                auto bytes = init.bytes();
                init.expectEnd();
                try {
                    compileCached(bytes);
                } catch (const script::CompileError&) {
                    ctx.revert("BAD_TEMPLATE");
                }
                return std::make_unique<Factory>(interpreter, ac, std::move(bytes));
            },
            &Factory::load};
}

Bytes Factory::invoke(CallContext& ctx, std::string_view op, Reader& args) {
    if (op == "newInstance") {
        args.expectEnd();
        ctx.requireSender({interpreter_});
        auto addr = ctx.deploy(DataNode::kKind, DataNode::initArgs(interpreter_, accessControl_, templateBytes_));
        return Writer().address(addr).take();
    }
    if (op == "templateSource") {
        args.expectEnd();
        return templateBytes_;
    }
    if (op == "getAccessControl") return Writer().address(accessControl_).take();
    ctx.revert("UNKNOWN_OP");
}

void Factory::save(Writer& out) const { out.address(interpreter_).address(accessControl_).bytes(templateBytes_); }

std::unique_ptr<Instance> Factory::load(Reader& in) {
    auto interpreter = in.address();
    auto ac = in.address();
    return std::make_unique<Factory>(interpreter, ac, in.bytes());
}

// ---- clients --------------------------------------------------------------

namespace {

Bytes indexArg(ElementIndex e) { return Writer().u32(e).take(); }

}  // namespace

Address DataNodeRef::getFlowNode() {
    auto out = call("getFlowNode", {});
    return Reader(out).address();
}

Address DataNodeRef::getParent() {
    auto out = call("getParent", {});
    return Reader(out).address();
}

Address DataNodeRef::getRoot() {
    auto out = call("getRoot", {});
    return Reader(out).address();
}

ElementIndex DataNodeRef::getIndexInParent() {
    auto out = call("getIndexInParent", {});
    return Reader(out).u32();
}

ProcessState DataNodeRef::getSubProcessState() {
    auto out = call("getSubProcessState", {});
    Reader r(out);
    return readState(r);
}

std::vector<Address> DataNodeRef::getChildren(ElementIndex e) {
    auto out = call("getChildren", indexArg(e));
    Reader r(out);
    std::vector<Address> v(r.u32());
    for (auto& a : v) a = r.address();
    return v;
}

std::uint32_t DataNodeRef::getCountInst(ElementIndex e) {
    auto out = call("getCountInst", indexArg(e));
    return Reader(out).u32();
}

Address DataNodeRef::getAccessControl() {
    auto out = call("getAccessControl", {});
    return Reader(out).address();
}

DataNodeInfo DataNodeRef::info() {
    auto out = call("info", {});
    Reader r(out);
    DataNodeInfo i;
    i.flow = r.address();
    i.parent = r.address();
    i.indexInParent = r.u32();
    i.root = r.address();
    i.interpreter = r.address();
    i.factory = r.address();
    i.accessControl = r.address();
    i.state = readState(r);
    for (auto n = r.u32(); n > 0; --n) {
        auto e = r.u32();
        auto raw = r.bytes();
        Reader cr(raw);
        std::vector<Address> v(cr.u32());
        for (auto& a : v) a = cr.address();
        i.children[e] = std::move(v);
    }
    for (auto n = r.u32(); n > 0; --n) {
        auto e = r.u32();
        i.instCount[e] = r.u32();
    }
    for (auto n = r.u32(); n > 0; --n) {
        auto name = r.str();
        i.variables.emplace_back(std::move(name), readValue(r));
    }
    i.templateName = r.str();
    return i;
}

void DataNodeRef::setParent(const Address& parent, const Address& flow, ElementIndex indexInParent) {
    call("setParent", Writer().address(parent).address(flow).u32(indexInParent).take());
}

void DataNodeRef::updateProcessState(const ProcessState& s) {
    Writer w;
    writeState(w, s);
    call("updateProcessState", w.take());
}

void DataNodeRef::addChild(ElementIndex e, const Address& child) {
    call("addChild", Writer().u32(e).address(child).take());
}

void DataNodeRef::decreaseInstCount(ElementIndex e) { call("decreaseInstCount", indexArg(e)); }

void DataNodeRef::setCountInst(ElementIndex e, std::uint32_t n) { call("setCountInst", Writer().u32(e).u32(n).take()); }

EdgeSet DataNodeRef::execScript(ElementIndex e) {
    auto out = call("execScript", indexArg(e));
    return Reader(out).bits();
}

void DataNodeRef::checkIn(ElementIndex e, const Payload& payload) {
    Writer w;
    w.u32(e);
    writePayload(w, payload);
    call("checkIn", w.take());
}

Payload DataNodeRef::checkOut(ElementIndex e) {
    auto out = call("checkOut", indexArg(e));
    Reader r(out);
    return readPayload(r);
}

bool DataNodeRef::close() {
    auto out = call("close", {});
    return Reader(out).boolean();
}

Address FactoryRef::newInstance() {
    auto out = inv_.invoke(addr_, "newInstance", {});
    return Reader(out).address();
}

DataTemplateSource FactoryRef::templateSource() {
    auto out = inv_.invoke(addr_, "templateSource", {});
    Reader r(out);
    return DataTemplateSource::decode(r);
}

}  // namespace chainflow
