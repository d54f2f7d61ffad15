#include "chainflow/interpreter.hpp"

#include <deque>
#include <optional>
#include <set>

#include "chainflow/access_control.hpp"

namespace chainflow {

bool isEnabled(const EdgeSet& preC, TypeInfo t, const ProcessState& s) {
    if (preC.none()) return false;
    if (t.isJoin() && t.isParallelGateway()) return preC.isSubsetOf(s.tokens);
    return preC.intersects(s.tokens);
}

void removeTokens(ProcessState& s, const EdgeSet& preC, TypeInfo t) {
    const EdgeSet present = preC & s.tokens;
    if (present.none()) return;
    const bool clearAll = t.isGateway() && !(t.isJoin() && t.isExclusiveGateway());
    if (clearAll)
        s.tokens = s.tokens & ~preC;
    else
        s.tokens.reset(present.lowest());
}

namespace {

constexpr std::uint16_t kTriggerMask = 0xFC00;

TypeInfo noneEndEvent() {
    ElementKind k;
    k.category = Category::Event;
    k.trigger = EventTrigger::None;
    k.position = EventPosition::End;
    k.throwing = true;
    return TypeInfo::encode(k);
}

bool sameTrigger(TypeInfo a, TypeInfo b) { return (a.bits() & kTriggerMask) == (b.bits() & kTriggerMask); }

/// Successors that the interpreter may run on its own. External tasks wait
/// for a check-in; catching intermediate events wait for a check-in or a
/// signal broadcast.
bool runsInternally(TypeInfo t) {
    return !t.isZero() && !t.requiresExternalInteraction() && !(t.isCatching() && t.isIntermediateEvent());
}

/// Per-transaction view of the engine; all state lives in flow/data nodes.
class Engine {
public:
    explicit Engine(CallContext& ctx) : ctx_(ctx), inv_(ctx) {}

    Address createRoot(const Address& rootFlow);
    void execute(const Address& node, std::vector<ElementIndex> seeds);
    void createInstance(const Address& parent, ElementIndex e);
    void throwEvent(const Address& node, const Hash32& code, TypeInfo t);
    void tryCatch(const Address& node, const Hash32& code, TypeInfo t);
    void kill(const Address& node);
    void broadcast(const Address& node);

private:
    DataNodeRef data(const Address& a) { return DataNodeRef(inv_, a); }
    FlowNodeRef flow(const Address& a) { return FlowNodeRef(inv_, a); }

    void start(const Address& node, const Address& flowAddr);
    std::vector<ElementIndex> internalSuccessors(FlowNodeRef& fl, ElementIndex e);
    bool inclusiveJoinReady(FlowNodeRef& fl, ElementIndex join, const EdgeSet& preC, const ProcessState& s);
    void childCompleted(const Address& child, const Address& parent, ElementIndex subPInd);
    bool catchInParent(const Address& parent, ElementIndex subPInd, const Hash32& code, TypeInfo t);
    void fireBoundary(const Address& parent, ElementIndex subPInd, ElementIndex ev);
    void startEventSubProcess(const Address& parent, ElementIndex ev);
    void notifyCompleted(const Address& node) { tryCatch(node, Hash32{}, noneEndEvent()); }

    CallContext& ctx_;
    NestedInvoker inv_;
};

Address Engine::createRoot(const Address& rootFlow) {
    auto factory = flow(rootFlow).getFactory(kRootMarker);
    if (factory.isZero()) ctx_.revert("REJECTED");
    auto node = FactoryRef(inv_, factory).newInstance();
    data(node).setParent(Address{}, rootFlow, kNoElement);
    ctx_.emit("CaseCreated", Writer().address(node).address(rootFlow).take());
    start(node, rootFlow);
    return node;
}

void Engine::start(const Address& node, const Address& flowAddr) {
    auto init = flow(flowAddr).getInitElement();
    ProcessState s;
    if (init == kNoElement) {
        data(node).updateProcessState(s);
        notifyCompleted(node);
        return;
    }
    s.tokens.set(kInitEdge);
    data(node).updateProcessState(s);
    execute(node, {init});
}

std::vector<ElementIndex> Engine::internalSuccessors(FlowNodeRef& fl, ElementIndex e) {
    std::vector<ElementIndex> out;
    for (auto next : fl.outElements(e))
        if (runsInternally(fl.getTypeInfo(next))) out.push_back(next);
    return out;
}

bool Engine::inclusiveJoinReady(FlowNodeRef& fl, ElementIndex join, const EdgeSet& preC, const ProcessState& s) {
    const EdgeSet missing = preC & ~s.tokens;
    if (missing.none()) return true;
    auto info = fl.info();

    // Walk forward from every token (and from every running sub-process)
    // outside this join; reaching a missing incoming edge means more tokens
    // may still arrive.
    EdgeSet frontier = s.tokens & ~preC;
    for (const auto& el : info.elements)
        if (s.running.test(el.eInd)) frontier = frontier | el.postC;
    EdgeSet seen;
    std::deque<unsigned> queue;
    for (auto edge : frontier.indexes()) queue.push_back(edge);
    while (!queue.empty()) {
        auto edge = queue.front();
        queue.pop_front();
        if (seen.test(edge)) continue;
        seen.set(edge);
        if (missing.test(edge)) return false;
        for (const auto& el : info.elements) {
            if (el.eInd == join || !el.preC.test(edge)) continue;
            for (auto next : el.postC.indexes())
                if (!seen.test(next)) queue.push_back(next);
        }
    }
    return true;
}

void Engine::execute(const Address& node, std::vector<ElementIndex> seeds) {
    auto dn = data(node);
    auto fl = flow(dn.getFlowNode());
    auto state = dn.getSubProcessState();
    std::deque<ElementIndex> queue(seeds.begin(), seeds.end());
    unsigned dequeued = 0;
    bool fired = false;

    while (!queue.empty()) {
        if (++dequeued > kExecutionBudget) ctx_.revert("BUDGET");
        auto e = queue.front();
        queue.pop_front();
        auto [preC, postC, t] = fl.find(e);
        if (t.isZero() || !isEnabled(preC, t, state)) continue;
        if (t.isJoin() && t.isInclusiveGateway() && !inclusiveJoinReady(fl, e, preC, state)) continue;
        removeTokens(state, preC, t);
        fired = true;

        if (t.spawnsChild() && !t.isEventSubProcess()) {
            std::uint32_t count = t.isMultiInstance() ? fl.getCountInst(e) : 1;
            if (count == 0) {
                addTokens(state, postC);
            } else {
                addSubProcess(state, e);
                dn.updateProcessState(state);
                dn.setCountInst(e, count);
                const std::uint32_t create = t.isParallelMultiInstance() ? count : 1;
                for (std::uint32_t i = 0; i < create; ++i) createInstance(node, e);
                // Children may have completed synchronously and advanced us.
                state = dn.getSubProcessState();
            }
        } else if (t.isScriptTask() || (t.isSplit() && !t.isParallelGateway())) {
            auto out = dn.execScript(e);
            if (out.none() && t.isGateway() && postC.any())
                out = t.isExclusiveGateway() ? EdgeSet::single(postC.lowest()) : postC;
            addTokens(state, out);
        } else if (t.isActivity() || t.isGateway()) {
            addTokens(state, postC);
        } else if (t.isThrowing()) {
            if (t.isIntermediateEvent()) addTokens(state, postC);
            dn.updateProcessState(state);
            throwEvent(node, fl.getEvtCode(e), t);
            state = dn.getSubProcessState();
            if (isCompleted(state)) return;
        } else if (t.isCatching() && !t.isBoundaryEvent() && !t.isEventSubProcessStart()) {
            addTokens(state, postC);
        } else {
            continue;
        }

        for (auto next : internalSuccessors(fl, e)) queue.push_back(next);
    }
    dn.updateProcessState(state);
    // Ran out of tokens without an end event (implicit end).
    if (fired && isCompleted(state)) notifyCompleted(node);
}

void Engine::createInstance(const Address& parent, ElementIndex e) {
    auto pd = data(parent);
    auto pf = flow(pd.getFlowNode());
    auto childFlow = pf.getChildFlow(e);
    auto factory = pf.getFactory(e);
    if (factory.isZero() && !childFlow.isZero()) factory = flow(childFlow).getFactory(kRootMarker);
    if (factory.isZero() || childFlow.isZero()) ctx_.revert("REJECTED");
    auto child = FactoryRef(inv_, factory).newInstance();
    data(child).setParent(parent, childFlow, e);
    pd.addChild(e, child);
    start(child, childFlow);
}

void Engine::throwEvent(const Address& node, const Hash32& code, TypeInfo t) {
    auto state = data(node).getSubProcessState();
    if (t.isMessage()) ctx_.emit("MessageSent", Writer().address(node).hash(code).take());
    if (t.isNoneEvent() || t.isMessage()) {
        if (isCompleted(state)) tryCatch(node, code, t);
    } else {
        if (t.isTerminate()) kill(node);
        tryCatch(node, code, t);
    }
}

void Engine::tryCatch(const Address& node, const Hash32& code, TypeInfo t) {
    auto nd = data(node);
    auto parent = nd.getParent();
    if (parent.isZero()) {
        if (t.isError()) kill(node);
        if (t.isSignal()) broadcast(node);
        return;
    }
    auto subPInd = nd.getIndexInParent();

    if (t.isNoneEvent() || t.isMessage() || t.isTerminate()) {
        childCompleted(node, parent, subPInd);
        return;
    }
    if (t.isSignal()) {
        broadcast(nd.getRoot());
    } else if (!catchInParent(parent, subPInd, code, t)) {
        throwEvent(parent, code, t);
    }
    // An error/escalation end event may also have consumed the child's last token.
    childCompleted(node, parent, subPInd);
}

void Engine::childCompleted(const Address& child, const Address& parent, ElementIndex subPInd) {
    auto cd = data(child);
    if (!isCompleted(cd.getSubProcessState())) return;
    auto pd = data(parent);
    auto state = pd.getSubProcessState();
    if (!state.running.test(subPInd)) return;  // killed meanwhile
    if (!cd.close()) return;                     // reported before

    auto pf = flow(pd.getFlowNode());
    pd.decreaseInstCount(subPInd);
    if (pd.getCountInst(subPInd) == 0) {
        removeSubProcess(state, subPInd);
        addTokens(state, pf.getPostC(subPInd));
        pd.updateProcessState(state);
        execute(parent, internalSuccessors(pf, subPInd));
        if (isCompleted(pd.getSubProcessState())) notifyCompleted(parent);
    } else if (pf.getTypeInfo(subPInd).isSequentialMultiInstance()) {
        createInstance(parent, subPInd);
    }
}

bool Engine::catchInParent(const Address& parent, ElementIndex subPInd, const Hash32& code, TypeInfo t) {
    auto pf = flow(data(parent).getFlowNode());
    std::optional<ElementIndex> boundary;
    std::optional<ElementIndex> esp;
    for (auto ev : pf.getEventList()) {
        auto info = pf.getTypeInfo(ev);
        if (!sameTrigger(info, t)) continue;
        auto evCode = pf.getEvtCode(ev);
        // A catcher without a code catches every event of its kind.
        if (evCode != Hash32{} && evCode != code) continue;
        if (info.isBoundaryEvent() && pf.getAttachedTo(ev) == subPInd) {
            if (!boundary) boundary = ev;
        } else if (info.isEventSubProcessStart() && !esp) {
            esp = ev;
        }
    }
    // The boundary of the throwing sub-process is the innermost scope.
    if (boundary) {
        fireBoundary(parent, subPInd, *boundary);
        return true;
    }
    if (esp) {
        startEventSubProcess(parent, *esp);
        return true;
    }
    return false;
}

void Engine::fireBoundary(const Address& parent, ElementIndex subPInd, ElementIndex ev) {
    auto pd = data(parent);
    auto pf = flow(pd.getFlowNode());
    auto info = pf.getTypeInfo(ev);
    auto state = pd.getSubProcessState();
    if (info.isInterrupting()) {
        for (const auto& c : pd.getChildren(subPInd))
            if (!isCompleted(data(c).getSubProcessState())) kill(c);
        removeSubProcess(state, subPInd);
        pd.setCountInst(subPInd, 0);
    }
    addTokens(state, pf.getPostC(ev));
    pd.updateProcessState(state);
    execute(parent, internalSuccessors(pf, ev));
}

void Engine::startEventSubProcess(const Address& parent, ElementIndex ev) {
    auto pd = data(parent);
    auto pf = flow(pd.getFlowNode());
    auto info = pf.getTypeInfo(ev);
    auto esp = pf.getAttachedTo(ev);
    if (info.isInterrupting()) kill(parent);
    auto state = pd.getSubProcessState();
    std::uint32_t count = state.running.test(esp) ? pd.getCountInst(esp) + 1 : 1;
    addSubProcess(state, esp);
    pd.updateProcessState(state);
    pd.setCountInst(esp, count);
    createInstance(parent, esp);
}

void Engine::kill(const Address& node) {
    auto dn = data(node);
    auto state = dn.getSubProcessState();
    if (isCompleted(state)) return;
    dn.updateProcessState(ProcessState{});
    for (auto e : state.running.indexes())
        for (const auto& c : dn.getChildren(e)) kill(c);
}

void Engine::broadcast(const Address& node) {
    auto dn = data(node);
    auto state = dn.getSubProcessState();
    if (isCompleted(state)) return;

    // Children alive before handling this level; sub-processes started by
    // the signal itself are not signalled again.
    std::vector<Address> alive;
    for (auto e : state.running.indexes())
        for (const auto& c : dn.getChildren(e))
            if (!isCompleted(data(c).getSubProcessState())) alive.push_back(c);

    auto fl = flow(dn.getFlowNode());
    for (auto ev : fl.getEventList()) {
        auto info = fl.getTypeInfo(ev);
        if (!info.isSignal()) continue;
        state = dn.getSubProcessState();
        if (isCompleted(state)) return;
        if (info.isBoundaryEvent()) {
            auto attached = fl.getAttachedTo(ev);
            if (state.running.test(attached)) fireBoundary(node, attached, ev);
        } else if (info.isEventSubProcessStart()) {
            startEventSubProcess(node, ev);
        } else if (info.isIntermediateEvent()) {
            if (fl.getPreC(ev).intersects(state.tokens)) execute(node, {ev});
        }
    }
    for (const auto& c : alive)
        if (!isCompleted(data(c).getSubProcessState())) broadcast(c);
}

Address readAddr(Reader& r) { return r.address(); }

}  // namespace

InstanceKind Interpreter::kindDescriptor() {
    return {[](CallContext&, Reader& init) -> std::unique_ptr<Instance> {
                init.expectEnd();
                return std::make_unique<Interpreter>();
            },
            [](Reader&) -> std::unique_ptr<Instance> { return std::make_unique<Interpreter>(); }};
}

Bytes Interpreter::invoke(CallContext& ctx, std::string_view op, Reader& args) {
    Engine engine(ctx);
    if (op == "createRootInstance") {
        auto rootFlow = args.address();
        args.expectEnd();
        return Writer().address(engine.createRoot(rootFlow)).take();
    }
    if (op == "executeElements") {
        auto node = readAddr(args);
        auto e = args.u32();
        args.expectEnd();
        ctx.requireSender({node, ctx.self()});
        engine.execute(node, {e});
        return {};
    }

    // Everything else is internal: only the interpreter may call itself.
    if (op == "createInstance") {
        auto node = args.address();
        auto e = args.u32();
        args.expectEnd();
        ctx.requireSender({ctx.self()});
        engine.createInstance(node, e);
        return {};
    }
    if (op == "throwEvent" || op == "tryCatchEvent") {
        auto node = args.address();
        auto code = args.hash();
        TypeInfo t(args.u16());
        args.expectEnd();
        ctx.requireSender({ctx.self()});
        if (op == "throwEvent")
            engine.throwEvent(node, code, t);
        else
            engine.tryCatch(node, code, t);
        return {};
    }
    if (op == "killSubProcess" || op == "broadcastSignal") {
        auto node = args.address();
        args.expectEnd();
        ctx.requireSender({ctx.self()});
        if (op == "killSubProcess")
            engine.kill(node);
        else
            engine.broadcast(node);
        return {};
    }
    ctx.revert("UNKNOWN_OP");
}

Address InterpreterRef::createRootInstance(const Address& rootFlow) {
    auto out = inv_.invoke(addr_, "createRootInstance", Writer().address(rootFlow).take());
    return Reader(out).address();
}

void InterpreterRef::executeElements(const Address& node, ElementIndex e) {
    inv_.invoke(addr_, "executeElements", Writer().address(node).u32(e).take());
}

void InterpreterRef::createInstance(const Address& node, ElementIndex e) {
    inv_.invoke(addr_, "createInstance", Writer().address(node).u32(e).take());
}

void InterpreterRef::throwEvent(const Address& node, const Hash32& evtCode, TypeInfo t) {
    inv_.invoke(addr_, "throwEvent", Writer().address(node).hash(evtCode).u16(t.bits()).take());
}

void InterpreterRef::tryCatchEvent(const Address& node, const Hash32& evtCode, TypeInfo t) {
    inv_.invoke(addr_, "tryCatchEvent", Writer().address(node).hash(evtCode).u16(t.bits()).take());
}

void InterpreterRef::killSubProcess(const Address& node) {
    inv_.invoke(addr_, "killSubProcess", Writer().address(node).take());
}

void InterpreterRef::broadcastSignal(const Address& node) {
    inv_.invoke(addr_, "broadcastSignal", Writer().address(node).take());
}

void registerEngineKinds(Ledger& ledger) {
    ledger.registerKind(std::string(Interpreter::kKind), Interpreter::kindDescriptor());
    ledger.registerKind(std::string(FlowNode::kKind), FlowNode::kindDescriptor());
    ledger.registerKind(std::string(DataNode::kKind), DataNode::kindDescriptor());
    ledger.registerKind(std::string(Factory::kKind), Factory::kindDescriptor());
    ledger.registerKind(std::string(AccessControl::kKind), AccessControl::kindDescriptor());
}

}  // namespace chainflow
