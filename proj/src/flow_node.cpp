#include "chainflow/flow_node.hpp"

#include <algorithm>

namespace chainflow {

namespace {

void writeIndexes(Writer& w, const std::vector<ElementIndex>& v) {
    w.u32(static_cast<std::uint32_t>(v.size()));
    for (auto e : v) w.u32(e);
}

std::vector<ElementIndex> readIndexes(Reader& r) {
    std::vector<ElementIndex> v(r.u32());
    for (auto& e : v) e = r.u32();
    return v;
}

Bytes encodeIndex(ElementIndex e) { return Writer().u32(e).take(); }

template <class Map>
void writeAddressMap(Writer& w, const Map& m) {
    w.u32(static_cast<std::uint32_t>(m.size()));
    for (const auto& [k, v] : m) w.u32(k).address(v);
}

std::map<ElementIndex, Address> readAddressMap(Reader& r) {
    std::map<ElementIndex, Address> m;
    for (auto n = r.u32(); n > 0; --n) {
        auto k = r.u32();
        m[k] = r.address();
    }
    return m;
}

}  // namespace

void writeEntry(Writer& w, const ElementEntry& e) {
    w.u32(e.eInd).bits(e.preC).bits(e.postC).u16(e.typeInfo.bits()).hash(e.evtCode).u32(e.attachedTo).u32(e.countInst);
}

ElementEntry readEntry(Reader& r) {
    ElementEntry e;
    e.eInd = r.u32();
    e.preC = r.bits();
    e.postC = r.bits();
    e.typeInfo = TypeInfo(r.u16());
    e.evtCode = r.hash();
    e.attachedTo = r.u32();
    e.countInst = r.u32();
    return e;
}

InstanceKind FlowNode::kindDescriptor() {
    return {[](CallContext& ctx, Reader& init) -> std::unique_ptr<Instance> {
                init.expectEnd();
                return std::make_unique<FlowNode>(ctx.origin());
            },
            &FlowNode::load};
}

const ElementEntry* FlowNode::lookup(ElementIndex e) const {
    auto it = elements_.find(e);
    return it == elements_.end() ? nullptr : &it->second;
}

void FlowNode::requireOwner(const CallContext& ctx) const {
    if (ctx.sender() != Ledger::accountAddress(owner_)) ctx.revert("UNAUTHORIZED");
}

void FlowNode::reindex() {
    eventList_.clear();
    initElement_ = kNoElement;
    for (const auto& [e, entry] : elements_) {
        if (entry.typeInfo.isCatching()) eventList_.insert(e);
        if (initElement_ == kNoElement && entry.typeInfo.isStartEvent()) initElement_ = e;
    }
}

void FlowNode::setElement(CallContext& ctx, ElementEntry entry) {
    requireOwner(ctx);
    if (entry.eInd == kRootMarker || entry.eInd > kMaxElementIndex) ctx.revert("BAD_INDEX");
    if (!entry.typeInfo.wellFormed()) ctx.revert("BAD_TYPEINFO");
    if (entry.attachedTo != kNoElement) {
        auto* target = lookup(entry.attachedTo);
        if (!target || !target->typeInfo.spawnsChild()) ctx.revert("BAD_ATTACH");
    }
    if (entry.countInst == 0) entry.countInst = 1;
    // preC, postC, typeInfo, evtCode/attachedTo, countInst; the event list and
    // init marker are flags of the same record.
    ctx.sstore(5);
    elements_[entry.eInd] = entry;
    reindex();
    ctx.emit("ElementRegistered", encodeIndex(entry.eInd));
}

void FlowNode::linkSubprocess(CallContext& ctx, ElementIndex eInd, const Address& child,
                              const std::vector<ElementIndex>& attached, std::uint32_t countInst) {
    requireOwner(ctx);
    auto it = elements_.find(eInd);
    if (it == elements_.end()) ctx.revert("NOT_FOUND");
    if (!it->second.typeInfo.spawnsChild()) ctx.revert("NOT_SUBPROCESS");
    for (auto a : attached)
        if (!elements_.count(a) || !elements_.at(a).typeInfo.isEvent()) ctx.revert("BAD_ATTACH");
    ctx.sstore(2 + static_cast<unsigned>(attached.size()));
    children_[eInd] = child;
    it->second.countInst = countInst == 0 ? 1 : countInst;
    for (auto a : attached) elements_[a].attachedTo = eInd;
    ctx.emit("SubprocessLinked", Writer().u32(eInd).address(child).take());
}

void FlowNode::setFactory(CallContext& ctx, ElementIndex eInd, const Address& factory) {
    requireOwner(ctx);
    if (eInd != kRootMarker) {
        auto* e = lookup(eInd);
        if (!e) ctx.revert("NOT_FOUND");
        if (!e->typeInfo.spawnsChild()) ctx.revert("NOT_SUBPROCESS");
    }
    ctx.sstore(1);
    factories_[eInd] = factory;
    ctx.emit("FactorySet", Writer().u32(eInd).address(factory).take());
}

std::vector<ElementIndex> FlowNode::outElements(ElementIndex e) const {
    std::vector<ElementIndex> out;
    auto* src = lookup(e);
    if (!src) return out;
    for (unsigned edge : src->postC.indexes())
        for (const auto& [idx, entry] : elements_)
            if (entry.preC.test(edge) && std::find(out.begin(), out.end(), idx) == out.end()) out.push_back(idx);
    return out;
}

Bytes FlowNode::invoke(CallContext& ctx, std::string_view op, Reader& args) {
    static const ElementEntry kEmpty{};
    auto entryOf = [&](ElementIndex e) -> const ElementEntry& {
        auto* p = lookup(e);
        return p ? *p : kEmpty;
    };

    if (op == "setElement") {
        auto entry = readEntry(args);
        args.expectEnd();
        setElement(ctx, entry);
        return {};
    }
    if (op == "linkSubprocess") {
        auto eInd = args.u32();
        auto child = args.address();
        auto attached = readIndexes(args);
        auto count = args.u32();
        args.expectEnd();
        linkSubprocess(ctx, eInd, child, attached, count);
        return {};
    }
    if (op == "setFactory") {
        auto eInd = args.u32();
        auto factory = args.address();
        args.expectEnd();
        setFactory(ctx, eInd, factory);
        return {};
    }

    // Readers below never revert on unknown indexes; they return zero values.
    if (op == "getEventList") {
        args.expectEnd();
        ctx.sload(1 + static_cast<unsigned>(eventList_.size()));
        Writer w;
        writeIndexes(w, {eventList_.begin(), eventList_.end()});
        return std::move(w).take();
    }
    if (op == "getInitElement") {
        args.expectEnd();
        ctx.sload();
        return encodeIndex(initElement_);
    }
    if (op == "elementIndexes") {
        args.expectEnd();
        ctx.sload(1 + static_cast<unsigned>(elements_.size()));
        std::vector<ElementIndex> v;
        for (const auto& [e, _] : elements_) v.push_back(e);
        Writer w;
        writeIndexes(w, v);
        return std::move(w).take();
    }
    if (op == "info") {
        args.expectEnd();
        Writer w;
        w.str(owner_);
        w.u32(static_cast<std::uint32_t>(elements_.size()));
        for (const auto& [_, entry] : elements_) writeEntry(w, entry);
        writeAddressMap(w, children_);
        writeAddressMap(w, factories_);
        writeIndexes(w, {eventList_.begin(), eventList_.end()});
        w.u32(initElement_);
        return std::move(w).take();
    }

    const ElementIndex e = args.u32();
    args.expectEnd();
    const auto& entry = entryOf(e);
    if (op == "find") {
        ctx.sload(3);
        return Writer().bits(entry.preC).bits(entry.postC).u16(entry.typeInfo.bits()).take();
    }
    if (op == "getTypeInfo") {
        ctx.sload();
        return Writer().u16(entry.typeInfo.bits()).take();
    }
    if (op == "getPreC") {
        ctx.sload();
        return Writer().bits(entry.preC).take();
    }
    if (op == "getPostC") {
        ctx.sload();
        return Writer().bits(entry.postC).take();
    }
    if (op == "getAttachedTo") {
        ctx.sload();
        return encodeIndex(lookup(e) ? entry.attachedTo : kNoElement);
    }
    if (op == "getEvtCode") {
        ctx.sload();
        return Writer().hash(entry.evtCode).take();
    }
    if (op == "getCountInst") {
        ctx.sload();
        return Writer().u32(lookup(e) ? entry.countInst : 0).take();
    }
    if (op == "getChildFlow" || op == "getFactory") {
        ctx.sload();
        const auto& m = op == "getChildFlow" ? children_ : factories_;
        auto it = m.find(e);
        return Writer().address(it == m.end() ? Address{} : it->second).take();
    }
    if (op == "outElements") {
        ctx.sload(static_cast<unsigned>(elements_.size()));
        Writer w;
        writeIndexes(w, outElements(e));
        return std::move(w).take();
    }
    ctx.revert("UNKNOWN_OP");
}

void FlowNode::save(Writer& out) const {
    out.str(owner_);
    out.u32(static_cast<std::uint32_t>(elements_.size()));
    for (const auto& [_, entry] : elements_) writeEntry(out, entry);
    writeAddressMap(out, children_);
    writeAddressMap(out, factories_);
}

std::unique_ptr<Instance> FlowNode::load(Reader& in) {
    auto node = std::make_unique<FlowNode>(in.str());
    for (auto n = in.u32(); n > 0; --n) {
        auto entry = readEntry(in);
        node->elements_[entry.eInd] = entry;
    }
    node->children_ = readAddressMap(in);
    node->factories_ = readAddressMap(in);
    node->reindex();
    return node;
}

// ---- client ----

void FlowNodeRef::setElement(const ElementEntry& e) {
    Writer w;
    writeEntry(w, e);
    call("setElement", w.data());
}

void FlowNodeRef::linkSubprocess(ElementIndex eInd, const Address& child, const std::vector<ElementIndex>& attached,
                                 std::uint32_t countInst) {
    Writer w;
    w.u32(eInd).address(child);
    writeIndexes(w, attached);
    w.u32(countInst);
    call("linkSubprocess", w.data());
}

void FlowNodeRef::setFactory(ElementIndex eInd, const Address& factory) {
    call("setFactory", Writer().u32(eInd).address(factory).take());
}

FindResult FlowNodeRef::find(ElementIndex e) {
    auto out = call("find", encodeIndex(e));
    Reader r(out);
    FindResult f;
    f.preC = r.bits();
    f.postC = r.bits();
    f.typeInfo = TypeInfo(r.u16());
    return f;
}

TypeInfo FlowNodeRef::getTypeInfo(ElementIndex e) {
    auto out = call("getTypeInfo", encodeIndex(e));
    return TypeInfo(Reader(out).u16());
}

EdgeSet FlowNodeRef::getPreC(ElementIndex e) {
    auto out = call("getPreC", encodeIndex(e));
    return Reader(out).bits();
}

EdgeSet FlowNodeRef::getPostC(ElementIndex e) {
    auto out = call("getPostC", encodeIndex(e));
    return Reader(out).bits();
}

ElementIndex FlowNodeRef::getAttachedTo(ElementIndex e) {
    auto out = call("getAttachedTo", encodeIndex(e));
    return Reader(out).u32();
}

std::vector<ElementIndex> FlowNodeRef::getEventList() {
    auto out = call("getEventList", {});
    Reader r(out);
    return readIndexes(r);
}

Hash32 FlowNodeRef::getEvtCode(ElementIndex e) {
    auto out = call("getEvtCode", encodeIndex(e));
    return Reader(out).hash();
}

Address FlowNodeRef::getChildFlow(ElementIndex e) {
    auto out = call("getChildFlow", encodeIndex(e));
    return Reader(out).address();
}

Address FlowNodeRef::getFactory(ElementIndex e) {
    auto out = call("getFactory", encodeIndex(e));
    return Reader(out).address();
}

ElementIndex FlowNodeRef::getInitElement() {
    auto out = call("getInitElement", {});
    return Reader(out).u32();
}

std::uint32_t FlowNodeRef::getCountInst(ElementIndex e) {
    auto out = call("getCountInst", encodeIndex(e));
    return Reader(out).u32();
}

std::vector<ElementIndex> FlowNodeRef::outElements(ElementIndex e) {
    auto out = call("outElements", encodeIndex(e));
    Reader r(out);
    return readIndexes(r);
}

std::vector<ElementIndex> FlowNodeRef::elementIndexes() {
    auto out = call("elementIndexes", {});
    Reader r(out);
    return readIndexes(r);
}

FlowNodeInfo FlowNodeRef::info() {
    auto out = call("info", {});
    Reader r(out);
    FlowNodeInfo info;
    info.owner = r.str();
    for (auto n = r.u32(); n > 0; --n) info.elements.push_back(readEntry(r));
    info.children = readAddressMap(r);
    info.factories = readAddressMap(r);
    info.eventList = readIndexes(r);
    info.initElement = r.u32();
    return info;
}

}  // namespace chainflow
