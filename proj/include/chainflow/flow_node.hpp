#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "chainflow/bits.hpp"
#include "chainflow/invoker.hpp"
#include "chainflow/ledger.hpp"
#include "chainflow/type_info.hpp"

namespace chainflow {

using ElementIndex = std::uint32_t;

/// Marker index naming a flow node's own process (used for the root factory).
inline constexpr ElementIndex kRootMarker = 0;
inline constexpr ElementIndex kMaxElementIndex = 255;
inline constexpr ElementIndex kNoElement = 0xFFFFFFFFu;
/// Edge 0 carries the instantiation token consumed by a start event.
inline constexpr unsigned kInitEdge = 0;

struct ElementEntry {
    ElementIndex eInd = 0;
    EdgeSet preC;
    EdgeSet postC;
    TypeInfo typeInfo;
    Hash32 evtCode{};
    ElementIndex attachedTo = kNoElement;
    std::uint32_t countInst = 1;

    friend bool operator==(const ElementEntry&, const ElementEntry&) = default;
};

struct FindResult {
    EdgeSet preC;
    EdgeSet postC;
    TypeInfo typeInfo;
    friend bool operator==(const FindResult&, const FindResult&) = default;
};

/// Full dump of one flow node, for off-chain inspection.
struct FlowNodeInfo {
    AccountId owner;
    std::vector<ElementEntry> elements;
    std::map<ElementIndex, Address> children;
    std::map<ElementIndex, Address> factories;
    std::vector<ElementIndex> eventList;
    ElementIndex initElement = kNoElement;
};

/// Registry of one (sub-)process: the bitmap-encoded control-flow relation,
/// child links, factories and event metadata. Mutable at any time by the
/// model admin (the deploying account).
class FlowNode final : public Instance {
public:
    static constexpr std::string_view kKind = "flow-node";

    static InstanceKind kindDescriptor();

    explicit FlowNode(AccountId owner) : owner_(std::move(owner)) {}

    std::string_view kind() const override { return kKind; }
    std::unique_ptr<Instance> clone() const override { return std::make_unique<FlowNode>(*this); }
    Bytes invoke(CallContext& ctx, std::string_view op, Reader& args) override;
    void save(Writer& out) const override;
    static std::unique_ptr<Instance> load(Reader& in);

private:
    void setElement(CallContext& ctx, ElementEntry entry);
    void linkSubprocess(CallContext& ctx, ElementIndex eInd, const Address& child,
                        const std::vector<ElementIndex>& attached, std::uint32_t countInst);
    void setFactory(CallContext& ctx, ElementIndex eInd, const Address& factory);
    void requireOwner(const CallContext& ctx) const;
    void reindex();
    const ElementEntry* lookup(ElementIndex e) const;
    std::vector<ElementIndex> outElements(ElementIndex e) const;

    AccountId owner_;
    std::map<ElementIndex, ElementEntry> elements_;
    std::map<ElementIndex, Address> children_;
    std::map<ElementIndex, Address> factories_;
    // Derived from elements_.
    std::set<ElementIndex> eventList_;
    ElementIndex initElement_ = kNoElement;
};

/// Typed client for a flow node, over nested or external invocation.
class FlowNodeRef {
public:
    FlowNodeRef(Invoker& inv, Address addr) : inv_(inv), addr_(addr) {}
    const Address& address() const { return addr_; }

    void setElement(const ElementEntry& e);
    void linkSubprocess(ElementIndex eInd, const Address& child, const std::vector<ElementIndex>& attached,
                        std::uint32_t countInst);
    void setFactory(ElementIndex eInd, const Address& factory);

    FindResult find(ElementIndex e);
    TypeInfo getTypeInfo(ElementIndex e);
    EdgeSet getPreC(ElementIndex e);
    EdgeSet getPostC(ElementIndex e);
    ElementIndex getAttachedTo(ElementIndex e);
    std::vector<ElementIndex> getEventList();
    Hash32 getEvtCode(ElementIndex e);
    Address getChildFlow(ElementIndex e);
    Address getFactory(ElementIndex e);
    ElementIndex getInitElement();
    std::uint32_t getCountInst(ElementIndex e);
    std::vector<ElementIndex> outElements(ElementIndex e);
    std::vector<ElementIndex> elementIndexes();
    FlowNodeInfo info();

private:
    Bytes call(std::string_view op, const Bytes& args) { return inv_.invoke(addr_, op, args); }
    Invoker& inv_;
    Address addr_;
};

void writeEntry(Writer& w, const ElementEntry& e);
ElementEntry readEntry(Reader& r);

}  // namespace chainflow
