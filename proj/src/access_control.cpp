#include "chainflow/access_control.hpp"

#include "chainflow/data_node.hpp"

namespace chainflow {

InstanceKind AccessControl::kindDescriptor() {
    return {[](CallContext& ctx, Reader& init) -> std::unique_ptr<Instance> {
                auto ac = std::make_unique<AccessControl>(ctx.origin());
                for (auto n = init.u32(); n > 0; --n) ac->roles_.insert(init.str());
                for (auto n = init.u32(); n > 0; --n) {
                    auto flow = init.address();
                    auto e = init.u32();
                    auto role = init.str();
                    if (!ac->roles_.count(role)) ctx.revert("UNKNOWN_ROLE");
                    ac->requirements_[{flow, e}] = role;
                }
                init.expectEnd();
                return ac;
            },
            &AccessControl::load};
}

Bytes AccessControl::initArgs(const std::vector<std::string>& roles, const std::vector<RoleRequirement>& requirements) {
    Writer w;
    w.u32(static_cast<std::uint32_t>(roles.size()));
    for (const auto& r : roles) w.str(r);
    w.u32(static_cast<std::uint32_t>(requirements.size()));
    for (const auto& r : requirements) w.address(r.flow).u32(r.eInd).str(r.role);
    return std::move(w).take();
}

bool AccessControl::canPerform(CallContext& ctx, const Address& caseNode, ElementIndex eInd, const AccountId& actor) {
    NestedInvoker inv(ctx);
    DataNodeRef node(inv, caseNode);
    auto flow = node.getFlowNode();
    ctx.sload();
    auto req = requirements_.find({flow, eInd});
    if (req == requirements_.end()) return true;
    auto root = node.getRoot();
    ctx.sload();
    auto b = bindings_.find({root, req->second});
    return b != bindings_.end() && b->second == actor;
}

Bytes AccessControl::invoke(CallContext& ctx, std::string_view op, Reader& args) {
    auto emitBinding = [&](const Address& rootCase, const std::string& role, const AccountId& actor) {
        ctx.emit("BindingChanged", Writer().address(rootCase).str(role).str(actor).take());
    };

    if (op == "bind") {
        auto rootCase = args.address();
        auto role = args.str();
        auto actor = args.str();
        args.expectEnd();
        ctx.sload();
        if (!roles_.count(role)) ctx.revert("UNKNOWN_ROLE");
        auto it = bindings_.find({rootCase, role});
        if (it != bindings_.end() && it->second != actor && it->second != ctx.origin()) ctx.revert("ROLE_TAKEN");
        ctx.sstore();
        bindings_[{rootCase, role}] = actor;
        emitBinding(rootCase, role, actor);
        return {};
    }
    if (op == "release") {
        auto rootCase = args.address();
        auto role = args.str();
        args.expectEnd();
        ctx.sload();
        auto it = bindings_.find({rootCase, role});
        if (it == bindings_.end()) return {};
        if (ctx.origin() != it->second && ctx.origin() != admin_) ctx.revert("UNAUTHORIZED");
        ctx.sstore();
        bindings_.erase(it);
        emitBinding(rootCase, role, "");
        return {};
    }
    if (op == "canPerform") {
        auto caseNode = args.address();
        auto e = args.u32();
        auto actor = args.str();
        args.expectEnd();
        return Writer().boolean(canPerform(ctx, caseNode, e, actor)).take();
    }
    if (op == "requiredRole") {
        auto flow = args.address();
        auto e = args.u32();
        args.expectEnd();
        ctx.sload();
        auto it = requirements_.find({flow, e});
        return Writer().str(it == requirements_.end() ? "" : it->second).take();
    }
    if (op == "holder") {
        auto rootCase = args.address();
        auto role = args.str();
        args.expectEnd();
        ctx.sload();
        auto it = bindings_.find({rootCase, role});
        return Writer().str(it == bindings_.end() ? "" : it->second).take();
    }
    if (op == "setRequirement") {
        auto flow = args.address();
        auto e = args.u32();
        auto role = args.str();
        args.expectEnd();
        if (ctx.sender() != Ledger::accountAddress(admin_)) ctx.revert("UNAUTHORIZED");
        ctx.sstore(2);
        roles_.insert(role);
        requirements_[{flow, e}] = role;
        return {};
    }
    ctx.revert("UNKNOWN_OP");
}

void AccessControl::save(Writer& out) const {
    out.str(admin_);
    out.u32(static_cast<std::uint32_t>(roles_.size()));
    for (const auto& r : roles_) out.str(r);
    out.u32(static_cast<std::uint32_t>(requirements_.size()));
    for (const auto& [k, role] : requirements_) out.address(k.first).u32(k.second).str(role);
    out.u32(static_cast<std::uint32_t>(bindings_.size()));
    for (const auto& [k, actor] : bindings_) out.address(k.first).str(k.second).str(actor);
}

std::unique_ptr<Instance> AccessControl::load(Reader& in) {
    auto ac = std::make_unique<AccessControl>(in.str());
    for (auto n = in.u32(); n > 0; --n) ac->roles_.insert(in.str());
    for (auto n = in.u32(); n > 0; --n) {
        auto flow = in.address();
        auto e = in.u32();
        ac->requirements_[{flow, e}] = in.str();
    }
    for (auto n = in.u32(); n > 0; --n) {
        auto c = in.address();
        auto role = in.str();
        ac->bindings_[{c, role}] = in.str();
    }
    return ac;
}

void AccessControlRef::bind(const Address& rootCase, const std::string& role, const AccountId& actor) {
    call("bind", Writer().address(rootCase).str(role).str(actor).take());
}

void AccessControlRef::release(const Address& rootCase, const std::string& role) {
    call("release", Writer().address(rootCase).str(role).take());
}

bool AccessControlRef::canPerform(const Address& caseNode, ElementIndex eInd, const AccountId& actor) {
    auto out = call("canPerform", Writer().address(caseNode).u32(eInd).str(actor).take());
    return Reader(out).boolean();
}

std::string AccessControlRef::requiredRole(const Address& flow, ElementIndex eInd) {
    auto out = call("requiredRole", Writer().address(flow).u32(eInd).take());
    Reader r(out);
    return r.str();
}

AccountId AccessControlRef::holder(const Address& rootCase, const std::string& role) {
    auto out = call("holder", Writer().address(rootCase).str(role).take());
    Reader r(out);
    return r.str();
}

void AccessControlRef::setRequirement(const Address& flow, ElementIndex eInd, const std::string& role) {
    call("setRequirement", Writer().address(flow).u32(eInd).str(role).take());
}

}  // namespace chainflow
