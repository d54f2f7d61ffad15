#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "chainflow/ledger.hpp"

namespace chainflow {

/// Something that can route an encoded operation to a ledger instance:
/// either a nested call from inside a running instance or an external
/// account talking to the ledger. Failures surface as Revert.
class Invoker {
public:
    virtual ~Invoker() = default;
    virtual Bytes invoke(const Address& to, std::string_view op, const Bytes& args) = 0;
};

class NestedInvoker final : public Invoker {
public:
    explicit NestedInvoker(CallContext& ctx) : ctx_(ctx) {}
    Bytes invoke(const Address& to, std::string_view op, const Bytes& args) override {
        return ctx_.call(to, op, args);
    }

private:
    CallContext& ctx_;
};

/// External account access. In view mode nothing is recorded; otherwise each
/// invoke is one transaction and its receipt is kept.
class AccountInvoker final : public Invoker {
public:
    enum class Mode { View, Transact };

    AccountInvoker(Ledger& ledger, AccountId account, Mode mode = Mode::Transact)
        : ledger_(ledger), account_(std::move(account)), mode_(mode) {}

    Bytes invoke(const Address& to, std::string_view op, const Bytes& args) override {
        auto r = mode_ == Mode::View ? ledger_.view(account_, to, op, args) : ledger_.call(account_, to, op, args);
        last_ = r;
        if (!r.ok) throw Revert(r.reason);
        return r.result;
    }

    const Receipt& lastReceipt() const { return last_; }
    const AccountId& account() const { return account_; }

private:
    Ledger& ledger_;
    AccountId account_;
    Mode mode_;
    Receipt last_;
};

}  // namespace chainflow
