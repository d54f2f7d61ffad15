#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace chainflow {

/// Bit positions of the 16-bit element description. Bits 0-2 select the
/// category; the meaning of the remaining bits depends on the category.
namespace tib {
inline constexpr unsigned kActivity = 0;
inline constexpr unsigned kGateway = 1;
inline constexpr unsigned kEvent = 2;
// bit 3: task (activity) | join (gateway) | throwing (event)
inline constexpr unsigned kTaskJoinThrow = 3;
// bit 4: multi-instance (activity) | interrupting (event)
inline constexpr unsigned kMultiOrInterrupting = 4;
// bit 5: sequential multi-instance (activity) | start position (event)
inline constexpr unsigned kSequentialOrStart = 5;
// bit 6: sub-process (activity) | intermediate position (event)
inline constexpr unsigned kSubProcessOrIntermediate = 6;
// bit 7: call-activity (activity) | end position (event)
inline constexpr unsigned kCallActivityOrEnd = 7;
// bit 8: event sub-process (activity) | event sub-process start (event)
inline constexpr unsigned kEventSubProcess = 8;
inline constexpr unsigned kBoundary = 9;
// bits 10-15: subtype (task kind, event trigger, gateway kind)
inline constexpr unsigned kNone = 10;
inline constexpr unsigned kUserOrTerminate = 11;
inline constexpr unsigned kScriptOrError = 12;
inline constexpr unsigned kServiceOrMessage = 13;
inline constexpr unsigned kExclusiveOrEscalation = 14;
inline constexpr unsigned kParallelOrSignal = 15;
}  // namespace tib

enum class Category : std::uint8_t { Activity, Gateway, Event };

enum class ActivityKind : std::uint8_t {
    NoneTask,
    UserTask,
    ScriptTask,
    ServiceTask,
    SubProcess,
    CallActivity,
    EventSubProcess,
};

enum class GatewayKind : std::uint8_t { Exclusive, Parallel, Inclusive };

enum class EventTrigger : std::uint8_t { None, Terminate, Error, Message, Escalation, Signal };

enum class EventPosition : std::uint8_t { Start, Intermediate, End, Boundary, EventSubProcessStart };

enum class MultiInstance : std::uint8_t { None, Parallel, Sequential };

/// Structured view of an element description.
struct ElementKind {
    Category category = Category::Activity;
    ActivityKind activity = ActivityKind::NoneTask;
    MultiInstance multi = MultiInstance::None;
    GatewayKind gateway = GatewayKind::Exclusive;
    bool join = false;
    EventTrigger trigger = EventTrigger::None;
    EventPosition position = EventPosition::Start;
    bool throwing = false;
    bool interrupting = false;

    friend bool operator==(const ElementKind&, const ElementKind&) = default;
};

class TypeInfo {
public:
    constexpr TypeInfo() = default;
    constexpr explicit TypeInfo(std::uint16_t bits) : bits_(bits) {}

    static TypeInfo encode(const ElementKind& kind);
    /// Fails on malformed descriptions (category not exactly one bit, unknown subtype).
    std::optional<ElementKind> decode() const;

    std::uint16_t bits() const { return bits_; }
    bool has(unsigned bit) const { return (bits_ >> bit) & 1u; }
    bool isZero() const { return bits_ == 0; }
    bool wellFormed() const { return decode().has_value(); }

    bool isActivity() const { return has(tib::kActivity); }
    bool isGateway() const { return has(tib::kGateway); }
    bool isEvent() const { return has(tib::kEvent); }

    bool isUserTask() const { return isActivity() && has(tib::kUserOrTerminate); }
    bool isServiceTask() const { return isActivity() && has(tib::kServiceOrMessage); }
    bool isScriptTask() const { return isActivity() && has(tib::kScriptOrError); }
    bool isSubProcess() const { return isActivity() && has(tib::kSubProcessOrIntermediate); }
    bool isCallActivity() const { return isActivity() && has(tib::kCallActivityOrEnd); }
    bool isEventSubProcess() const { return isActivity() && has(tib::kEventSubProcess); }
    bool isMultiInstance() const { return isActivity() && has(tib::kMultiOrInterrupting); }
    bool isParallelMultiInstance() const { return isMultiInstance() && !has(tib::kSequentialOrStart); }
    bool isSequentialMultiInstance() const { return isMultiInstance() && has(tib::kSequentialOrStart); }
    /// Sub-process, call-activity or multi-instance: executed via a child case.
    bool spawnsChild() const { return isSubProcess() || isCallActivity() || isMultiInstance(); }

    bool isJoin() const { return isGateway() && has(tib::kTaskJoinThrow); }
    bool isSplit() const { return isGateway() && !has(tib::kTaskJoinThrow); }
    bool isExclusiveGateway() const {
        return isGateway() && has(tib::kExclusiveOrEscalation) && !has(tib::kParallelOrSignal);
    }
    bool isParallelGateway() const {
        return isGateway() && has(tib::kParallelOrSignal) && !has(tib::kExclusiveOrEscalation);
    }
    bool isInclusiveGateway() const {
        return isGateway() && has(tib::kParallelOrSignal) && has(tib::kExclusiveOrEscalation);
    }

    bool isThrowing() const { return isEvent() && has(tib::kTaskJoinThrow); }
    bool isCatching() const { return isEvent() && !has(tib::kTaskJoinThrow); }
    bool isInterrupting() const { return isEvent() && has(tib::kMultiOrInterrupting); }
    bool isStartEvent() const { return isEvent() && has(tib::kSequentialOrStart); }
    bool isIntermediateEvent() const { return isEvent() && has(tib::kSubProcessOrIntermediate); }
    bool isEndEvent() const { return isEvent() && has(tib::kCallActivityOrEnd); }
    bool isBoundaryEvent() const { return isEvent() && has(tib::kBoundary); }
    bool isEventSubProcessStart() const { return isEvent() && has(tib::kEventSubProcess); }

    bool isNoneEvent() const { return isEvent() && has(tib::kNone); }
    bool isTerminate() const { return isEvent() && has(tib::kUserOrTerminate); }
    bool isError() const { return isEvent() && has(tib::kScriptOrError); }
    bool isMessage() const { return isEvent() && has(tib::kServiceOrMessage); }
    bool isEscalation() const { return isEvent() && has(tib::kExclusiveOrEscalation); }
    bool isSignal() const { return isEvent() && has(tib::kParallelOrSignal); }

    /// Elements that wait for an external actor: user/service tasks and
    /// catching intermediate events other than signals.
    bool requiresExternalInteraction() const {
        return isUserTask() || isServiceTask() ||
               (isCatching() && isIntermediateEvent() && !isSignal() && !isBoundaryEvent());
    }

    std::string describe() const;

    friend bool operator==(TypeInfo, TypeInfo) = default;

private:
    std::uint16_t bits_ = 0;
};

std::string_view toString(EventTrigger t);
std::optional<EventTrigger> eventTriggerFromString(std::string_view s);

}  // namespace chainflow
