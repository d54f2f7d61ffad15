#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "chainflow/gateway.hpp"

namespace chainflow {

/// One line of a JSONL trace file. `element` is an element id, a decimal
/// element index of the root process, or "start".
struct TraceEvent {
    std::string caseRef;
    std::string element;
    nlohmann::json payload = nlohmann::json::object();
    AccountId actor;
    std::size_t line = 0;
};

struct Trace {
    std::string caseRef;
    std::vector<TraceEvent> events;
};

/// Groups events into cases: a blank line or a new case label starts one.
/// Throws std::invalid_argument naming the offending line.
std::vector<Trace> readTraces(std::istream& in);

struct Violation {
    std::string caseRef;
    std::size_t line = 0;
    std::string element;
    std::string reason;
};

struct CostReport {
    static constexpr int kVersion = 1;

    std::string model;
    std::string modelHash;
    std::size_t elements = 0;  // setElement steps of the plan
    CostUnits interpreterDeployCost = 0;  // zero when the ledger already had one
    CostUnits flowDeployCost = 0;
    CostUnits registrationCost = 0;
    std::optional<double> avgRegistrationCostPerElement;
    std::size_t cases = 0;
    std::size_t conformantCases = 0;
    std::size_t completedCases = 0;
    std::optional<double> avgInstantiationCost;
    std::optional<double> avgTraceExecutionCost;
    std::vector<Violation> violations;

    nlohmann::json toJson() const;
    std::string toText() const;
};

/// Registers the model through the API and runs every trace against it,
/// one case after another. Violating cases stop at the first failing event.
CostReport replay(Api& api, Runtime& rt, const std::string& modelXml, const std::vector<Trace>& traces);

}  // namespace chainflow
