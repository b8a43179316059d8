#pragma once

// Runs N independent replications of a prompt for one snapshot, persists
// every raw reply, and aggregates the parsed values into per-snapshot
// statistics.

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "genagent/agent_backends.hpp"
#include "genagent/ham_core.hpp"
#include "genagent/prompt_kit.hpp"
#include "genagent/transcript.hpp"

namespace genagent::replication {

struct ReplicationPlan {
    prompts::PromptVariant variant = prompts::PromptVariant::CompositionV0;
    ham::MarketSnapshot snapshot{1333, 1313, 1453};
    int n_replications = 50;
    backends::AgentBackendConfig backend;
    prompts::ValueFormat value_format;

    void validate() const;
};

// How per-cell alpha/beta are averaged: per-replication extraction (the
// default, preserves sign information when expectations straddle the current
// price) or extraction applied to the mean expectations.
enum class AveragingMode { PerReplicationRatios, RatiosOfMeanExpectations };

struct Stat {
    std::optional<double> mean;
    std::optional<double> sd;
};

struct CellAggregate {
    ham::MarketSnapshot snapshot{1333, 1313, 1453};
    int n_replications = 0;
    int n_ok = 0;
    int n_failed = 0;
    int n_undefined_alpha = 0;
    int n_undefined_beta = 0;
    Stat w_fund;
    Stat e_fund;
    Stat e_trend;
    Stat alpha;
    Stat beta;
    std::vector<std::string> warnings;
};

// Pure aggregation over persisted records; also the verify-cache entry point.
CellAggregate aggregate_records(const ham::MarketSnapshot& snapshot,
                                std::span<const transcript::Record> records,
                                AveragingMode mode = AveragingMode::PerReplicationRatios,
                                int corrupted_lines = 0);

CellAggregate run_plan(const ReplicationPlan& plan, backends::AgentBackend& backend,
                       transcript::Store& store,
                       AveragingMode mode = AveragingMode::PerReplicationRatios);

// Issues only the replications missing from the store; idempotent when the
// plan is already complete.
CellAggregate resume(const ReplicationPlan& plan, backends::AgentBackend& backend,
                     transcript::Store& store,
                     AveragingMode mode = AveragingMode::PerReplicationRatios);

// Resume over records the caller has already read and filtered to this plan's
// snapshot/variant. Freshly issued records are appended to `records` so a
// caller driving many plans against one store stays current without
// re-reading the store per plan.
CellAggregate resume_with_records(const ReplicationPlan& plan, backends::AgentBackend& backend,
                                  transcript::Store& store,
                                  std::vector<transcript::Record>& records,
                                  int corrupted_lines = 0,
                                  AveragingMode mode = AveragingMode::PerReplicationRatios);

// Aggregate CSV schema shared by the drivers and verify-cache.
void write_aggregate_csv_header(std::ostream& out);
void write_aggregate_csv_row(std::ostream& out, std::string_view variant_id,
                             std::string_view model, double temperature,
                             const CellAggregate& agg);

}  // namespace genagent::replication
