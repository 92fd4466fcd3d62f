#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "acceval/estimator.hpp"
#include "acceval/sim_engine.hpp"

namespace acceval {

struct CampaignResult {
  EstimateReport report;
  std::size_t resumed_from = 0;  // runs taken from the prior stream
  std::size_t new_runs = 0;
};

using RecordSink = std::function<void(const RunRecord&)>;

/// Runs batches until the stopping rule fires at a batch boundary or
/// max_runs is reached. `prior` must hold runs 0..n-1 of the same campaign;
/// they are folded first and the campaign continues at run n, with the
/// next batch shortened so checkpoints stay on multiples of batch_size.
/// Every new record is handed to `sink` in run-index order.
CampaignResult run_campaign(const ClosedLoopModel& m, const ShiftTable* table,
                            const CampaignConfig& config, EstimateOptions options,
                            std::size_t threads, const RecordSink& sink,
                            std::span<const RunRecord> prior = {});

}  // namespace acceval
