#include "acceval/campaign.hpp"

#include <algorithm>

#include "acceval/error.hpp"
#include "acceval/plant_controller.hpp"

namespace acceval {

CampaignResult run_campaign(const ClosedLoopModel& m, const ShiftTable* table,
                            const CampaignConfig& config, EstimateOptions options,
                            std::size_t threads, const RecordSink& sink,
                            std::span<const RunRecord> prior) {
  config.validate();
  options.batch_size = config.batch_size;
  SequentialEstimator est(options);
  const std::size_t batch = config.batch_size;

  std::size_t n = 0;
  for (const auto& r : prior) {
    if (r.run_index != n) throw DataError("resumed stream is not contiguous at run " + std::to_string(n));
    est.add(r);
    if (++n % batch == 0) est.checkpoint();
  }
  CampaignResult out;
  out.resumed_from = n;

  while (!est.converged() && n < config.max_runs) {
    const std::size_t count = std::min(batch - n % batch, config.max_runs - n);
    for (const auto& r : run_batch(m, table, config, n, count, threads)) {
      if (sink) sink(r);
      est.add(r);
    }
    n += count;
    out.new_runs += count;
    est.checkpoint();
  }
  if (n % batch != 0) est.checkpoint();
  out.report = est.report(config.regime, model_fingerprint(m));
  return out;
}

}  // namespace acceval
