#ifndef REGUIDER_EXPERIMENT_HPP
#define REGUIDER_EXPERIMENT_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "reguider/config.hpp"
#include "reguider/train.hpp"

namespace reguider {

struct CellResult {
    std::string dir;
    std::string variant;  // "base" or "reguider"
    AlignMetric metric = AlignMetric::euclidean;  // reguider cells only
    std::size_t horizon = 0;
    std::uint64_t seed = 0;
    Metrics test;
    std::size_t epochs_run = 0;
};

struct TrainingOutcome {
    std::vector<CellResult> cells;
};

// Runs every (variant, horizon, seed[, metric]) cell and persists one run
// directory per cell: config snapshot, per-epoch record.csv, summary.txt,
// and the final checkpoint. Cells are independent; cfg.jobs > 1 runs them
// on a thread pool.
TrainingOutcome run_training(const ExperimentConfig& cfg, std::ostream& log);

// Pretrains a desk teacher on the dataset's train split; writes the RGM1
// checkpoint plus a per-epoch loss log. Returns the checkpoint path.
std::string run_pretrain(const ExperimentConfig& cfg, std::ostream& log);

// Exports window embeddings of the chosen split to cfg.export_out (RGE1).
// Returns the number of records written.
std::size_t run_export(const ExperimentConfig& cfg, std::ostream& log);

}  // namespace reguider

#endif
