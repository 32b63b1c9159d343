#ifndef REGUIDER_CONFIG_HPP
#define REGUIDER_CONFIG_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "reguider/align.hpp"
#include "reguider/dataset.hpp"
#include "reguider/models.hpp"

namespace reguider {

using KvMap = std::map<std::string, std::string>;

// Flat key=value lines, '#' comments, blank lines ignored.
KvMap parse_config_file(const std::string& path);

// "--key=value" (bare "--flag" means flag=true). Returns false when the
// argument is not an override.
bool apply_override(KvMap& kv, const std::string& arg);

enum class TeacherSource { none, pretrain, checkpoint, cache };

std::string to_string(TeacherSource s);

struct ExperimentConfig {
    // data
    std::string dataset;  // CSV path or synth: spec
    bool csv_timestamp = true;
    std::size_t lookback = 96;
    std::vector<std::size_t> horizons = {96};
    std::size_t stride = 1;
    SplitSpec split{};

    // student
    StudentKind student = StudentKind::two_stage_linear;
    std::size_t d_f = 64;
    std::size_t student_patch_len = 16;
    std::size_t student_hidden = 64;
    std::string student_checkpoint;  // export: reuse trained weights

    // teacher
    TeacherSource teacher_source = TeacherSource::none;
    std::string teacher_path;  // checkpoint / cache file
    std::string teacher_pool;  // pretraining dataset; defaults to `dataset`
    std::size_t d_g = 64;
    std::size_t teacher_patch_len = 16;
    std::size_t teacher_hidden = 64;
    std::size_t teacher_epochs = 10;
    double teacher_lr = 1e-3;
    std::size_t teacher_batch_size = 64;
    std::size_t teacher_patience = 5;
    std::uint64_t teacher_seed = 7;

    // alignment
    AlignMetric metric = AlignMetric::euclidean;
    double lambda = 0.5;
    bool sweep_metrics = false;

    // training
    double learning_rate = 1e-3;
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    std::size_t patience = 5;
    std::vector<std::uint64_t> seeds = {0};

    // run control
    std::string out_dir = "runs";
    bool overwrite = false;
    std::size_t jobs = 1;
    std::string variants = "auto";  // auto | both | base | reguider

    // export / gradcheck
    std::string export_split = "train";
    std::string export_out;
    double tol = 1e-4;
    double fd_step = 1e-5;
};

// Typed view over the map; unknown keys and malformed values are errors, and
// every referenced path must exist.
ExperimentConfig experiment_config_from(const KvMap& kv);

// Resolved snapshot, sorted keys, one per line; stable across reruns.
std::string dump_config(const ExperimentConfig& cfg);

}  // namespace reguider

#endif
