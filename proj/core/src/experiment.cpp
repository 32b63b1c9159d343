#include "reguider/experiment.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include "reguider/io.hpp"
#include "reguider/synth.hpp"

namespace reguider {

namespace fs = std::filesystem;

namespace {

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string g6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write " + path);
    os << text;
    if (!os) throw IoError("write failed: " + path);
}

std::string record_csv(const RunRecord& r) {
    std::string out = "epoch,train_pred,train_tsra,train_total,val_mse\n";
    for (std::size_t e = 0; e < r.epochs.size(); ++e) {
        const EpochStats& s = r.epochs[e];
        out += std::to_string(e) + "," + g17(s.pred) + "," + g17(s.tsra) + "," + g17(s.total) +
               "," + g17(s.val_mse) + "\n";
    }
    return out;
}

struct Cell {
    std::string variant;  // base | reguider
    AlignMetric metric = AlignMetric::euclidean;
    std::size_t horizon = 0;
    std::uint64_t seed = 0;
    std::string dir;
};

std::string cell_dir_name(const Cell& c) {
    std::string name = c.variant;
    if (c.variant == "reguider") name += "_" + to_string(c.metric);
    name += "_T" + std::to_string(c.horizon) + "_seed" + std::to_string(c.seed);
    return name;
}

TeacherHandle build_teacher(const ExperimentConfig& cfg, std::size_t channels,
                            std::ostream& log) {
    switch (cfg.teacher_source) {
        case TeacherSource::pretrain: {
            const std::string pool = cfg.teacher_pool.empty() ? cfg.dataset : cfg.teacher_pool;
            MultivariateSeries series = load_dataset(pool, cfg.csv_timestamp);
            TeacherPretrainConfig tp;
            tp.lookback = cfg.lookback;
            tp.horizon = cfg.horizons.front();
            tp.stride = cfg.stride;
            tp.d_g = cfg.d_g;
            tp.patch_len = cfg.teacher_patch_len;
            tp.hidden = cfg.teacher_hidden;
            tp.split = cfg.split;
            tp.learning_rate = cfg.teacher_lr;
            tp.epochs = cfg.teacher_epochs;
            tp.batch_size = cfg.teacher_batch_size;
            tp.patience = cfg.teacher_patience;
            tp.seed = cfg.teacher_seed;
            log << "pretraining desk teacher on " << dataset_label(pool) << " (d_g=" << cfg.d_g
                << ", epochs=" << cfg.teacher_epochs << ")\n";
            return pretrain_teacher(series, tp);
        }
        case TeacherSource::checkpoint: {
            TeacherHandle t = load_teacher(cfg.teacher_path);
            if (t.geo.channels != channels || t.geo.lookback != cfg.lookback)
                throw ConfigError("teacher checkpoint geometry (C=" +
                                  std::to_string(t.geo.channels) + ", L=" +
                                  std::to_string(t.geo.lookback) + ") does not match dataset");
            return t;
        }
        case TeacherSource::cache:
            return load_cached_teacher(cfg.teacher_path);
        case TeacherSource::none:
            break;
    }
    throw ConfigError("no teacher configured");
}

}  // namespace

TrainingOutcome run_training(const ExperimentConfig& cfg, std::ostream& log) {
    MultivariateSeries series = load_dataset(cfg.dataset, cfg.csv_timestamp);
    const std::string data_label = dataset_label(cfg.dataset);
    SplitSeries split = chronological_split(series, cfg.split, cfg.lookback);

    const bool want_teacher = cfg.teacher_source != TeacherSource::none;
    std::string variants = cfg.variants;
    if (variants == "auto") variants = want_teacher ? "both" : "base";
    if ((variants == "both" || variants == "reguider") && !want_teacher)
        throw ConfigError("variants=" + variants + " needs a teacher_source");
    const bool run_base = variants == "both" || variants == "base";
    const bool run_reguider = variants == "both" || variants == "reguider";

    TeacherHandle teacher;
    if (run_reguider) teacher = build_teacher(cfg, series.channels(), log);

    std::vector<AlignMetric> metrics;
    if (cfg.sweep_metrics)
        metrics = {AlignMetric::euclidean, AlignMetric::cosine, AlignMetric::kl};
    else
        metrics = {cfg.metric};

    // windows per horizon, shared read-only across cells
    std::map<std::size_t, DataSplits> splits_by_t;
    for (std::size_t t : cfg.horizons) {
        DataSplits ds;
        ds.train = make_windows(split.train, cfg.lookback, t, cfg.stride);
        ds.val = make_windows(split.val, cfg.lookback, t, cfg.stride);
        ds.test = make_windows(split.test, cfg.lookback, t, cfg.stride);
        splits_by_t.emplace(t, std::move(ds));
    }

    std::vector<Cell> cells;
    for (std::size_t t : cfg.horizons)
        for (std::uint64_t seed : cfg.seeds) {
            if (run_base) cells.push_back({"base", AlignMetric::euclidean, t, seed, ""});
            if (run_reguider)
                for (AlignMetric m : metrics) cells.push_back({"reguider", m, t, seed, ""});
        }

    fs::create_directories(cfg.out_dir);
    for (Cell& c : cells) {
        c.dir = (fs::path(cfg.out_dir) / cell_dir_name(c)).string();
        if (fs::exists(c.dir)) {
            if (!cfg.overwrite)
                throw ConfigError("output directory exists (pass --overwrite to replace): " +
                                  c.dir);
            fs::remove_all(c.dir);
        }
    }

    const std::string config_snapshot = dump_config(cfg);
    TrainingOutcome outcome;
    outcome.cells.resize(cells.size());

    std::mutex log_mutex;
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            {
                std::lock_guard<std::mutex> lk(error_mutex);
                if (first_error) return;
            }
            const Cell& c = cells[i];
            try {
                const bool is_rg = c.variant == "reguider";
                Geometry geo{series.channels(), cfg.lookback, c.horizon};
                StudentForecaster student =
                    make_student(cfg.student, geo, cfg.d_f, cfg.student_patch_len,
                                 cfg.student_hidden, c.seed);
                TrainConfig tc;
                tc.learning_rate = cfg.learning_rate;
                tc.epochs = cfg.epochs;
                tc.batch_size = cfg.batch_size;
                tc.seed = c.seed;
                tc.early_stop_patience = cfg.patience;
                tc.alignment.metric = c.metric;
                tc.alignment.lambda = is_rg ? cfg.lambda : 0.0;

                const DataSplits& ds = splits_by_t.at(c.horizon);
                RunRecord rec = fit(student, is_rg ? &teacher : nullptr, ds, tc);

                fs::create_directories(c.dir);
                std::string cell_cfg = config_snapshot;
                cell_cfg += "cell_variant=" + c.variant + "\n";
                cell_cfg += "cell_metric=" + (is_rg ? to_string(c.metric) : "none") + "\n";
                cell_cfg += "cell_horizon=" + std::to_string(c.horizon) + "\n";
                cell_cfg += "cell_seed=" + std::to_string(c.seed) + "\n";
                write_text(c.dir + "/config.txt", cell_cfg);
                write_text(c.dir + "/record.csv", record_csv(rec));

                std::string summary;
                summary += "dataset=" + data_label + "\n";
                summary += "variant=" + c.variant + "\n";
                summary += "metric=" + (is_rg ? to_string(c.metric) : "none") + "\n";
                summary += "T=" + std::to_string(c.horizon) + "\n";
                summary += "seed=" + std::to_string(c.seed) + "\n";
                summary += "lambda=" + g17(is_rg ? cfg.lambda : 0.0) + "\n";
                summary += "test_mse=" + g17(rec.test.mse) + "\n";
                summary += "test_mae=" + g17(rec.test.mae) + "\n";
                summary += "best_epoch=" + std::to_string(rec.best_epoch) + "\n";
                summary += "epochs_run=" + std::to_string(rec.epochs.size()) + "\n";
                summary += "teacher_checksum_before=" + std::to_string(rec.teacher_checksum_before) +
                           "\n";
                summary += "teacher_checksum_after=" + std::to_string(rec.teacher_checksum_after) +
                           "\n";
                write_text(c.dir + "/summary.txt", summary);
                save_student(c.dir + "/model.rgm", student);

                CellResult res;
                res.dir = c.dir;
                res.variant = c.variant;
                res.metric = c.metric;
                res.horizon = c.horizon;
                res.seed = c.seed;
                res.test = rec.test;
                res.epochs_run = rec.epochs.size();
                outcome.cells[i] = res;

                std::lock_guard<std::mutex> lk(log_mutex);
                log << c.variant << (is_rg ? "(" + to_string(c.metric) + ")" : "") << " T="
                    << c.horizon << " seed=" << c.seed << " test_mse=" << g6(rec.test.mse)
                    << " test_mae=" << g6(rec.test.mae) << " epochs=" << rec.epochs.size()
                    << "\n";
            } catch (...) {
                std::lock_guard<std::mutex> lk(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    const std::size_t n_threads = std::min(cfg.jobs, cells.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (std::thread& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    return outcome;
}

std::string run_pretrain(const ExperimentConfig& cfg, std::ostream& log) {
    fs::create_directories(cfg.out_dir);
    const std::string ckpt_path = (fs::path(cfg.out_dir) / "teacher.rgm").string();
    const std::string log_path = (fs::path(cfg.out_dir) / "pretrain_log.txt").string();
    for (const std::string& p : {ckpt_path, log_path})
        if (fs::exists(p) && !cfg.overwrite)
            throw ConfigError("output exists (pass --overwrite to replace): " + p);

    MultivariateSeries series = load_dataset(cfg.dataset, cfg.csv_timestamp);
    TeacherPretrainConfig tp;
    tp.lookback = cfg.lookback;
    tp.horizon = cfg.horizons.front();
    tp.stride = cfg.stride;
    tp.d_g = cfg.d_g;
    tp.patch_len = cfg.teacher_patch_len;
    tp.hidden = cfg.teacher_hidden;
    tp.split = cfg.split;
    tp.learning_rate = cfg.teacher_lr;
    tp.epochs = cfg.teacher_epochs;
    tp.batch_size = cfg.teacher_batch_size;
    tp.patience = cfg.teacher_patience;
    tp.seed = cfg.teacher_seed;

    RunRecord rec;
    TeacherHandle teacher = pretrain_teacher(series, tp, &rec);
    save_teacher(ckpt_path, teacher);

    std::string text = "epoch,train_mse,val_mse\n";
    for (std::size_t e = 0; e < rec.epochs.size(); ++e)
        text += std::to_string(e) + "," + g17(rec.epochs[e].pred) + "," +
                g17(rec.epochs[e].val_mse) + "\n";
    write_text(log_path, text);

    log << "teacher pretrained on " << dataset_label(cfg.dataset) << ": val_best epoch "
        << rec.best_epoch << ", test_mse=" << g6(rec.test.mse) << ", checkpoint " << ckpt_path
        << "\n";
    return ckpt_path;
}

std::size_t run_export(const ExperimentConfig& cfg, std::ostream& log) {
    if (cfg.export_out.empty()) throw ConfigError("export_out (--export_out=FILE) is required");
    if (fs::exists(cfg.export_out) && !cfg.overwrite)
        throw ConfigError("output exists (pass --overwrite to replace): " + cfg.export_out);

    MultivariateSeries series = load_dataset(cfg.dataset, cfg.csv_timestamp);
    SplitSeries split = chronological_split(series, cfg.split, cfg.lookback);
    const MultivariateSeries& seg = cfg.export_split == "train" ? split.train
                                    : cfg.export_split == "val" ? split.val
                                                                : split.test;
    auto windows = make_windows(seg, cfg.lookback, cfg.horizons.front(), cfg.stride);

    StudentForecaster student =
        cfg.student_checkpoint.empty()
            ? make_student(cfg.student, {series.channels(), cfg.lookback, cfg.horizons.front()},
                           cfg.d_f, cfg.student_patch_len, cfg.student_hidden, cfg.seeds.front())
            : load_student(cfg.student_checkpoint);

    TeacherHandle teacher;
    const bool with_teacher = cfg.teacher_source != TeacherSource::none;
    if (with_teacher) teacher = build_teacher(cfg, series.channels(), log);

    const std::size_t n =
        export_embeddings(student, with_teacher ? &teacher : nullptr, windows, cfg.export_out);
    log << "exported " << n << " embedding records (" << cfg.export_split << " split) to "
        << cfg.export_out << "\n";
    return n;
}

}  // namespace reguider
