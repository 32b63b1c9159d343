#include "reguider/config.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "reguider/synth.hpp"

namespace reguider {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out))
        throw ConfigError("key " + key + ": \"" + v + "\" is not a number");
    return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw ConfigError("key " + key + ": \"" + v + "\" is not a nonnegative integer");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key " + key + ": \"" + v + "\" is not a boolean");
}

template <typename T, typename F>
std::vector<T> to_list(const std::string& key, const std::string& v, F&& item) {
    std::vector<T> out;
    std::size_t b = 0;
    while (b <= v.size()) {
        std::size_t comma = v.find(',', b);
        std::string piece = trim(v.substr(b, comma == std::string::npos ? comma : comma - b));
        if (!piece.empty()) out.push_back(item(key, piece));
        if (comma == std::string::npos) break;
        b = comma + 1;
    }
    if (out.empty()) throw ConfigError("key " + key + ": empty list");
    return out;
}

void require_path(const std::string& key, const std::string& path) {
    if (!std::filesystem::exists(path))
        throw ConfigError("key " + key + ": path does not exist: " + path);
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "dataset",        "csv_timestamp",    "lookback",        "horizons",
        "stride",         "split_train",      "split_val",       "split_test",
        "student",        "d_f",              "student_patch_len", "student_hidden",
        "student_checkpoint",
        "teacher_source", "teacher_path",     "teacher_pool",    "d_g",
        "teacher_patch_len", "teacher_hidden", "teacher_epochs", "teacher_lr",
        "teacher_batch_size", "teacher_patience", "teacher_seed",
        "metric",         "lambda",           "sweep_metrics",
        "learning_rate",  "epochs",           "batch_size",      "patience",
        "seeds",          "out",              "overwrite",       "jobs",
        "variants",       "export_split",     "export_out",      "tol",
        "fd_step",        "config",
    };
    return keys;
}

}  // namespace

std::string to_string(TeacherSource s) {
    switch (s) {
        case TeacherSource::none: return "none";
        case TeacherSource::pretrain: return "pretrain";
        case TeacherSource::checkpoint: return "checkpoint";
        case TeacherSource::cache: return "cache";
    }
    return "none";
}

KvMap parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    KvMap kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

bool apply_override(KvMap& kv, const std::string& arg) {
    if (arg.rfind("--", 0) != 0) return false;
    std::string body = arg.substr(2);
    std::size_t eq = body.find('=');
    if (eq == std::string::npos)
        kv[body] = "true";  // bare flag
    else
        kv[body.substr(0, eq)] = body.substr(eq + 1);
    return true;
}

ExperimentConfig experiment_config_from(const KvMap& kv) {
    for (const auto& [k, v] : kv)
        if (!known_keys().count(k)) throw ConfigError("unknown config key: " + k);

    ExperimentConfig cfg;
    auto get = [&](const char* key) -> const std::string* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };

    if (auto* v = get("dataset")) cfg.dataset = *v;
    if (auto* v = get("csv_timestamp")) cfg.csv_timestamp = to_bool("csv_timestamp", *v);
    if (auto* v = get("lookback")) cfg.lookback = to_u64("lookback", *v);
    if (auto* v = get("horizons"))
        cfg.horizons = to_list<std::size_t>("horizons", *v, [](const std::string& k,
                                                               const std::string& p) {
            return static_cast<std::size_t>(to_u64(k, p));
        });
    if (auto* v = get("stride")) cfg.stride = to_u64("stride", *v);
    if (auto* v = get("split_train")) cfg.split.train_frac = to_double("split_train", *v);
    if (auto* v = get("split_val")) cfg.split.val_frac = to_double("split_val", *v);
    if (auto* v = get("split_test")) cfg.split.test_frac = to_double("split_test", *v);

    if (auto* v = get("student")) cfg.student = student_kind_from(*v);
    if (auto* v = get("d_f")) cfg.d_f = to_u64("d_f", *v);
    if (auto* v = get("student_patch_len")) cfg.student_patch_len = to_u64("student_patch_len", *v);
    if (auto* v = get("student_hidden")) cfg.student_hidden = to_u64("student_hidden", *v);
    if (auto* v = get("student_checkpoint")) cfg.student_checkpoint = *v;

    if (auto* v = get("teacher_source")) {
        if (*v == "none")
            cfg.teacher_source = TeacherSource::none;
        else if (*v == "pretrain")
            cfg.teacher_source = TeacherSource::pretrain;
        else if (*v == "checkpoint")
            cfg.teacher_source = TeacherSource::checkpoint;
        else if (*v == "cache")
            cfg.teacher_source = TeacherSource::cache;
        else
            throw ConfigError("teacher_source must be none|pretrain|checkpoint|cache, got " + *v);
    }
    if (auto* v = get("teacher_path")) cfg.teacher_path = *v;
    if (auto* v = get("teacher_pool")) cfg.teacher_pool = *v;
    if (auto* v = get("d_g")) cfg.d_g = to_u64("d_g", *v);
    if (auto* v = get("teacher_patch_len")) cfg.teacher_patch_len = to_u64("teacher_patch_len", *v);
    if (auto* v = get("teacher_hidden")) cfg.teacher_hidden = to_u64("teacher_hidden", *v);
    if (auto* v = get("teacher_epochs")) cfg.teacher_epochs = to_u64("teacher_epochs", *v);
    if (auto* v = get("teacher_lr")) cfg.teacher_lr = to_double("teacher_lr", *v);
    if (auto* v = get("teacher_batch_size"))
        cfg.teacher_batch_size = to_u64("teacher_batch_size", *v);
    if (auto* v = get("teacher_patience")) cfg.teacher_patience = to_u64("teacher_patience", *v);
    if (auto* v = get("teacher_seed")) cfg.teacher_seed = to_u64("teacher_seed", *v);

    if (auto* v = get("metric")) cfg.metric = align_metric_from(*v);
    if (auto* v = get("lambda")) cfg.lambda = to_double("lambda", *v);
    if (auto* v = get("sweep_metrics")) cfg.sweep_metrics = to_bool("sweep_metrics", *v);

    if (auto* v = get("learning_rate")) cfg.learning_rate = to_double("learning_rate", *v);
    if (auto* v = get("epochs")) cfg.epochs = to_u64("epochs", *v);
    if (auto* v = get("batch_size")) cfg.batch_size = to_u64("batch_size", *v);
    if (auto* v = get("patience")) cfg.patience = to_u64("patience", *v);
    if (auto* v = get("seeds"))
        cfg.seeds = to_list<std::uint64_t>("seeds", *v, [](const std::string& k,
                                                           const std::string& p) {
            return to_u64(k, p);
        });

    if (auto* v = get("out")) cfg.out_dir = *v;
    if (auto* v = get("overwrite")) cfg.overwrite = to_bool("overwrite", *v);
    if (auto* v = get("jobs")) cfg.jobs = to_u64("jobs", *v);
    if (auto* v = get("variants")) cfg.variants = *v;

    if (auto* v = get("export_split")) cfg.export_split = *v;
    if (auto* v = get("export_out")) cfg.export_out = *v;
    if (auto* v = get("tol")) cfg.tol = to_double("tol", *v);
    if (auto* v = get("fd_step")) cfg.fd_step = to_double("fd_step", *v);

    // validation
    if (cfg.dataset.empty()) throw ConfigError("dataset is required");
    if (!is_synth_spec(cfg.dataset)) require_path("dataset", cfg.dataset);
    if (cfg.horizons.empty()) throw ConfigError("horizons must be nonempty");
    if (cfg.lookback < 1 || cfg.stride < 1) throw ConfigError("lookback and stride must be >= 1");
    cfg.split.validate();
    if (cfg.lambda < 0.0) throw ConfigError("lambda must be nonnegative");
    if (cfg.learning_rate <= 0.0 || cfg.teacher_lr <= 0.0)
        throw ConfigError("learning rates must be positive");
    if (cfg.batch_size < 1 || cfg.teacher_batch_size < 1)
        throw ConfigError("batch sizes must be >= 1");
    if (cfg.seeds.empty()) throw ConfigError("seeds must be nonempty");
    if (cfg.jobs < 1) throw ConfigError("jobs must be >= 1");
    if (cfg.variants != "auto" && cfg.variants != "both" && cfg.variants != "base" &&
        cfg.variants != "reguider")
        throw ConfigError("variants must be auto|both|base|reguider");
    if (cfg.export_split != "train" && cfg.export_split != "val" && cfg.export_split != "test")
        throw ConfigError("export_split must be train|val|test");
    if (cfg.teacher_source == TeacherSource::checkpoint ||
        cfg.teacher_source == TeacherSource::cache) {
        if (cfg.teacher_path.empty())
            throw ConfigError("teacher_path is required for teacher_source=" +
                              to_string(cfg.teacher_source));
        require_path("teacher_path", cfg.teacher_path);
    }
    if (cfg.teacher_source == TeacherSource::pretrain && !cfg.teacher_pool.empty() &&
        !is_synth_spec(cfg.teacher_pool))
        require_path("teacher_pool", cfg.teacher_pool);
    if (!cfg.student_checkpoint.empty()) require_path("student_checkpoint", cfg.student_checkpoint);
    if (cfg.tol <= 0.0 || cfg.fd_step <= 0.0) throw ConfigError("tol and fd_step must be positive");
    return cfg;
}

std::string dump_config(const ExperimentConfig& cfg) {
    auto g17 = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    std::ostringstream os;
    os << "batch_size=" << cfg.batch_size << "\n";
    os << "csv_timestamp=" << (cfg.csv_timestamp ? "true" : "false") << "\n";
    os << "d_f=" << cfg.d_f << "\n";
    os << "d_g=" << cfg.d_g << "\n";
    os << "dataset=" << cfg.dataset << "\n";
    os << "epochs=" << cfg.epochs << "\n";
    os << "export_out=" << cfg.export_out << "\n";
    os << "export_split=" << cfg.export_split << "\n";
    os << "fd_step=" << g17(cfg.fd_step) << "\n";
    os << "horizons=";
    for (std::size_t i = 0; i < cfg.horizons.size(); ++i)
        os << (i ? "," : "") << cfg.horizons[i];
    os << "\n";
    os << "jobs=" << cfg.jobs << "\n";
    os << "lambda=" << g17(cfg.lambda) << "\n";
    os << "learning_rate=" << g17(cfg.learning_rate) << "\n";
    os << "lookback=" << cfg.lookback << "\n";
    os << "metric=" << to_string(cfg.metric) << "\n";
    os << "out=" << cfg.out_dir << "\n";
    os << "overwrite=" << (cfg.overwrite ? "true" : "false") << "\n";
    os << "patience=" << cfg.patience << "\n";
    os << "seeds=";
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) os << (i ? "," : "") << cfg.seeds[i];
    os << "\n";
    os << "split_test=" << g17(cfg.split.test_frac) << "\n";
    os << "split_train=" << g17(cfg.split.train_frac) << "\n";
    os << "split_val=" << g17(cfg.split.val_frac) << "\n";
    os << "stride=" << cfg.stride << "\n";
    os << "student=" << to_string(cfg.student) << "\n";
    os << "student_checkpoint=" << cfg.student_checkpoint << "\n";
    os << "student_hidden=" << cfg.student_hidden << "\n";
    os << "student_patch_len=" << cfg.student_patch_len << "\n";
    os << "sweep_metrics=" << (cfg.sweep_metrics ? "true" : "false") << "\n";
    os << "teacher_batch_size=" << cfg.teacher_batch_size << "\n";
    os << "teacher_epochs=" << cfg.teacher_epochs << "\n";
    os << "teacher_hidden=" << cfg.teacher_hidden << "\n";
    os << "teacher_lr=" << g17(cfg.teacher_lr) << "\n";
    os << "teacher_patch_len=" << cfg.teacher_patch_len << "\n";
    os << "teacher_patience=" << cfg.teacher_patience << "\n";
    os << "teacher_path=" << cfg.teacher_path << "\n";
    os << "teacher_pool=" << cfg.teacher_pool << "\n";
    os << "teacher_seed=" << cfg.teacher_seed << "\n";
    os << "teacher_source=" << to_string(cfg.teacher_source) << "\n";
    os << "tol=" << g17(cfg.tol) << "\n";
    os << "variants=" << cfg.variants << "\n";
    return os.str();
}

}  // namespace reguider
