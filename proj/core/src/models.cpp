#include "reguider/models.hpp"

#include <cmath>
#include <cstring>
#include <utility>

#include "reguider/rng.hpp"
#include "reguider/train.hpp"

namespace reguider {

namespace {

std::uint64_t fnv1a64(std::uint64_t h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a64_values(std::uint64_t h, const std::vector<double>& v) {
    for (double x : v) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, sizeof bits);
        unsigned char le[8];
        for (int b = 0; b < 8; ++b) le[b] = static_cast<unsigned char>(bits >> (8 * b));
        h = fnv1a64(h, le, 8);
    }
    return h;
}

Param make_affine_weight(const std::string& name, std::size_t fan_in, std::size_t fan_out,
                         Rng& rng) {
    Tensor w({fan_in, fan_out});
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : w.values()) v = rng.uniform(-bound, bound);
    return {name, std::move(w)};
}

Param make_affine_bias(const std::string& name, std::size_t fan_out) {
    return {name, Tensor({fan_out})};
}

void append_head(std::vector<Param>& head, const Geometry& geo, std::size_t d_f, Rng& rng) {
    head.push_back(make_affine_weight("head.w", d_f, geo.channels * geo.horizon, rng));
    head.push_back(make_affine_bias("head.b", geo.channels * geo.horizon));
}

// flatten [B,C,L] into [B*C*P, patch_len], run the two-layer MLP, mean-pool
// the C*P patch vectors of every sample
Tensor patch_mlp_forward(Tape& tape, std::span<const Param> enc, const Tensor& x_batch,
                         const Geometry& geo, std::size_t patch_len, std::size_t d_out) {
    const std::size_t batch = x_batch.dim(0);
    const std::size_t patches = geo.lookback / patch_len;
    Tensor flat = tape.reshape(x_batch, {batch * geo.channels * patches, patch_len});
    Tensor h = tape.relu(tape.add_rowwise(tape.matmul(flat, enc[0].value), enc[1].value));
    Tensor e = tape.add_rowwise(tape.matmul(h, enc[2].value), enc[3].value);
    Tensor grouped = tape.reshape(e, {batch, geo.channels * patches, d_out});
    return tape.mean_axis(grouped, 1);
}

void check_batch_geometry(const char* who, const Tensor& x, const Geometry& geo) {
    if (x.rank() != 3 || x.dim(1) != geo.channels || x.dim(2) != geo.lookback)
        throw DimensionError(std::string(who) + ": input " + shape_str(x.shape()) +
                             " does not match geometry [Bx" + std::to_string(geo.channels) + "x" +
                             std::to_string(geo.lookback) + "]");
}

}  // namespace

std::string to_string(StudentKind k) {
    return k == StudentKind::two_stage_linear ? "two_stage_linear" : "patch_mlp";
}

StudentKind student_kind_from(const std::string& s) {
    if (s == "two_stage_linear") return StudentKind::two_stage_linear;
    if (s == "patch_mlp") return StudentKind::patch_mlp;
    throw ConfigError("unknown student kind: " + s);
}

std::vector<Tensor*> StudentForecaster::trainable() {
    std::vector<Tensor*> out;
    for (Param& p : enc_params) out.push_back(&p.value);
    for (Param& p : head_params) out.push_back(&p.value);
    return out;
}

StudentForecaster make_student(StudentKind kind, Geometry geo, std::size_t d_f,
                               std::size_t patch_len, std::size_t hidden, std::uint64_t seed) {
    if (geo.channels < 1 || geo.lookback < 1 || geo.horizon < 1)
        throw ConfigError("student geometry must be positive");
    if (d_f < 1) throw ConfigError("d_f must be at least 1");

    StudentForecaster m;
    m.kind = kind;
    m.geo = geo;
    m.d_f = d_f;
    m.seed = seed;
    Rng rng(mix_seed(seed, 0x5744));

    if (kind == StudentKind::two_stage_linear) {
        m.enc_params.push_back(
            make_affine_weight("enc.w", geo.channels * geo.lookback, d_f, rng));
        m.enc_params.push_back(make_affine_bias("enc.b", d_f));
    } else {
        if (patch_len < 1 || geo.lookback % patch_len != 0)
            throw ConfigError("lookback " + std::to_string(geo.lookback) +
                              " is not divisible by patch length " + std::to_string(patch_len));
        if (hidden < 1) throw ConfigError("hidden width must be at least 1");
        m.patch_len = patch_len;
        m.hidden = hidden;
        m.enc_params.push_back(make_affine_weight("enc.w1", patch_len, hidden, rng));
        m.enc_params.push_back(make_affine_bias("enc.b1", hidden));
        m.enc_params.push_back(make_affine_weight("enc.w2", hidden, d_f, rng));
        m.enc_params.push_back(make_affine_bias("enc.b2", d_f));
    }
    append_head(m.head_params, geo, d_f, rng);
    return m;
}

Tensor encode_student(Tape& tape, const StudentForecaster& m, const Tensor& x_batch) {
    check_batch_geometry("encode_student", x_batch, m.geo);
    const std::size_t batch = x_batch.dim(0);
    if (m.kind == StudentKind::two_stage_linear) {
        Tensor flat = tape.reshape(x_batch, {batch, m.geo.channels * m.geo.lookback});
        return tape.relu(
            tape.add_rowwise(tape.matmul(flat, m.enc_params[0].value), m.enc_params[1].value));
    }
    return patch_mlp_forward(tape, m.enc_params, x_batch, m.geo, m.patch_len, m.d_f);
}

Tensor predict_head(Tape& tape, const StudentForecaster& m, const Tensor& h_f,
                    std::span<const NormState> norms) {
    if (h_f.rank() != 2 || h_f.dim(1) != m.d_f)
        throw DimensionError("predict_head: embedding " + shape_str(h_f.shape()) +
                             " does not match d_f=" + std::to_string(m.d_f));
    const std::size_t batch = h_f.dim(0);
    if (norms.size() != batch)
        throw ContractError("predict_head: " + std::to_string(norms.size()) +
                            " norm states for batch of " + std::to_string(batch));

    Tensor z = tape.add_rowwise(tape.matmul(h_f, m.head_params[0].value), m.head_params[1].value);
    Tensor pred = tape.reshape(z, {batch, m.geo.channels, m.geo.horizon});

    // undo per-window instance normalization; statistics are constants
    Tensor sd({batch, m.geo.channels, m.geo.horizon});
    Tensor mu({batch, m.geo.channels, m.geo.horizon});
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < m.geo.channels; ++c)
            for (std::size_t t = 0; t < m.geo.horizon; ++t) {
                const std::size_t i = (b * m.geo.channels + c) * m.geo.horizon + t;
                sd.values()[i] = norms[b].stddev[c];
                mu.values()[i] = norms[b].mean[c];
            }
    return tape.add(tape.mul(pred, sd), mu);
}

TeacherHandle make_desk_teacher(Geometry geo, std::size_t d_g, std::size_t patch_len,
                                std::size_t hidden, std::uint64_t seed) {
    if (patch_len < 1 || geo.lookback % patch_len != 0)
        throw ConfigError("teacher lookback " + std::to_string(geo.lookback) +
                          " is not divisible by patch length " + std::to_string(patch_len));
    TeacherHandle t;
    t.kind = TeacherKind::desk;
    t.geo = geo;
    t.d_g = d_g;
    t.patch_len = patch_len;
    t.hidden = hidden;
    t.seed = seed;
    Rng rng(mix_seed(seed, 0x7EAC));
    t.enc_params.push_back(make_affine_weight("enc.w1", patch_len, hidden, rng));
    t.enc_params.push_back(make_affine_bias("enc.b1", hidden));
    t.enc_params.push_back(make_affine_weight("enc.w2", hidden, d_g, rng));
    t.enc_params.push_back(make_affine_bias("enc.b2", d_g));
    t.frozen_checksum = teacher_digest(t);
    return t;
}

TeacherHandle make_cached_teacher(std::size_t d_g,
                                  std::map<std::uint64_t, std::vector<double>> cache) {
    if (d_g < 1) throw ConfigError("cached teacher requires d_g >= 1");
    TeacherHandle t;
    t.kind = TeacherKind::cached;
    t.d_g = d_g;
    for (const auto& [id, vec] : cache)
        if (vec.size() != d_g)
            throw ContractError("cache vector for window " + std::to_string(id) + " has " +
                                std::to_string(vec.size()) + " entries, expected " +
                                std::to_string(d_g));
    t.cache = std::move(cache);
    t.frozen_checksum = teacher_digest(t);
    return t;
}

Tensor encode_teacher(Tape& tape, const TeacherHandle& t, const Tensor& x_batch,
                      std::span<const std::uint64_t> window_ids) {
    if (t.kind == TeacherKind::desk) {
        check_batch_geometry("encode_teacher", x_batch, t.geo);
        Tensor h = patch_mlp_forward(tape, t.enc_params, x_batch, t.geo, t.patch_len, t.d_g);
        return tape.stop_gradient(h);
    }
    const std::size_t batch = x_batch.dim(0);
    if (window_ids.size() != batch)
        throw ContractError("encode_teacher: " + std::to_string(window_ids.size()) +
                            " window ids for batch of " + std::to_string(batch));
    Tensor h({batch, t.d_g});
    for (std::size_t b = 0; b < batch; ++b) {
        auto it = t.cache.find(window_ids[b]);
        if (it == t.cache.end())
            throw ContractError("teacher cache has no embedding for window id " +
                                std::to_string(window_ids[b]));
        std::copy(it->second.begin(), it->second.end(), h.values().begin() + b * t.d_g);
    }
    return tape.stop_gradient(h);
}

std::uint64_t teacher_digest(const TeacherHandle& t) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    if (t.kind == TeacherKind::desk) {
        for (const Param& p : t.enc_params) {
            h = fnv1a64(h, p.name.data(), p.name.size());
            h = fnv1a64_values(h, p.value.values());
        }
    } else {
        for (const auto& [id, vec] : t.cache) {
            unsigned char le[8];
            for (int b = 0; b < 8; ++b) le[b] = static_cast<unsigned char>(id >> (8 * b));
            h = fnv1a64(h, le, 8);
            h = fnv1a64_values(h, vec);
        }
    }
    return h;
}

TeacherHandle pretrain_teacher(const MultivariateSeries& series, const TeacherPretrainConfig& cfg,
                               RunRecord* record) {
    Geometry geo{series.channels(), cfg.lookback, cfg.horizon};
    StudentForecaster proxy =
        make_student(StudentKind::patch_mlp, geo, cfg.d_g, cfg.patch_len, cfg.hidden, cfg.seed);

    TrainConfig tc;
    tc.learning_rate = cfg.learning_rate;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.seed = cfg.seed;
    tc.early_stop_patience = cfg.patience;
    tc.alignment.lambda = 0.0;

    SplitSeries split = chronological_split(series, cfg.split, cfg.lookback);
    DataSplits splits;
    splits.train = make_windows(split.train, cfg.lookback, cfg.horizon, cfg.stride);
    splits.val = make_windows(split.val, cfg.lookback, cfg.horizon, cfg.stride);
    splits.test = make_windows(split.test, cfg.lookback, cfg.horizon, cfg.stride);
    RunRecord rec = fit(proxy, nullptr, splits, tc);
    if (record) *record = std::move(rec);

    // keep the encoder, drop the forecasting head, freeze
    TeacherHandle t;
    t.kind = TeacherKind::desk;
    t.geo = geo;
    t.d_g = cfg.d_g;
    t.patch_len = cfg.patch_len;
    t.hidden = cfg.hidden;
    t.seed = cfg.seed;
    t.enc_params = std::move(proxy.enc_params);
    t.frozen_checksum = teacher_digest(t);
    return t;
}

}  // namespace reguider
