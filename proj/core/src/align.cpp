#include "reguider/align.hpp"

#include <cmath>

#include "reguider/rng.hpp"

namespace reguider {

std::string to_string(AlignMetric m) {
    switch (m) {
        case AlignMetric::euclidean: return "euclidean";
        case AlignMetric::cosine: return "cosine";
        case AlignMetric::kl: return "kl";
    }
    return "euclidean";
}

AlignMetric align_metric_from(const std::string& s) {
    if (s == "euclidean") return AlignMetric::euclidean;
    if (s == "cosine") return AlignMetric::cosine;
    if (s == "kl") return AlignMetric::kl;
    throw ConfigError("unknown alignment metric: " + s + " (euclidean|cosine|kl)");
}

Projector make_projector(std::size_t d_f, std::size_t d_g, std::uint64_t seed) {
    if (d_f < 1 || d_g < 1) throw ConfigError("projector widths must be at least 1");
    Projector p;
    p.weight = Tensor({d_f, d_g});
    p.bias = Tensor({d_g});
    Rng rng(mix_seed(seed, 0x0451));
    const double bound = 1.0 / std::sqrt(static_cast<double>(d_f));
    for (double& v : p.weight.values()) v = rng.uniform(-bound, bound);
    return p;
}

Tensor project(Tape& tape, const Projector& p, const Tensor& h_f) {
    if (h_f.rank() != 2 || h_f.dim(1) != p.in_width())
        throw DimensionError("project: embedding " + shape_str(h_f.shape()) +
                             " does not match projector " + shape_str(p.weight.shape()));
    return tape.add_rowwise(tape.matmul(h_f, p.weight), p.bias);
}

namespace {
void check_pair(const char* op, const Tensor& h1, const Tensor& h2) {
    if (h1.rank() != 1 || h2.rank() != 1 || h1.size() != h2.size())
        throw DimensionError(std::string(op) + ": width mismatch " + shape_str(h1.shape()) +
                             " vs " + shape_str(h2.shape()));
}
}  // namespace

Tensor sim_euclidean(Tape& tape, const Tensor& h1, const Tensor& h2) {
    check_pair("sim_euclidean", h1, h2);
    return tape.squared_norm(tape.sub(h1, h2));
}

Tensor sim_cosine(Tape& tape, const Tensor& h1, const Tensor& h2) {
    check_pair("sim_cosine", h1, h2);
    Tensor dot = tape.sum(tape.mul(h1, h2));
    Tensor denom = tape.mul(tape.norm(h1), tape.norm(h2));
    Tensor cosine = tape.div(dot, denom);
    return tape.add(Tensor::scalar(1.0), tape.scale(cosine, -1.0));
}

Tensor sim_kl(Tape& tape, const Tensor& h1, const Tensor& h2) {
    check_pair("sim_kl", h1, h2);
    if (h1.size() < 2)
        throw DimensionError("sim_kl: needs width >= 2, got " + shape_str(h1.shape()));
    Tensor p = tape.softmax(h1);
    Tensor q = tape.softmax(h2);
    Tensor log_ratio = tape.sub(tape.log_guarded(p), tape.log_guarded(q));
    return tape.sum(tape.mul(p, log_ratio));
}

Tensor sim(Tape& tape, AlignMetric metric, const Tensor& h1, const Tensor& h2) {
    switch (metric) {
        case AlignMetric::euclidean: return sim_euclidean(tape, h1, h2);
        case AlignMetric::cosine: return sim_cosine(tape, h1, h2);
        case AlignMetric::kl: return sim_kl(tape, h1, h2);
    }
    return sim_euclidean(tape, h1, h2);
}

Tensor tsra_loss(Tape& tape, const AlignmentConfig& cfg, const Tensor& h_f_batch,
                 const Tensor& h_g_batch) {
    if (h_f_batch.rank() != 2 || h_g_batch.rank() != 2 ||
        h_f_batch.dim(0) != h_g_batch.dim(0))
        throw DimensionError("tsra_loss: batch mismatch " + shape_str(h_f_batch.shape()) +
                             " vs " + shape_str(h_g_batch.shape()));
    const std::size_t batch = h_f_batch.dim(0);
    Tensor projected = project(tape, cfg.projector, h_f_batch);
    Tensor acc = sim(tape, cfg.metric, tape.row(projected, 0), tape.row(h_g_batch, 0));
    for (std::size_t b = 1; b < batch; ++b)
        acc = tape.add(acc, sim(tape, cfg.metric, tape.row(projected, b), tape.row(h_g_batch, b)));
    return tape.scale(acc, 1.0 / static_cast<double>(batch));
}

Tensor pred_loss_mse(Tape& tape, const Tensor& y_hat, const Tensor& y) {
    if (y_hat.shape() != y.shape())
        throw DimensionError("pred_loss_mse: shape mismatch " + shape_str(y_hat.shape()) +
                             " vs " + shape_str(y.shape()));
    Tensor diff = tape.sub(y_hat, y);
    return tape.scale(tape.squared_norm(diff), 1.0 / static_cast<double>(y.size()));
}

TotalLoss total_loss(Tape& tape, const AlignmentConfig& cfg, const Tensor& y_hat, const Tensor& y,
                     const Tensor& h_f_batch, const Tensor& h_g_batch) {
    if (cfg.lambda < 0.0) throw ConfigError("lambda must be nonnegative");
    TotalLoss out;
    out.pred = pred_loss_mse(tape, y_hat, y);
    out.tsra = tsra_loss(tape, cfg, h_f_batch, h_g_batch);
    out.total = tape.add(out.pred, tape.scale(out.tsra, cfg.lambda));
    return out;
}

}  // namespace reguider
