#ifndef REGUIDER_ALIGN_HPP
#define REGUIDER_ALIGN_HPP

#include <cstdint>
#include <string>

#include "reguider/tensor.hpp"

namespace reguider {

enum class AlignMetric { euclidean, cosine, kl };

std::string to_string(AlignMetric m);
AlignMetric align_metric_from(const std::string& s);

// Trainable affine map psi taking student embeddings (width d_f) into the
// teacher's embedding space (width d_g).
struct Projector {
    Tensor weight;  // [d_f, d_g]
    Tensor bias;    // [d_g]

    bool empty() const { return weight.size() == 0; }
    std::size_t in_width() const { return weight.rank() == 2 ? weight.dim(0) : 0; }
    std::size_t out_width() const { return weight.rank() == 2 ? weight.dim(1) : 0; }
};

Projector make_projector(std::size_t d_f, std::size_t d_g, std::uint64_t seed);

struct AlignmentConfig {
    AlignMetric metric = AlignMetric::euclidean;
    double lambda = 0.5;  // trade-off weight, >= 0
    Projector projector;
};

// [B,d_f] -> [B,d_g]
Tensor project(Tape& tape, const Projector& p, const Tensor& h_f);

// Per-pair distances over rank-1 embeddings; all >= -1e-12, all 0 at h1 == h2.
Tensor sim_euclidean(Tape& tape, const Tensor& h1, const Tensor& h2);  // ||h1-h2||^2
Tensor sim_cosine(Tape& tape, const Tensor& h1, const Tensor& h2);     // 1 - cos angle
Tensor sim_kl(Tape& tape, const Tensor& h1, const Tensor& h2);  // KL(softmax h1 || softmax h2)

Tensor sim(Tape& tape, AlignMetric metric, const Tensor& h1, const Tensor& h2);

// Batch-mean distance between projected student embeddings and teacher
// embeddings. h_g_batch is expected to be stop-gradient wrapped already.
Tensor tsra_loss(Tape& tape, const AlignmentConfig& cfg, const Tensor& h_f_batch,
                 const Tensor& h_g_batch);

// Mean squared error over all entries.
Tensor pred_loss_mse(Tape& tape, const Tensor& y_hat, const Tensor& y);

struct TotalLoss {
    Tensor total;  // pred + lambda * tsra
    Tensor pred;
    Tensor tsra;
};

TotalLoss total_loss(Tape& tape, const AlignmentConfig& cfg, const Tensor& y_hat, const Tensor& y,
                     const Tensor& h_f_batch, const Tensor& h_g_batch);

}  // namespace reguider

#endif
