#ifndef REGUIDER_MODELS_HPP
#define REGUIDER_MODELS_HPP

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "reguider/dataset.hpp"
#include "reguider/tensor.hpp"

namespace reguider {

enum class StudentKind { two_stage_linear, patch_mlp };

std::string to_string(StudentKind k);
StudentKind student_kind_from(const std::string& s);

struct Geometry {
    std::size_t channels = 0;
    std::size_t lookback = 0;
    std::size_t horizon = 0;
};

struct Param {
    std::string name;
    Tensor value;
};

// Trainable forecaster with an explicit encoder/head split. The head sees
// only the pooled embedding H_f (plus normalization stats), never the raw
// input, so H_f is the sole information bottleneck.
struct StudentForecaster {
    StudentKind kind = StudentKind::two_stage_linear;
    Geometry geo;
    std::size_t d_f = 0;
    std::size_t patch_len = 0;  // patch_mlp only
    std::size_t hidden = 0;     // patch_mlp only
    std::uint64_t seed = 0;
    std::vector<Param> enc_params;
    std::vector<Param> head_params;

    std::vector<Tensor*> trainable();  // encoder params then head params
};

enum class TeacherKind { desk, cached };

// Frozen embedding provider. A desk teacher owns frozen patch-MLP encoder
// weights; a cached teacher serves precomputed vectors keyed by window id.
struct TeacherHandle {
    TeacherKind kind = TeacherKind::desk;
    Geometry geo;  // horizon unused after pretraining
    std::size_t d_g = 0;
    std::size_t patch_len = 0;
    std::size_t hidden = 0;
    std::uint64_t seed = 0;
    std::vector<Param> enc_params;                      // desk
    std::map<std::uint64_t, std::vector<double>> cache;  // cached
    std::uint64_t frozen_checksum = 0;
};

struct TeacherPretrainConfig {
    std::size_t lookback = 96;
    std::size_t horizon = 96;  // temporary forecasting head, discarded after
    std::size_t stride = 1;
    std::size_t d_g = 64;
    std::size_t patch_len = 16;
    std::size_t hidden = 64;
    SplitSpec split{};
    double learning_rate = 1e-3;
    std::size_t epochs = 10;
    std::size_t batch_size = 64;
    std::size_t patience = 5;
    std::uint64_t seed = 7;
};

// Deterministic initialization: every affine weight uniform in
// [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero.
StudentForecaster make_student(StudentKind kind, Geometry geo, std::size_t d_f,
                               std::size_t patch_len, std::size_t hidden, std::uint64_t seed);

TeacherHandle make_desk_teacher(Geometry geo, std::size_t d_g, std::size_t patch_len,
                                std::size_t hidden, std::uint64_t seed);

TeacherHandle make_cached_teacher(std::size_t d_g,
                                  std::map<std::uint64_t, std::vector<double>> cache);

// [B,C,L] -> [B,d_f]
Tensor encode_student(Tape& tape, const StudentForecaster& m, const Tensor& x_batch);

// [B,d_f] -> [B,C,T], denormalized per sample
Tensor predict_head(Tape& tape, const StudentForecaster& m, const Tensor& h_f,
                    std::span<const NormState> norms);

// [B,C,L] -> [B,d_g]; the result is stop-gradient wrapped, so no loss built
// on it can reach the teacher parameters.
Tensor encode_teacher(Tape& tape, const TeacherHandle& t, const Tensor& x_batch,
                      std::span<const std::uint64_t> window_ids);

// FNV-1a over the frozen parameters (desk) or cache payload (cached).
std::uint64_t teacher_digest(const TeacherHandle& t);

struct RunRecord;

// Trains a patch-MLP encoder plus a throwaway forecasting head with plain
// MSE on the series' train split, then freezes the encoder. When record is
// given it receives the pretraining run's per-epoch history.
TeacherHandle pretrain_teacher(const MultivariateSeries& series, const TeacherPretrainConfig& cfg,
                               RunRecord* record = nullptr);

}  // namespace reguider

#endif
