#ifndef REGUIDER_TRAIN_HPP
#define REGUIDER_TRAIN_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "reguider/align.hpp"
#include "reguider/dataset.hpp"
#include "reguider/models.hpp"
#include "reguider/tensor.hpp"

namespace reguider {

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    AlignmentConfig alignment;
    std::size_t early_stop_patience = 5;  // 0 disables early stopping
};

// Adam with bias correction; beta1=0.9, beta2=0.999, eps=1e-8. Parameters
// are identified positionally and must stay alive and in place.
class Adam {
public:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    Adam(double learning_rate, std::vector<Tensor*> params);

    void zero_grad();
    void step();  // consumes the gradients currently held by the params
    std::size_t steps_taken() const { return t_; }

private:
    double lr_;
    std::vector<Tensor*> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::size_t t_ = 0;
};

struct Batch {
    Tensor x;  // [B,C,L], instance-normalized
    Tensor y;  // [B,C,T], raw scale
    std::vector<NormState> norms;
    std::vector<std::uint64_t> origins;
};

Batch assemble_batch(std::span<const WindowPair> raw, std::span<const WindowPair> normalized,
                     std::span<const NormState> stats, std::span<const std::size_t> indices);

struct StepLosses {
    double pred = 0.0;
    double tsra = 0.0;
    double total = 0.0;
};

// One forward/backward/update cycle on a fresh tape. Updates the student
// parameters and (when a teacher is given) the projector; the teacher is
// never watched, so its parameters cannot move.
StepLosses train_step(StudentForecaster& student, const TeacherHandle* teacher,
                      AlignmentConfig& align, const Batch& batch, Adam& opt,
                      const TrainConfig& cfg);

struct Metrics {
    double mse = 0.0;
    double mae = 0.0;
};

struct EpochStats {
    double pred = 0.0;
    double tsra = 0.0;
    double total = 0.0;
    double val_mse = 0.0;
};

struct RunRecord {
    std::vector<EpochStats> epochs;
    Metrics test;
    std::string config_snapshot;
    std::uint64_t teacher_checksum_before = 0;
    std::uint64_t teacher_checksum_after = 0;
    std::size_t best_epoch = 0;
};

struct DataSplits {
    std::vector<WindowPair> train;
    std::vector<WindowPair> val;
    std::vector<WindowPair> test;
};

// Full training run: shuffled epochs of train_step, per-epoch validation,
// optional early stopping with best-parameter restore, final test metrics.
// Deterministic given (cfg, splits).
RunRecord fit(StudentForecaster& student, const TeacherHandle* teacher, const DataSplits& splits,
              const TrainConfig& cfg);

// Inference path. Deliberately accepts no teacher: forecasting never needs
// one. MSE/MAE over all windows, channels and horizon steps, computed on
// denormalized predictions against raw targets.
Metrics evaluate(const StudentForecaster& student, std::span<const WindowPair> windows);

struct GradCheckCoord {
    std::string param;
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
};

struct GradCheckReport {
    bool pass = false;
    double max_rel_err = 0.0;
    GradCheckCoord worst;
    std::size_t coords_checked = 0;
};

// Compares analytic gradients of build_loss against central differences on
// a deterministic sample of at most max_coords parameter coordinates.
// rel err = |a - n| / max(1e-8, |a| + |n|).
GradCheckReport grad_check(const std::function<Tensor(Tape&)>& build_loss,
                           std::span<const std::pair<std::string, Tensor*>> params, double h,
                           double tol, std::size_t max_coords = 200);

// Gradcheck of the complete training objective (prediction + alignment) on
// a small fixed geometry, one report per alignment metric.
std::vector<std::pair<AlignMetric, GradCheckReport>> check_training_gradients(double h,
                                                                              double tol);

enum class TrendLabel : std::uint8_t { down = 0, flat = 1, up = 2 };

// Window trend from raw values: sign of mean(y) - mean(x), flat inside
// +-0.05 of x's pooled standard deviation.
TrendLabel trend_label(const WindowPair& w);

// Writes one record per window (origin, trend label, H_f, and H_g when a
// teacher is given) in the embedding-cache format. Returns records written.
std::size_t export_embeddings(const StudentForecaster& student, const TeacherHandle* teacher,
                              std::span<const WindowPair> windows, const std::string& out_path);

}  // namespace reguider

#endif
