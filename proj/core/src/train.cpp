#include "reguider/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "reguider/io.hpp"
#include "reguider/rng.hpp"

namespace reguider {

namespace {

constexpr std::size_t kEvalBatch = 256;

std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Tensor batch_x_tensor(std::span<const WindowPair> windows, std::span<const std::size_t> idx) {
    const WindowPair& first = windows[idx.empty() ? 0 : idx[0]];
    const std::size_t b = idx.size(), c = first.channels, l = first.lookback;
    Tensor x({b, c, l});
    for (std::size_t i = 0; i < b; ++i)
        std::copy(windows[idx[i]].x.begin(), windows[idx[i]].x.end(),
                  x.values().begin() + static_cast<std::ptrdiff_t>(i * c * l));
    return x;
}

struct ParamSnapshot {
    std::vector<std::vector<double>> values;
};

ParamSnapshot snapshot(const std::vector<Tensor*>& params) {
    ParamSnapshot s;
    s.values.reserve(params.size());
    for (const Tensor* p : params) s.values.push_back(p->values());
    return s;
}

void restore(const std::vector<Tensor*>& params, const ParamSnapshot& s) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->values() = s.values[i];
}

}  // namespace

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

Adam::Adam(double learning_rate, std::vector<Tensor*> params)
    : lr_(learning_rate), params_(std::move(params)) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Tensor* p : params_) {
        m_.emplace_back(p->size(), 0.0);
        v_.emplace_back(p->size(), 0.0);
    }
}

void Adam::zero_grad() {
    for (Tensor* p : params_) p->zero_grad();
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = *params_[i];
        const bool has = p.has_grad();
        const std::vector<double>* g = has ? &p.grad() : nullptr;
        auto& m = m_[i];
        auto& v = v_[i];
        auto& w = p.values();
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double gj = has ? (*g)[j] : 0.0;
            m[j] = kBeta1 * m[j] + (1.0 - kBeta1) * gj;
            v[j] = kBeta2 * v[j] + (1.0 - kBeta2) * gj * gj;
            const double mh = m[j] / bc1;
            const double vh = v[j] / bc2;
            w[j] -= lr_ * mh / (std::sqrt(vh) + kEps);
        }
    }
}

// ---------------------------------------------------------------------------
// batches and steps
// ---------------------------------------------------------------------------

Batch assemble_batch(std::span<const WindowPair> raw, std::span<const WindowPair> normalized,
                     std::span<const NormState> stats, std::span<const std::size_t> indices) {
    if (indices.empty()) throw ContractError("assemble_batch: empty index list");
    const WindowPair& first = raw[indices[0]];
    const std::size_t b = indices.size();
    const std::size_t c = first.channels, l = first.lookback, t = first.horizon;

    Batch out;
    out.x = Tensor({b, c, l});
    out.y = Tensor({b, c, t});
    out.norms.reserve(b);
    out.origins.reserve(b);
    for (std::size_t i = 0; i < b; ++i) {
        const std::size_t w = indices[i];
        std::copy(normalized[w].x.begin(), normalized[w].x.end(),
                  out.x.values().begin() + static_cast<std::ptrdiff_t>(i * c * l));
        std::copy(raw[w].y.begin(), raw[w].y.end(),
                  out.y.values().begin() + static_cast<std::ptrdiff_t>(i * c * t));
        out.norms.push_back(stats[w]);
        out.origins.push_back(raw[w].origin);
    }
    return out;
}

StepLosses train_step(StudentForecaster& student, const TeacherHandle* teacher,
                      AlignmentConfig& align, const Batch& batch, Adam& opt,
                      const TrainConfig& cfg) {
    opt.zero_grad();
    Tape tape;
    for (Tensor* p : student.trainable()) tape.watch(*p);
    if (teacher) {
        tape.watch(align.projector.weight);
        tape.watch(align.projector.bias);
    }

    Tensor h_f = encode_student(tape, student, batch.x);
    Tensor y_hat = predict_head(tape, student, h_f, batch.norms);

    StepLosses losses;
    Tensor loss;
    if (teacher) {
        Tensor h_g = encode_teacher(tape, *teacher, batch.x, batch.origins);
        TotalLoss tl = total_loss(tape, align, y_hat, batch.y, h_f, h_g);
        losses.pred = tl.pred.item();
        losses.tsra = tl.tsra.item();
        losses.total = tl.total.item();
        loss = tl.total;
    } else {
        loss = pred_loss_mse(tape, y_hat, batch.y);
        losses.pred = loss.item();
        losses.total = losses.pred;
    }

    if (!std::isfinite(losses.pred) || !std::isfinite(losses.tsra) ||
        !std::isfinite(losses.total)) {
        const char* which = !std::isfinite(losses.pred)   ? "L_pred"
                            : !std::isfinite(losses.tsra) ? "L_TSRA"
                                                          : "L_total";
        throw NumericError(std::string("non-finite training loss in ") + which +
                           " (L_pred=" + fmt_g17(losses.pred) +
                           ", L_TSRA=" + fmt_g17(losses.tsra) +
                           ", L_total=" + fmt_g17(losses.total) + ")");
    }

    tape.backward(loss);
    opt.step();
    return losses;
}

// ---------------------------------------------------------------------------
// fit / evaluate
// ---------------------------------------------------------------------------

RunRecord fit(StudentForecaster& student, const TeacherHandle* teacher, const DataSplits& splits,
              const TrainConfig& cfg) {
    if (splits.train.empty() || splits.val.empty() || splits.test.empty())
        throw ContractError("fit: every split must contain at least one window");

    std::vector<WindowPair> norm;
    std::vector<NormState> stats;
    norm.reserve(splits.train.size());
    stats.reserve(splits.train.size());
    for (const WindowPair& w : splits.train) {
        auto [nw, ns] = instance_normalize(w);
        norm.push_back(std::move(nw));
        stats.push_back(std::move(ns));
    }

    AlignmentConfig align = cfg.alignment;
    if (teacher) {
        if (align.projector.empty())
            align.projector = make_projector(student.d_f, teacher->d_g, cfg.seed);
        if (align.projector.in_width() != student.d_f ||
            align.projector.out_width() != teacher->d_g)
            throw ConfigError("projector " + shape_str(align.projector.weight.shape()) +
                              " does not map d_f=" + std::to_string(student.d_f) +
                              " to d_g=" + std::to_string(teacher->d_g));
    }

    std::vector<Tensor*> params = student.trainable();
    if (teacher) {
        params.push_back(&align.projector.weight);
        params.push_back(&align.projector.bias);
    }
    Adam opt(cfg.learning_rate, params);

    RunRecord record;
    record.teacher_checksum_before = teacher ? teacher_digest(*teacher) : 0;
    {
        std::ostringstream cs;
        cs << "student=" << to_string(student.kind) << "\nd_f=" << student.d_f
           << "\nlearning_rate=" << fmt_g17(cfg.learning_rate) << "\nepochs=" << cfg.epochs
           << "\nbatch_size=" << cfg.batch_size << "\nseed=" << cfg.seed
           << "\npatience=" << cfg.early_stop_patience
           << "\nmetric=" << to_string(cfg.alignment.metric)
           << "\nlambda=" << fmt_g17(cfg.alignment.lambda)
           << "\nteacher=" << (teacher ? (teacher->kind == TeacherKind::desk ? "desk" : "cached")
                                       : "none")
           << "\n";
        record.config_snapshot = cs.str();
    }

    double best_val = std::numeric_limits<double>::infinity();
    ParamSnapshot best;
    bool have_best = false;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto batches = epoch_batches(splits.train.size(), cfg.batch_size, cfg.seed, epoch);
        double sum_pred = 0.0, sum_tsra = 0.0, sum_total = 0.0;
        std::size_t samples = 0;
        for (std::size_t s = 0; s < batches.size(); ++s) {
            Batch b = assemble_batch(splits.train, norm, stats, batches[s]);
            StepLosses losses;
            try {
                losses = train_step(student, teacher, align, b, opt, cfg);
            } catch (const NumericError& e) {
                throw NumericError("epoch " + std::to_string(epoch) + ", step " +
                                   std::to_string(s) + ": " + e.what());
            }
            const auto bsz = static_cast<double>(batches[s].size());
            sum_pred += losses.pred * bsz;
            sum_tsra += losses.tsra * bsz;
            sum_total += losses.total * bsz;
            samples += batches[s].size();
        }

        EpochStats es;
        const auto n = static_cast<double>(samples);
        es.pred = sum_pred / n;
        es.tsra = sum_tsra / n;
        es.total = sum_total / n;
        es.val_mse = evaluate(student, splits.val).mse;
        record.epochs.push_back(es);

        if (es.val_mse < best_val) {
            best_val = es.val_mse;
            record.best_epoch = epoch;
            if (cfg.early_stop_patience > 0) {
                best = snapshot(params);
                have_best = true;
            }
        }
        if (cfg.early_stop_patience > 0 &&
            epoch - record.best_epoch >= cfg.early_stop_patience)
            break;
    }

    if (have_best) restore(params, best);

    record.test = evaluate(student, splits.test);
    record.teacher_checksum_after = teacher ? teacher_digest(*teacher) : 0;
    if (record.teacher_checksum_after != record.teacher_checksum_before)
        throw ContractError("teacher parameters changed during training");
    return record;
}

Metrics evaluate(const StudentForecaster& student, std::span<const WindowPair> windows) {
    if (windows.empty()) throw ContractError("evaluate: empty window list");
    double se = 0.0, ae = 0.0;
    std::size_t n = 0;
    for (std::size_t base = 0; base < windows.size(); base += kEvalBatch) {
        const std::size_t end = std::min(windows.size(), base + kEvalBatch);
        const std::size_t b = end - base;
        std::vector<NormState> norms;
        norms.reserve(b);
        const std::size_t c = windows[base].channels, l = windows[base].lookback;
        Tensor x({b, c, l});
        for (std::size_t i = 0; i < b; ++i) {
            auto [nw, ns] = instance_normalize(windows[base + i]);
            std::copy(nw.x.begin(), nw.x.end(),
                      x.values().begin() + static_cast<std::ptrdiff_t>(i * c * l));
            norms.push_back(std::move(ns));
        }
        Tape tape;
        Tensor pred = predict_head(tape, student, encode_student(tape, student, x), norms);
        const std::size_t per = windows[base].channels * windows[base].horizon;
        for (std::size_t i = 0; i < b; ++i) {
            const auto& y = windows[base + i].y;
            for (std::size_t j = 0; j < per; ++j) {
                const double e = pred.values()[i * per + j] - y[j];
                se += e * e;
                ae += std::abs(e);
                ++n;
            }
        }
    }
    Metrics m;
    m.mse = se / static_cast<double>(n);
    m.mae = ae / static_cast<double>(n);
    return m;
}

// ---------------------------------------------------------------------------
// gradient checking
// ---------------------------------------------------------------------------

GradCheckReport grad_check(const std::function<Tensor(Tape&)>& build_loss,
                           std::span<const std::pair<std::string, Tensor*>> params, double h,
                           double tol, std::size_t max_coords) {
    if (h <= 0.0) throw ContractError("grad_check: h must be positive");

    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        for (const auto& [name, p] : params) {
            p->zero_grad();
            tape.watch(*p);
        }
        Tensor loss = build_loss(tape);
        if (loss.size() != 1) throw ContractError("grad_check: loss closure must return a scalar");
        tape.backward(loss);
        for (const auto& [name, p] : params)
            analytic.push_back(p->has_grad() ? p->grad() : std::vector<double>(p->size(), 0.0));
    }

    std::size_t total = 0;
    for (const auto& [name, p] : params) total += p->size();
    const std::size_t n_check = std::min(total, max_coords);

    GradCheckReport report;
    report.pass = true;
    bool worst_set = false;
    for (std::size_t k = 0; k < n_check; ++k) {
        // deterministic, evenly spaced coordinate sample
        const std::size_t coord = total <= max_coords ? k : (k * total) / n_check;
        std::size_t pi = 0, off = coord;
        while (off >= params[pi].second->size()) {
            off -= params[pi].second->size();
            ++pi;
        }
        Tensor& p = *params[pi].second;
        const double saved = p.values()[off];

        p.values()[off] = saved + h;
        double f_plus;
        {
            Tape tape;
            f_plus = build_loss(tape).item();
        }
        p.values()[off] = saved - h;
        double f_minus;
        {
            Tape tape;
            f_minus = build_loss(tape).item();
        }
        p.values()[off] = saved;

        const double numeric = (f_plus - f_minus) / (2.0 * h);
        const double a = analytic[pi][off];
        const bool finite = std::isfinite(numeric) && std::isfinite(a);
        const double rel =
            finite ? std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric))
                   : std::numeric_limits<double>::infinity();
        ++report.coords_checked;
        if (!worst_set || rel > report.max_rel_err) {
            report.max_rel_err = rel;
            report.worst = {params[pi].first, off, a, numeric, rel};
            worst_set = true;
        }
        if (!finite || rel >= tol) report.pass = false;
    }
    return report;
}

std::vector<std::pair<AlignMetric, GradCheckReport>> check_training_gradients(double h,
                                                                              double tol) {
    // small fixed geometry exercising every differentiable path
    const Geometry geo{2, 8, 4};
    const std::size_t d_f = 6, d_g = 5, batch = 3;

    Rng rng(20240913);
    MultivariateSeries series;
    series.names = {"a", "b"};
    series.steps = 40;
    series.values.resize(2 * series.steps);
    for (double& v : series.values) v = rng.uniform(-2.0, 2.0);
    auto windows = make_windows(series, geo.lookback, geo.horizon, 7);
    if (windows.size() < batch) throw ContractError("gradcheck fixture too small");

    std::vector<WindowPair> raw(windows.begin(), windows.begin() + batch);
    std::vector<WindowPair> norm;
    std::vector<NormState> stats;
    for (const WindowPair& w : raw) {
        auto [nw, ns] = instance_normalize(w);
        norm.push_back(std::move(nw));
        stats.push_back(std::move(ns));
    }
    std::vector<std::size_t> idx = {0, 1, 2};
    Batch b = assemble_batch(raw, norm, stats, idx);

    StudentForecaster student =
        make_student(StudentKind::two_stage_linear, geo, d_f, 0, 0, 11);
    TeacherHandle teacher = make_desk_teacher(geo, d_g, 4, 8, 23);

    std::vector<std::pair<AlignMetric, GradCheckReport>> out;
    for (AlignMetric metric : {AlignMetric::euclidean, AlignMetric::cosine, AlignMetric::kl}) {
        AlignmentConfig align;
        align.metric = metric;
        align.lambda = 0.7;
        align.projector = make_projector(d_f, d_g, 31);

        std::vector<std::pair<std::string, Tensor*>> params;
        for (Param& p : student.enc_params) params.emplace_back(p.name, &p.value);
        for (Param& p : student.head_params) params.emplace_back(p.name, &p.value);
        params.emplace_back("psi.w", &align.projector.weight);
        params.emplace_back("psi.b", &align.projector.bias);

        auto build = [&](Tape& tape) {
            Tensor h_f = encode_student(tape, student, b.x);
            Tensor y_hat = predict_head(tape, student, h_f, b.norms);
            Tensor h_g = encode_teacher(tape, teacher, b.x, b.origins);
            return total_loss(tape, align, y_hat, b.y, h_f, h_g).total;
        };
        out.emplace_back(metric, grad_check(build, params, h, tol));
    }
    return out;
}

// ---------------------------------------------------------------------------
// embedding export
// ---------------------------------------------------------------------------

TrendLabel trend_label(const WindowPair& w) {
    double mx = 0.0, my = 0.0;
    for (double v : w.x) mx += v;
    for (double v : w.y) my += v;
    mx /= static_cast<double>(w.x.size());
    my /= static_cast<double>(w.y.size());
    double var = 0.0;
    for (double v : w.x) var += (v - mx) * (v - mx);
    var /= static_cast<double>(w.x.size());
    const double threshold = 0.05 * std::sqrt(var);
    const double delta = my - mx;
    if (delta > threshold) return TrendLabel::up;
    if (delta < -threshold) return TrendLabel::down;
    return TrendLabel::flat;
}

std::size_t export_embeddings(const StudentForecaster& student, const TeacherHandle* teacher,
                              std::span<const WindowPair> windows, const std::string& out_path) {
    if (windows.empty()) throw ContractError("export_embeddings: empty window list");

    EmbeddingCache cache;
    cache.d_f = static_cast<std::uint32_t>(student.d_f);
    cache.d_g = teacher ? static_cast<std::uint32_t>(teacher->d_g) : 0;
    cache.records.reserve(windows.size());

    for (std::size_t base = 0; base < windows.size(); base += kEvalBatch) {
        const std::size_t end = std::min(windows.size(), base + kEvalBatch);
        const std::size_t b = end - base;
        const std::size_t c = windows[base].channels, l = windows[base].lookback;
        Tensor x({b, c, l});
        std::vector<std::uint64_t> ids;
        ids.reserve(b);
        for (std::size_t i = 0; i < b; ++i) {
            auto [nw, ns] = instance_normalize(windows[base + i]);
            std::copy(nw.x.begin(), nw.x.end(),
                      x.values().begin() + static_cast<std::ptrdiff_t>(i * c * l));
            ids.push_back(windows[base + i].origin);
        }
        Tape tape;
        Tensor h_f = encode_student(tape, student, x);
        Tensor h_g;
        if (teacher) h_g = encode_teacher(tape, *teacher, x, ids);

        for (std::size_t i = 0; i < b; ++i) {
            EmbeddingRecord r;
            r.origin = windows[base + i].origin;
            r.label = static_cast<std::uint8_t>(trend_label(windows[base + i]));
            r.h_f.assign(h_f.values().begin() + static_cast<std::ptrdiff_t>(i * student.d_f),
                         h_f.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * student.d_f));
            if (teacher)
                r.h_g.assign(
                    h_g.values().begin() + static_cast<std::ptrdiff_t>(i * teacher->d_g),
                    h_g.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * teacher->d_g));
            cache.records.push_back(std::move(r));
        }
    }

    write_embedding_cache(out_path, cache);
    return cache.records.size();
}

}  // namespace reguider
