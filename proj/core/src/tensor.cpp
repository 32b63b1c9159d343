#include "reguider/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>

namespace reguider {

namespace {

constexpr double kGuard = 1e-12;

std::atomic<std::uint64_t> g_tape_counter{1};

std::size_t shape_product(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

void check_dims_positive(const Shape& s) {
    for (std::size_t d : s)
        if (d == 0) throw DimensionError("tensor shape " + shape_str(s) + " has a zero dimension");
}

// guarded denominator: max(|x|, 1e-12) carrying the sign of x (sign(0) = +1)
double guard_denom(double x) {
    if (x >= kGuard || x <= -kGuard) return x;
    return x >= 0.0 ? kGuard : -kGuard;
}

}  // namespace

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << 'x';
        os << s[i];
    }
    os << ']';
    return os.str();
}

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
    check_dims_positive(shape_);
    values_.assign(shape_product(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    check_dims_positive(shape_);
    if (shape_product(shape_) != values_.size())
        throw DimensionError("shape " + shape_str(shape_) + " does not match " +
                             std::to_string(values_.size()) + " values");
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::full(Shape shape, double v) {
    Tensor t(std::move(shape));
    std::fill(t.values_.begin(), t.values_.end(), v);
    return t;
}

double Tensor::item() const {
    if (size() != 1)
        throw ContractError("item() requires a scalar tensor, got shape " + shape_str(shape_));
    return values_[0];
}

std::vector<double>& Tensor::grad() {
    if (grad_.empty()) grad_.assign(values_.size(), 0.0);
    return grad_;
}

const std::vector<double>& Tensor::grad() const {
    if (grad_.empty())
        throw ContractError("tensor has no gradient (never touched by backward)");
    return grad_;
}

void Tensor::zero_grad() {
    if (!grad_.empty()) std::fill(grad_.begin(), grad_.end(), 0.0);
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

Tape::Tape() : uid_(g_tape_counter.fetch_add(1, std::memory_order_relaxed)) {}

void Tape::watch(Tensor& t) {
    if (on_tape(t)) {
        for (const auto& [node, ptr] : watched_)
            if (ptr == &t && node == t.node_) return;
        watched_.emplace_back(t.node_, &t);
        return;
    }
    Node leaf;
    leaf.out_size = t.size();
    nodes_.push_back(std::move(leaf));
    t.tape_uid_ = uid_;
    t.node_ = static_cast<int>(nodes_.size()) - 1;
    watched_.emplace_back(t.node_, &t);
}

Tensor Tape::emit(Shape shape, std::vector<double> values, bool any_attached, BackFn back) {
    Tensor out(std::move(shape), std::move(values));
    if (!any_attached) return out;  // constant subgraph, stays off the tape
    Node node;
    node.out_size = out.size();
    node.back = std::move(back);
    nodes_.push_back(std::move(node));
    out.tape_uid_ = uid_;
    out.node_ = static_cast<int>(nodes_.size()) - 1;
    return out;
}

void Tape::accumulate(int node, const std::vector<double>& g) {
    accumulate_scaled(node, g.data(), g.size(), 1.0);
}

void Tape::accumulate_scaled(int node, const double* g, std::size_t n, double k) {
    if (node < 0) return;
    Node& nd = nodes_[static_cast<std::size_t>(node)];
    for (std::size_t i = 0; i < n; ++i) nd.grad[i] += k * g[i];
    nd.touched = true;
}

void Tape::backward(const Tensor& loss) {
    if (!on_tape(loss))
        throw ContractError("backward: loss tensor is not attached to this tape");
    if (loss.size() != 1)
        throw ContractError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));

    for (Node& n : nodes_) {
        n.grad.assign(n.out_size, 0.0);
        n.touched = false;
    }
    Node& seed = nodes_[static_cast<std::size_t>(loss.node_)];
    seed.grad[0] = 1.0;
    seed.touched = true;

    for (std::size_t i = nodes_.size(); i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.touched || !n.back) continue;
        n.back(*this, n.grad);
    }

    for (auto& [node, t] : watched_) {
        const Node& n = nodes_[static_cast<std::size_t>(node)];
        if (!n.touched) continue;
        auto& g = t->grad();
        for (std::size_t i = 0; i < n.out_size; ++i) g[i] += n.grad[i];
    }
}

// ---------------------------------------------------------------------------
// elementwise ops
// ---------------------------------------------------------------------------

namespace {
void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
}
}  // namespace

Tensor Tape::add(const Tensor& a, const Tensor& b) {
    check_same_shape("add", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
    int ia = input_id(a), ib = input_id(b);
    return emit(a.shape(), std::move(out), ia >= 0 || ib >= 0,
                [ia, ib](Tape& t, const std::vector<double>& g) {
                    t.accumulate(ia, g);
                    t.accumulate(ib, g);
                });
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
    check_same_shape("sub", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
    int ia = input_id(a), ib = input_id(b);
    return emit(a.shape(), std::move(out), ia >= 0 || ib >= 0,
                [ia, ib, n = a.size()](Tape& t, const std::vector<double>& g) {
                    t.accumulate(ia, g);
                    t.accumulate_scaled(ib, g.data(), n, -1.0);
                });
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
    check_same_shape("mul", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
    int ia = input_id(a), ib = input_id(b);
    BackFn back;
    if (ia >= 0 || ib >= 0) {
        back = [ia, ib, av = a.values(), bv = b.values()](Tape& t, const std::vector<double>& g) {
            if (ia >= 0) {
                auto& ga = t.grad_of(ia);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
                t.nodes_[static_cast<std::size_t>(ia)].touched = true;
            }
            if (ib >= 0) {
                auto& gb = t.grad_of(ib);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
                t.nodes_[static_cast<std::size_t>(ib)].touched = true;
            }
        };
    }
    return emit(a.shape(), std::move(out), ia >= 0 || ib >= 0, std::move(back));
}

Tensor Tape::div(const Tensor& a, const Tensor& b) {
    check_same_shape("div", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] / guard_denom(b.values()[i]);
    int ia = input_id(a), ib = input_id(b);
    BackFn back;
    if (ia >= 0 || ib >= 0) {
        back = [ia, ib, av = a.values(), bv = b.values()](Tape& t, const std::vector<double>& g) {
            if (ia >= 0) {
                auto& ga = t.grad_of(ia);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / guard_denom(bv[i]);
                t.nodes_[static_cast<std::size_t>(ia)].touched = true;
            }
            if (ib >= 0) {
                auto& gb = t.grad_of(ib);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    // inside the guard band the output is constant in b
                    if (bv[i] >= kGuard || bv[i] <= -kGuard)
                        gb[i] += -g[i] * av[i] / (bv[i] * bv[i]);
                }
                t.nodes_[static_cast<std::size_t>(ib)].touched = true;
            }
        };
    }
    return emit(a.shape(), std::move(out), ia >= 0 || ib >= 0, std::move(back));
}

Tensor Tape::scale(const Tensor& t, double k) {
    std::vector<double> out(t.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = k * t.values()[i];
    int it = input_id(t);
    return emit(t.shape(), std::move(out), it >= 0,
                [it, k, n = t.size()](Tape& tp, const std::vector<double>& g) {
                    tp.accumulate_scaled(it, g.data(), n, k);
                });
}

Tensor Tape::relu(const Tensor& t) {
    std::vector<double> out(t.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = t.values()[i] > 0.0 ? t.values()[i] : 0.0;
    int it = input_id(t);
    return emit(t.shape(), std::move(out), it >= 0,
                [it, xv = t.values()](Tape& tp, const std::vector<double>& g) {
                    if (it < 0) return;
                    auto& gt = tp.grad_of(it);
                    for (std::size_t i = 0; i < g.size(); ++i)
                        if (xv[i] > 0.0) gt[i] += g[i];
                    tp.nodes_[static_cast<std::size_t>(it)].touched = true;
                });
}

Tensor Tape::log_guarded(const Tensor& t) {
    std::vector<double> out(t.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::log(t.values()[i] > kGuard ? t.values()[i] : kGuard);
    int it = input_id(t);
    return emit(t.shape(), std::move(out), it >= 0,
                [it, xv = t.values()](Tape& tp, const std::vector<double>& g) {
                    if (it < 0) return;
                    auto& gt = tp.grad_of(it);
                    for (std::size_t i = 0; i < g.size(); ++i)
                        if (xv[i] > kGuard) gt[i] += g[i] / xv[i];
                    tp.nodes_[static_cast<std::size_t>(it)].touched = true;
                });
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = &bv[p * n];
            double* orow = &out[i * n];
            for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    int ia = input_id(a), ib = input_id(b);
    BackFn back;
    if (ia >= 0 || ib >= 0) {
        back = [ia, ib, av, bv, m, k, n](Tape& t, const std::vector<double>& g) {
            if (ia >= 0) {
                auto& ga = t.grad_of(ia);  // dA = G * B^T
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        double s = 0.0;
                        const double* grow = &g[i * n];
                        const double* brow = &bv[p * n];
                        for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
                        ga[i * k + p] += s;
                    }
                t.nodes_[static_cast<std::size_t>(ia)].touched = true;
            }
            if (ib >= 0) {
                auto& gb = t.grad_of(ib);  // dB = A^T * G
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        const double aip = av[i * k + p];
                        if (aip == 0.0) continue;
                        const double* grow = &g[i * n];
                        double* gbrow = &gb[p * n];
                        for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
                    }
                t.nodes_[static_cast<std::size_t>(ib)].touched = true;
            }
        };
    }
    return emit({m, n}, std::move(out), ia >= 0 || ib >= 0, std::move(back));
}

Tensor Tape::add_rowwise(const Tensor& m, const Tensor& rowv) {
    if (m.rank() != 2 || rowv.rank() != 1 || m.dim(1) != rowv.dim(0))
        throw DimensionError("add_rowwise: incompatible shapes " + shape_str(m.shape()) + " + " +
                             shape_str(rowv.shape()));
    const std::size_t rows = m.dim(0), d = m.dim(1);
    std::vector<double> out(m.size());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < d; ++j) out[r * d + j] = m.values()[r * d + j] + rowv.values()[j];
    int im = input_id(m), ir = input_id(rowv);
    return emit(m.shape(), std::move(out), im >= 0 || ir >= 0,
                [im, ir, rows, d](Tape& t, const std::vector<double>& g) {
                    t.accumulate(im, g);
                    if (ir >= 0) {
                        auto& gr = t.grad_of(ir);
                        for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t j = 0; j < d; ++j) gr[j] += g[r * d + j];
                        t.nodes_[static_cast<std::size_t>(ir)].touched = true;
                    }
                });
}

Tensor Tape::transpose(const Tensor& t) {
    if (t.rank() != 2)
        throw DimensionError("transpose: rank-2 tensor required, got " + shape_str(t.shape()));
    const std::size_t r = t.dim(0), c = t.dim(1);
    std::vector<double> out(t.size());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = t.values()[i * c + j];
    int it = input_id(t);
    return emit({c, r}, std::move(out), it >= 0,
                [it, r, c](Tape& tp, const std::vector<double>& g) {
                    if (it < 0) return;
                    auto& gt = tp.grad_of(it);
                    for (std::size_t i = 0; i < r; ++i)
                        for (std::size_t j = 0; j < c; ++j) gt[i * c + j] += g[j * r + i];
                    tp.nodes_[static_cast<std::size_t>(it)].touched = true;
                });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

Tensor Tape::sum(const Tensor& t) {
    double s = 0.0;
    for (double v : t.values()) s += v;
    int it = input_id(t);
    return emit({1}, {s}, it >= 0, [it, n = t.size()](Tape& tp, const std::vector<double>& g) {
        if (it < 0) return;
        auto& gt = tp.grad_of(it);
        for (std::size_t i = 0; i < n; ++i) gt[i] += g[0];
        tp.nodes_[static_cast<std::size_t>(it)].touched = true;
    });
}

Tensor Tape::mean_all(const Tensor& t) {
    double s = 0.0;
    for (double v : t.values()) s += v;
    const double inv = 1.0 / static_cast<double>(t.size());
    int it = input_id(t);
    return emit({1}, {s * inv}, it >= 0,
                [it, n = t.size(), inv](Tape& tp, const std::vector<double>& g) {
                    if (it < 0) return;
                    auto& gt = tp.grad_of(it);
                    for (std::size_t i = 0; i < n; ++i) gt[i] += g[0] * inv;
                    tp.nodes_[static_cast<std::size_t>(it)].touched = true;
                });
}

Tensor Tape::mean_axis(const Tensor& t, std::size_t axis) {
    if (axis >= t.rank())
        throw DimensionError("mean_axis: axis " + std::to_string(axis) + " out of range for " +
                             shape_str(t.shape()));
    const Shape& s = t.shape();
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    const std::size_t n = s[axis];
    const double inv = 1.0 / static_cast<double>(n);

    Shape out_shape;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (i != axis) out_shape.push_back(s[i]);
    if (out_shape.empty()) out_shape.push_back(1);

    std::vector<double> out(outer * inner, 0.0);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t a = 0; a < n; ++a) {
            const double* src = &t.values()[(o * n + a) * inner];
            double* dst = &out[o * inner];
            for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
        }
    for (double& v : out) v *= inv;

    int it = input_id(t);
    return emit(std::move(out_shape), std::move(out), it >= 0,
                [it, outer, n, inner, inv](Tape& tp, const std::vector<double>& g) {
                    if (it < 0) return;
                    auto& gt = tp.grad_of(it);
                    for (std::size_t o = 0; o < outer; ++o)
                        for (std::size_t a = 0; a < n; ++a) {
                            double* dst = &gt[(o * n + a) * inner];
                            const double* src = &g[o * inner];
                            for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i] * inv;
                        }
                    tp.nodes_[static_cast<std::size_t>(it)].touched = true;
                });
}

Tensor Tape::squared_norm(const Tensor& t) {
    double s = 0.0;
    for (double v : t.values()) s += v * v;
    int it = input_id(t);
    return emit({1}, {s}, it >= 0, [it, xv = t.values()](Tape& tp, const std::vector<double>& g) {
        if (it < 0) return;
        auto& gt = tp.grad_of(it);
        for (std::size_t i = 0; i < xv.size(); ++i) gt[i] += 2.0 * xv[i] * g[0];
        tp.nodes_[static_cast<std::size_t>(it)].touched = true;
    });
}

Tensor Tape::norm(const Tensor& t) {
    double s = 0.0;
    for (double v : t.values()) s += v * v;
    const double n = std::sqrt(s);
    const double guarded = n > kGuard ? n : kGuard;
    int it = input_id(t);
    return emit({1}, {guarded}, it >= 0,
                [it, xv = t.values(), n](Tape& tp, const std::vector<double>& g) {
                    if (it < 0 || n <= kGuard) return;  // constant in the guard band
                    auto& gt = tp.grad_of(it);
                    for (std::size_t i = 0; i < xv.size(); ++i) gt[i] += g[0] * xv[i] / n;
                    tp.nodes_[static_cast<std::size_t>(it)].touched = true;
                });
}

Tensor Tape::softmax(const Tensor& t) {
    if (t.rank() != 1 || t.size() == 0)
        throw DimensionError("softmax: nonempty rank-1 tensor required, got " +
                             shape_str(t.shape()));
    const auto& x = t.values();
    const double m = *std::max_element(x.begin(), x.end());
    std::vector<double> y(x.size());
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = std::exp(x[i] - m);
        s += y[i];
    }
    for (double& v : y) v /= s;
    int it = input_id(t);
    return emit(t.shape(), std::vector<double>(y), it >= 0,
                [it, y](Tape& tp, const std::vector<double>& g) {
                    if (it < 0) return;
                    double dot = 0.0;
                    for (std::size_t i = 0; i < y.size(); ++i) dot += g[i] * y[i];
                    auto& gt = tp.grad_of(it);
                    for (std::size_t i = 0; i < y.size(); ++i) gt[i] += y[i] * (g[i] - dot);
                    tp.nodes_[static_cast<std::size_t>(it)].touched = true;
                });
}

// ---------------------------------------------------------------------------
// structure ops
// ---------------------------------------------------------------------------

Tensor Tape::stop_gradient(const Tensor& t) {
    // forward is a verbatim copy; the node has no back fn, so everything
    // upstream of it receives exactly zero
    return emit(t.shape(), t.values(), input_id(t) >= 0, BackFn{});
}

Tensor Tape::reshape(const Tensor& t, Shape shape) {
    check_dims_positive(shape);
    if (shape_product(shape) != t.size())
        throw DimensionError("reshape: cannot view " + shape_str(t.shape()) + " as " +
                             shape_str(shape));
    int it = input_id(t);
    return emit(std::move(shape), t.values(), it >= 0,
                [it](Tape& tp, const std::vector<double>& g) { tp.accumulate(it, g); });
}

Tensor Tape::concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ContractError("concat: no tensors given");
    const Shape& first = parts[0].shape();
    if (axis >= first.size())
        throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for " +
                             shape_str(first));
    std::size_t axis_total = 0;
    for (const Tensor& p : parts) {
        if (p.rank() != first.size())
            throw DimensionError("concat: rank mismatch " + shape_str(first) + " vs " +
                                 shape_str(p.shape()));
        for (std::size_t i = 0; i < first.size(); ++i)
            if (i != axis && p.shape()[i] != first[i])
                throw DimensionError("concat: shape mismatch " + shape_str(first) + " vs " +
                                     shape_str(p.shape()));
        axis_total += p.shape()[axis];
    }
    Shape out_shape = first;
    out_shape[axis] = axis_total;

    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
    for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];

    std::vector<double> out(shape_product(out_shape));
    std::vector<std::size_t> blocks;  // per-part contiguous block length
    blocks.reserve(parts.size());
    for (const Tensor& p : parts) blocks.push_back(p.shape()[axis] * inner);
    const std::size_t out_block = axis_total * inner;

    bool any = false;
    std::vector<int> ids;
    ids.reserve(parts.size());
    for (const Tensor& p : parts) {
        ids.push_back(input_id(p));
        any = any || ids.back() >= 0;
    }

    for (std::size_t o = 0; o < outer; ++o) {
        std::size_t off = o * out_block;
        for (std::size_t pi = 0; pi < parts.size(); ++pi) {
            const auto& pv = parts[pi].values();
            std::copy(pv.begin() + static_cast<std::ptrdiff_t>(o * blocks[pi]),
                      pv.begin() + static_cast<std::ptrdiff_t>((o + 1) * blocks[pi]),
                      out.begin() + static_cast<std::ptrdiff_t>(off));
            off += blocks[pi];
        }
    }

    return emit(std::move(out_shape), std::move(out), any,
                [ids, blocks, outer, out_block](Tape& tp, const std::vector<double>& g) {
                    for (std::size_t o = 0; o < outer; ++o) {
                        std::size_t off = o * out_block;
                        for (std::size_t pi = 0; pi < ids.size(); ++pi) {
                            if (ids[pi] >= 0) {
                                auto& gp = tp.grad_of(ids[pi]);
                                for (std::size_t i = 0; i < blocks[pi]; ++i)
                                    gp[o * blocks[pi] + i] += g[off + i];
                                tp.nodes_[static_cast<std::size_t>(ids[pi])].touched = true;
                            }
                            off += blocks[pi];
                        }
                    }
                });
}

Tensor Tape::slice_rows(const Tensor& t, std::size_t begin, std::size_t end) {
    if (t.rank() == 0) throw DimensionError("slice_rows: scalar tensor");
    const std::size_t rows = t.dim(0);
    if (begin >= end || end > rows)
        throw DimensionError("slice_rows: range [" + std::to_string(begin) + "," +
                             std::to_string(end) + ") invalid for " + shape_str(t.shape()));
    const std::size_t rowsz = t.size() / rows;
    Shape out_shape = t.shape();
    out_shape[0] = end - begin;
    std::vector<double> out(t.values().begin() + static_cast<std::ptrdiff_t>(begin * rowsz),
                            t.values().begin() + static_cast<std::ptrdiff_t>(end * rowsz));
    int it = input_id(t);
    return emit(std::move(out_shape), std::move(out), it >= 0,
                [it, begin, rowsz](Tape& tp, const std::vector<double>& g) {
                    if (it < 0) return;
                    auto& gt = tp.grad_of(it);
                    for (std::size_t i = 0; i < g.size(); ++i) gt[begin * rowsz + i] += g[i];
                    tp.nodes_[static_cast<std::size_t>(it)].touched = true;
                });
}

Tensor Tape::row(const Tensor& t, std::size_t i) {
    if (t.rank() != 2)
        throw DimensionError("row: rank-2 tensor required, got " + shape_str(t.shape()));
    Tensor r = slice_rows(t, i, i + 1);
    return reshape(r, {t.dim(1)});
}

}  // namespace reguider
