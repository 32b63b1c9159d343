#ifndef REGUIDER_TENSOR_HPP
#define REGUIDER_TENSOR_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "reguider/errors.hpp"

namespace reguider {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

// Dense row-major f64 tensor. A Tensor is plain data unless an op attached
// it to a Tape; the (tape uid, node) pair below is that linkage. Stale
// links from a destroyed tape are harmless: a new tape never recognises
// them, so the tensor degrades to a constant.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor scalar(double v);
    static Tensor full(Shape shape, double v);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return values_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }
    double item() const;  // scalar tensors only

    bool has_grad() const { return !grad_.empty(); }
    std::vector<double>& grad();
    const std::vector<double>& grad() const;
    void zero_grad();

    bool attached() const { return node_ >= 0; }

private:
    Shape shape_;
    std::vector<double> values_;
    std::vector<double> grad_;       // empty until backward touches it
    std::uint64_t tape_uid_ = 0;     // 0 = detached
    int node_ = -1;

    friend class Tape;
};

// Reverse-mode differentiation tape. One tape per forward/backward cycle;
// ops append nodes in execution order and backward() walks them in strict
// reverse. An op output is recorded only if at least one input is attached,
// so constant subgraphs (frozen teachers, batch data) stay off the tape.
class Tape {
public:
    Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Marks t as a trainable leaf: after backward(), dL/dt is accumulated
    // into t.grad(). The tensor must outlive the tape's backward calls.
    void watch(Tensor& t);
    std::size_t watched_count() const { return watched_.size(); }
    std::size_t node_count() const { return nodes_.size(); }

    // ---- differentiable ops ----
    Tensor matmul(const Tensor& a, const Tensor& b);
    Tensor add(const Tensor& a, const Tensor& b);
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor mul(const Tensor& a, const Tensor& b);
    Tensor div(const Tensor& a, const Tensor& b);  // denominator guarded at 1e-12
    Tensor add_rowwise(const Tensor& m, const Tensor& row);  // [R,d] + [d]
    Tensor scale(const Tensor& t, double k);
    Tensor sum(const Tensor& t);       // -> [1]
    Tensor mean_all(const Tensor& t);  // -> [1]
    Tensor mean_axis(const Tensor& t, std::size_t axis);
    Tensor squared_norm(const Tensor& t);  // sum of squares -> [1]
    Tensor norm(const Tensor& t);          // max(l2, 1e-12) -> [1]
    Tensor log_guarded(const Tensor& t);   // ln(max(x, 1e-12)) elementwise
    Tensor relu(const Tensor& t);
    Tensor softmax(const Tensor& t);  // rank-1, max-subtracted
    Tensor stop_gradient(const Tensor& t);
    Tensor reshape(const Tensor& t, Shape shape);
    Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
    Tensor transpose(const Tensor& t);  // rank-2
    Tensor slice_rows(const Tensor& t, std::size_t begin, std::size_t end);
    Tensor row(const Tensor& t, std::size_t i);  // [R,d] -> [d]

    // Seeds d(loss)/d(loss) = 1 and pushes gradients to every watched leaf.
    // Internal node grads are rebuilt per call; watched tensors accumulate,
    // so two calls without zero_grad() yield exactly twice the gradient.
    void backward(const Tensor& loss);

private:
    using BackFn = std::function<void(Tape&, const std::vector<double>&)>;

    struct Node {
        std::size_t out_size = 0;
        BackFn back;          // empty for leaves and stop-gradient nodes
        std::vector<double> grad;
        bool touched = false;
    };

    std::uint64_t uid_;
    std::vector<Node> nodes_;
    std::vector<std::pair<int, Tensor*>> watched_;

    bool on_tape(const Tensor& t) const { return t.tape_uid_ == uid_ && t.node_ >= 0; }
    int input_id(const Tensor& t) const { return on_tape(t) ? t.node_ : -1; }
    Tensor emit(Shape shape, std::vector<double> values, bool any_attached, BackFn back);
    void accumulate(int node, const std::vector<double>& g);
    void accumulate_scaled(int node, const double* g, std::size_t n, double k);
    std::vector<double>& grad_of(int node) { return nodes_[static_cast<std::size_t>(node)].grad; }

    friend struct TapeTestAccess;
};

}  // namespace reguider

#endif
