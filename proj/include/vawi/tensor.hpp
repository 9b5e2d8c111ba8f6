#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vawi/common.hpp"
#include "vawi/rng.hpp"

namespace vawi {

namespace detail {
struct TensorNode;
}

// Dense row-major matrix of 64-bit floats with reverse-mode autodiff.
// A Tensor is a cheap handle onto a graph node; ops build new nodes and
// record how to push gradients back to their parents. Values are immutable
// once created except for the grad buffer and explicit optimizer updates
// on leaves via mutable_data().
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
    static Tensor full(std::size_t rows, std::size_t cols, double value);
    static Tensor from_data(std::size_t rows, std::size_t cols, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor scalar(double value);
    static Tensor row_vector(std::vector<double> data, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    std::size_t rows() const;
    std::size_t cols() const;
    std::size_t size() const;
    std::vector<std::size_t> shape() const;
    std::string shape_string() const;

    double at(std::size_t r, std::size_t c) const;
    double item() const; // requires a 1x1 tensor

    std::span<const double> data() const;
    // In-place access for optimizers; only leaves may be mutated.
    std::vector<double>& mutable_data();

    bool requires_grad() const;
    void set_requires_grad(bool flag);
    bool is_leaf() const;

    // Gradient accumulated by backward(); empty span if never populated.
    std::span<const double> grad() const;
    void zero_grad();

    // Reverse-mode sweep from a scalar output. Grad buffers accumulate
    // across calls until zero_grad() is invoked.
    void backward() const;

    // Identity comparison (same underlying node).
    bool same_node(const Tensor& other) const { return node_ == other.node_; }

    const std::shared_ptr<detail::TensorNode>& node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::TensorNode> node_;

    friend Tensor make_op_tensor(std::size_t rows, std::size_t cols, std::vector<double> value,
                                 std::vector<Tensor> parents,
                                 std::function<void(detail::TensorNode&)> backward_fn);
};

// ---- elementwise and linear algebra ----

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// y[i,:] = m[i,:] + bias[0,:], bias is 1 x cols.
Tensor add_row_broadcast(const Tensor& m, const Tensor& bias);
// y[i,:] = weights[0,i] * m[i,:], weights is 1 x rows.
Tensor scale_rows(const Tensor& m, const Tensor& weights);

// ---- nonlinearities ----

// Row-stabilized softmax. With causal=true (square input) entries above the
// diagonal are exactly 0 and excluded from the normalization.
Tensor softmax_rows(const Tensor& m, bool causal = false);
Tensor log_softmax_rows(const Tensor& m);
Tensor tanh_op(const Tensor& m);
Tensor gelu(const Tensor& m);
Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       double eps = 1e-5);

// ---- shape / selection ----

Tensor gather_rows(const Tensor& m, const std::vector<std::size_t>& indices);
Tensor gather_cols(const Tensor& m, const std::vector<std::size_t>& indices);
Tensor slice_cols(const Tensor& m, std::size_t start, std::size_t count);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);

// Row assembly plan for sequence injection: each output row is copied from
// one of two sources. Gradients are routed back to the matching source row.
struct RowRef {
    int source = 0; // 0 = first operand, 1 = second
    std::size_t row = 0;
};
Tensor interleave_rows(const Tensor& a, const Tensor& b, const std::vector<RowRef>& plan);

// ---- reductions ----

Tensor sum_all(const Tensor& m);
Tensor mean_rows(const Tensor& m); // 1 x cols, average of the rows
Tensor pick(const Tensor& m, std::size_t row, std::size_t col);

// ---- graph utilities ----

// Value copy with no history; gradients stop here.
Tensor detach(const Tensor& m);
// Vector of exact 1.0 values whose gradient passes through to w unchanged
// (straight-through estimator forward).
Tensor straight_through_ones(const Tensor& w);

// i.i.d. Gumbel(0,1) draws, no gradient tracking.
Tensor gumbel_sample(std::size_t rows, std::size_t cols, RngStream& rng);
// i.i.d. Normal(mean, stddev^2) draws, no gradient tracking.
Tensor gaussian_sample(std::size_t rows, std::size_t cols, RngStream& rng,
                       double mean = 0.0, double stddev = 1.0);

bool all_finite(const Tensor& m);

} // namespace vawi
