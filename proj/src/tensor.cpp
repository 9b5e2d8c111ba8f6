#include "vawi/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace vawi {

namespace detail {

struct TensorNode {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> value;
    std::vector<double> grad; // sized lazily when gradients first flow
    bool requires_grad = false;
    bool is_leaf = true;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

} // namespace detail

using detail::TensorNode;

namespace {

std::string shape_str(std::size_t r, std::size_t c) {
    std::ostringstream os;
    os << r << "x" << c;
    return os.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_string() +
                             " vs " + b.shape_string());
    }
}

std::shared_ptr<TensorNode> make_node(std::size_t rows, std::size_t cols,
                                      std::vector<double> value) {
    if (value.size() != rows * cols) {
        throw DimensionError("tensor: data length " + std::to_string(value.size()) +
                             " does not match shape " + shape_str(rows, cols));
    }
    auto n = std::make_shared<TensorNode>();
    n->rows = rows;
    n->cols = cols;
    n->value = std::move(value);
    return n;
}

} // namespace

// Internal factory for op results. Declared as a friend of Tensor.
Tensor make_op_tensor(std::size_t rows, std::size_t cols, std::vector<double> value,
                      std::vector<Tensor> parents,
                      std::function<void(TensorNode&)> backward_fn) {
    auto n = make_node(rows, cols, std::move(value));
    n->is_leaf = false;
    bool any_grad = false;
    for (const auto& p : parents) {
        if (p.node()) {
            n->parents.push_back(p.node());
            any_grad = any_grad || p.node()->requires_grad;
        }
    }
    n->requires_grad = any_grad;
    if (any_grad) n->backward_fn = std::move(backward_fn);
    return Tensor(std::move(n));
}

// ---- Tensor basics ----

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
    auto n = make_node(rows, cols, std::vector<double>(rows * cols, 0.0));
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, double value) {
    return Tensor(make_node(rows, cols, std::vector<double>(rows * cols, value)));
}

Tensor Tensor::from_data(std::size_t rows, std::size_t cols, std::vector<double> data,
                         bool requires_grad) {
    auto n = make_node(rows, cols, std::move(data));
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value) {
    return from_data(1, 1, {value});
}

Tensor Tensor::row_vector(std::vector<double> data, bool requires_grad) {
    const std::size_t n = data.size();
    return from_data(1, n, std::move(data), requires_grad);
}

std::size_t Tensor::rows() const { return node_ ? node_->rows : 0; }
std::size_t Tensor::cols() const { return node_ ? node_->cols : 0; }
std::size_t Tensor::size() const { return node_ ? node_->value.size() : 0; }

std::vector<std::size_t> Tensor::shape() const { return {rows(), cols()}; }

std::string Tensor::shape_string() const { return shape_str(rows(), cols()); }

double Tensor::at(std::size_t r, std::size_t c) const {
    return node_->value[r * node_->cols + c];
}

double Tensor::item() const {
    if (size() != 1) {
        throw ContractError("item: tensor is " + shape_string() + ", expected 1x1");
    }
    return node_->value[0];
}

std::span<const double> Tensor::data() const {
    return node_ ? std::span<const double>(node_->value) : std::span<const double>();
}

std::vector<double>& Tensor::mutable_data() {
    if (!node_->is_leaf) {
        throw ContractError("mutable_data: only leaf tensors may be mutated in place");
    }
    return node_->value;
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
    if (!node_->is_leaf) {
        throw ContractError("set_requires_grad: only valid on leaf tensors");
    }
    node_->requires_grad = flag;
}

bool Tensor::is_leaf() const { return node_ && node_->is_leaf; }

std::span<const double> Tensor::grad() const {
    if (!node_ || node_->grad.empty()) return {};
    return node_->grad;
}

void Tensor::zero_grad() {
    if (node_) node_->grad.assign(node_->value.size(), 0.0);
}

void Tensor::backward() const {
    if (!node_) throw ContractError("backward: undefined tensor");
    if (size() != 1) {
        throw ContractError("backward: output is " + shape_string() + ", expected a scalar");
    }

    // Iterative post-order DFS; children precede parents in `order`.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            TensorNode* p = n->parents[next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    for (TensorNode* n : order) n->ensure_grad();
    node_->grad[0] += 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
}

// ---- op helpers ----

namespace {

TensorNode& p0(TensorNode& n) { return *n.parents[0]; }
TensorNode& p1(TensorNode& n) { return *n.parents[1]; }

bool wants(TensorNode& n) { return n.requires_grad; }

void accumulate(TensorNode& dst, const std::vector<double>& contribution) {
    dst.ensure_grad();
    for (std::size_t i = 0; i < contribution.size(); ++i) dst.grad[i] += contribution[i];
}

} // namespace

// ---- elementwise ----

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> v(a.size());
    auto av = a.data(), bv = b.data();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] + bv[i];
    return make_op_tensor(a.rows(), a.cols(), std::move(v), {a, b}, [](TensorNode& n) {
        if (wants(p0(n))) accumulate(p0(n), n.grad);
        if (wants(p1(n))) accumulate(p1(n), n.grad);
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> v(a.size());
    auto av = a.data(), bv = b.data();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] - bv[i];
    return make_op_tensor(a.rows(), a.cols(), std::move(v), {a, b}, [](TensorNode& n) {
        if (wants(p0(n))) accumulate(p0(n), n.grad);
        if (wants(p1(n))) {
            auto& dst = p1(n);
            dst.ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) dst.grad[i] -= n.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> v(a.size());
    auto av = a.data(), bv = b.data();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] * bv[i];
    return make_op_tensor(a.rows(), a.cols(), std::move(v), {a, b}, [](TensorNode& n) {
        if (wants(p0(n))) {
            auto& dst = p0(n);
            dst.ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i)
                dst.grad[i] += n.grad[i] * p1(n).value[i];
        }
        if (wants(p1(n))) {
            auto& dst = p1(n);
            dst.ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i)
                dst.grad[i] += n.grad[i] * p0(n).value[i];
        }
    });
}

Tensor scale(const Tensor& a, double factor) {
    std::vector<double> v(a.size());
    auto av = a.data();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] * factor;
    return make_op_tensor(a.rows(), a.cols(), std::move(v), {a}, [factor](TensorNode& n) {
        if (!wants(p0(n))) return;
        auto& dst = p0(n);
        dst.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) dst.grad[i] += n.grad[i] * factor;
    });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: inner dimensions disagree, " + a.shape_string() +
                             " * " + b.shape_string());
    }
    const std::size_t m = a.rows(), k = a.cols(), nn = b.cols();
    std::vector<double> v(m * nn, 0.0);
    auto av = a.data(), bv = b.data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t t = 0; t < k; ++t) {
            const double aa = av[i * k + t];
            if (aa == 0.0) continue;
            const double* brow = &bv[t * nn];
            double* out = &v[i * nn];
            for (std::size_t j = 0; j < nn; ++j) out[j] += aa * brow[j];
        }
    }
    return make_op_tensor(m, nn, std::move(v), {a, b}, [m, k, nn](TensorNode& n) {
        // dA = dC * B^T, dB = A^T * dC
        if (wants(p0(n))) {
            auto& dst = p0(n);
            dst.ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t t = 0; t < k; ++t) {
                    double acc = 0.0;
                    const double* grow = &n.grad[i * nn];
                    const double* brow = &p1(n).value[t * nn];
                    for (std::size_t j = 0; j < nn; ++j) acc += grow[j] * brow[j];
                    dst.grad[i * k + t] += acc;
                }
        }
        if (wants(p1(n))) {
            auto& dst = p1(n);
            dst.ensure_grad();
            for (std::size_t i = 0; i < m; ++i) {
                const double* arow = &p0(n).value[i * k];
                const double* grow = &n.grad[i * nn];
                for (std::size_t t = 0; t < k; ++t) {
                    const double aa = arow[t];
                    if (aa == 0.0) continue;
                    double* drow = &dst.grad[t * nn];
                    for (std::size_t j = 0; j < nn; ++j) drow[j] += aa * grow[j];
                }
            }
        }
    });
}

Tensor transpose(const Tensor& a) {
    const std::size_t m = a.rows(), c = a.cols();
    std::vector<double> v(a.size());
    auto av = a.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < c; ++j) v[j * m + i] = av[i * c + j];
    return make_op_tensor(c, m, std::move(v), {a}, [m, c](TensorNode& n) {
        if (!wants(p0(n))) return;
        auto& dst = p0(n);
        dst.ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < c; ++j) dst.grad[i * c + j] += n.grad[j * m + i];
    });
}

Tensor add_row_broadcast(const Tensor& m, const Tensor& bias) {
    if (bias.rows() != 1 || bias.cols() != m.cols()) {
        throw DimensionError("add_row_broadcast: bias " + bias.shape_string() +
                             " does not match matrix " + m.shape_string());
    }
    const std::size_t r = m.rows(), c = m.cols();
    std::vector<double> v(m.size());
    auto mv = m.data(), bv = bias.data();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) v[i * c + j] = mv[i * c + j] + bv[j];
    return make_op_tensor(r, c, std::move(v), {m, bias}, [r, c](TensorNode& n) {
        if (wants(p0(n))) accumulate(p0(n), n.grad);
        if (wants(p1(n))) {
            auto& dst = p1(n);
            dst.ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) dst.grad[j] += n.grad[i * c + j];
        }
    });
}

Tensor scale_rows(const Tensor& m, const Tensor& weights) {
    if (weights.rows() != 1 || weights.cols() != m.rows()) {
        throw DimensionError("scale_rows: weights " + weights.shape_string() +
                             " do not match matrix rows of " + m.shape_string());
    }
    const std::size_t r = m.rows(), c = m.cols();
    std::vector<double> v(m.size());
    auto mv = m.data(), wv = weights.data();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) v[i * c + j] = mv[i * c + j] * wv[i];
    return make_op_tensor(r, c, std::move(v), {m, weights}, [r, c](TensorNode& n) {
        if (wants(p0(n))) {
            auto& dst = p0(n);
            dst.ensure_grad();
            for (std::size_t i = 0; i < r; ++i) {
                const double w = p1(n).value[i];
                for (std::size_t j = 0; j < c; ++j) dst.grad[i * c + j] += n.grad[i * c + j] * w;
            }
        }
        if (wants(p1(n))) {
            auto& dst = p1(n);
            dst.ensure_grad();
            for (std::size_t i = 0; i < r; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < c; ++j)
                    acc += n.grad[i * c + j] * p0(n).value[i * c + j];
                dst.grad[i] += acc;
            }
        }
    });
}

// ---- nonlinearities ----

Tensor softmax_rows(const Tensor& m, bool causal) {
    const std::size_t r = m.rows(), c = m.cols();
    if (causal && r != c) {
        throw DimensionError("softmax_rows: causal mask needs a square matrix, got " +
                             m.shape_string());
    }
    std::vector<double> v(m.size(), 0.0);
    auto mv = m.data();
    for (std::size_t i = 0; i < r; ++i) {
        const std::size_t valid = causal ? i + 1 : c;
        double mx = mv[i * c];
        for (std::size_t j = 1; j < valid; ++j) mx = std::max(mx, mv[i * c + j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < valid; ++j) {
            const double e = std::exp(mv[i * c + j] - mx);
            v[i * c + j] = e;
            denom += e;
        }
        for (std::size_t j = 0; j < valid; ++j) v[i * c + j] /= denom;
        // entries past `valid` stay exactly 0
    }
    return make_op_tensor(r, c, std::move(v), {m}, [r, c](TensorNode& n) {
        if (!wants(p0(n))) return;
        auto& dst = p0(n);
        dst.ensure_grad();
        // dx = y * (dy - sum_j dy_j y_j); masked entries have y == 0.
        for (std::size_t i = 0; i < r; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += n.grad[i * c + j] * n.value[i * c + j];
            for (std::size_t j = 0; j < c; ++j) {
                const double y = n.value[i * c + j];
                if (y != 0.0) dst.grad[i * c + j] += y * (n.grad[i * c + j] - dot);
            }
        }
    });
}

Tensor log_softmax_rows(const Tensor& m) {
    const std::size_t r = m.rows(), c = m.cols();
    std::vector<double> v(m.size());
    auto mv = m.data();
    for (std::size_t i = 0; i < r; ++i) {
        double mx = mv[i * c];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, mv[i * c + j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < c; ++j) denom += std::exp(mv[i * c + j] - mx);
        const double lse = mx + std::log(denom);
        for (std::size_t j = 0; j < c; ++j) v[i * c + j] = mv[i * c + j] - lse;
    }
    return make_op_tensor(r, c, std::move(v), {m}, [r, c](TensorNode& n) {
        if (!wants(p0(n))) return;
        auto& dst = p0(n);
        dst.ensure_grad();
        for (std::size_t i = 0; i < r; ++i) {
            double gsum = 0.0;
            for (std::size_t j = 0; j < c; ++j) gsum += n.grad[i * c + j];
            for (std::size_t j = 0; j < c; ++j) {
                dst.grad[i * c + j] += n.grad[i * c + j] - std::exp(n.value[i * c + j]) * gsum;
            }
        }
    });
}

Tensor tanh_op(const Tensor& m) {
    std::vector<double> v(m.size());
    auto mv = m.data();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::tanh(mv[i]);
    return make_op_tensor(m.rows(), m.cols(), std::move(v), {m}, [](TensorNode& n) {
        if (!wants(p0(n))) return;
        auto& dst = p0(n);
        dst.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            const double y = n.value[i];
            dst.grad[i] += n.grad[i] * (1.0 - y * y);
        }
    });
}

Tensor gelu(const Tensor& m) {
    constexpr double kC = 0.7978845608028654; // sqrt(2/pi)
    constexpr double kA = 0.044715;
    std::vector<double> v(m.size());
    auto mv = m.data();
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double x = mv[i];
        v[i] = 0.5 * x * (1.0 + std::tanh(kC * (x + kA * x * x * x)));
    }
    return make_op_tensor(m.rows(), m.cols(), std::move(v), {m}, [](TensorNode& n) {
        if (!wants(p0(n))) return;
        auto& dst = p0(n);
        dst.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            const double x = p0(n).value[i];
            const double u = kC * (x + kA * x * x * x);
            const double t = std::tanh(u);
            const double sech2 = 1.0 - t * t;
            const double d = 0.5 * (1.0 + t) + 0.5 * x * sech2 * kC * (1.0 + 3.0 * kA * x * x);
            dst.grad[i] += n.grad[i] * d;
        }
    });
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const std::size_t r = x.rows(), c = x.cols();
    if (gamma.rows() != 1 || gamma.cols() != c || beta.rows() != 1 || beta.cols() != c) {
        throw DimensionError("layer_norm_rows: gamma/beta must be 1x" + std::to_string(c));
    }
    std::vector<double> v(x.size());
    std::vector<double> inv_std(r), means(r);
    auto xv = x.data(), gv = gamma.data(), bv = beta.data();
    for (std::size_t i = 0; i < r; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < c; ++j) mean += xv[i * c + j];
        mean /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double d = xv[i * c + j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(c);
        const double is = 1.0 / std::sqrt(var + eps);
        means[i] = mean;
        inv_std[i] = is;
        for (std::size_t j = 0; j < c; ++j) {
            v[i * c + j] = (xv[i * c + j] - mean) * is * gv[j] + bv[j];
        }
    }
    return make_op_tensor(r, c, std::move(v), {x, gamma, beta},
                          [r, c, means, inv_std](TensorNode& n) {
        auto& xn = p0(n);
        auto& gn = p1(n);
        auto& bn = *n.parents[2];
        const bool wx = wants(xn), wg = wants(gn), wb = wants(bn);
        if (wx) xn.ensure_grad();
        if (wg) gn.ensure_grad();
        if (wb) bn.ensure_grad();
        for (std::size_t i = 0; i < r; ++i) {
            const double is = inv_std[i];
            double sum_dyg = 0.0, sum_dyg_xhat = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                const double xhat = (xn.value[i * c + j] - means[i]) * is;
                const double dyg = n.grad[i * c + j] * gn.value[j];
                sum_dyg += dyg;
                sum_dyg_xhat += dyg * xhat;
                if (wg) gn.grad[j] += n.grad[i * c + j] * xhat;
                if (wb) bn.grad[j] += n.grad[i * c + j];
            }
            if (wx) {
                const double cn = static_cast<double>(c);
                for (std::size_t j = 0; j < c; ++j) {
                    const double xhat = (xn.value[i * c + j] - means[i]) * is;
                    const double dyg = n.grad[i * c + j] * gn.value[j];
                    xn.grad[i * c + j] += (is / cn) * (cn * dyg - sum_dyg - xhat * sum_dyg_xhat);
                }
            }
        }
    });
}

// ---- shape / selection ----

Tensor gather_rows(const Tensor& m, const std::vector<std::size_t>& indices) {
    const std::size_t c = m.cols();
    std::vector<double> v(indices.size() * c);
    auto mv = m.data();
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= m.rows()) {
            throw DimensionError("gather_rows: index " + std::to_string(indices[i]) +
                                 " out of range for " + m.shape_string());
        }
        std::copy_n(&mv[indices[i] * c], c, &v[i * c]);
    }
    return make_op_tensor(indices.size(), c, std::move(v), {m}, [indices, c](TensorNode& n) {
        if (!wants(p0(n))) return;
        auto& dst = p0(n);
        dst.ensure_grad();
        for (std::size_t i = 0; i < indices.size(); ++i)
            for (std::size_t j = 0; j < c; ++j)
                dst.grad[indices[i] * c + j] += n.grad[i * c + j];
    });
}

Tensor gather_cols(const Tensor& m, const std::vector<std::size_t>& indices) {
    const std::size_t r = m.rows(), c = m.cols(), k = indices.size();
    std::vector<double> v(r * k);
    auto mv = m.data();
    for (std::size_t j = 0; j < k; ++j) {
        if (indices[j] >= c) {
            throw DimensionError("gather_cols: index " + std::to_string(indices[j]) +
                                 " out of range for " + m.shape_string());
        }
        for (std::size_t i = 0; i < r; ++i) v[i * k + j] = mv[i * c + indices[j]];
    }
    return make_op_tensor(r, k, std::move(v), {m}, [indices, r, c, k](TensorNode& n) {
        if (!wants(p0(n))) return;
        auto& dst = p0(n);
        dst.ensure_grad();
        for (std::size_t j = 0; j < k; ++j)
            for (std::size_t i = 0; i < r; ++i)
                dst.grad[i * c + indices[j]] += n.grad[i * k + j];
    });
}

Tensor slice_cols(const Tensor& m, std::size_t start, std::size_t count) {
    if (start + count > m.cols()) {
        throw DimensionError("slice_cols: [" + std::to_string(start) + ", " +
                             std::to_string(start + count) + ") exceeds " + m.shape_string());
    }
    const std::size_t r = m.rows(), c = m.cols();
    std::vector<double> v(r * count);
    auto mv = m.data();
    for (std::size_t i = 0; i < r; ++i)
        std::copy_n(&mv[i * c + start], count, &v[i * count]);
    return make_op_tensor(r, count, std::move(v), {m}, [start, count, r, c](TensorNode& n) {
        if (!wants(p0(n))) return;
        auto& dst = p0(n);
        dst.ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < count; ++j)
                dst.grad[i * c + start + j] += n.grad[i * count + j];
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_rows: no parts");
    const std::size_t c = parts[0].cols();
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p.cols() != c) {
            throw DimensionError("concat_rows: column mismatch " + p.shape_string() +
                                 " vs 1st part " + parts[0].shape_string());
        }
        total += p.rows();
    }
    std::vector<double> v;
    v.reserve(total * c);
    for (const auto& p : parts) v.insert(v.end(), p.data().begin(), p.data().end());
    std::vector<std::size_t> row_counts;
    row_counts.reserve(parts.size());
    for (const auto& p : parts) row_counts.push_back(p.rows());
    return make_op_tensor(total, c, std::move(v), parts, [row_counts, c](TensorNode& n) {
        std::size_t row = 0;
        for (std::size_t pi = 0; pi < row_counts.size(); ++pi) {
            auto& dst = *n.parents[pi];
            if (wants(dst)) {
                dst.ensure_grad();
                for (std::size_t i = 0; i < row_counts[pi] * c; ++i)
                    dst.grad[i] += n.grad[row * c + i];
            }
            row += row_counts[pi];
        }
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: no parts");
    const std::size_t r = parts[0].rows();
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p.rows() != r) {
            throw DimensionError("concat_cols: row mismatch " + p.shape_string() +
                                 " vs 1st part " + parts[0].shape_string());
        }
        total += p.cols();
    }
    std::vector<double> v(r * total);
    std::size_t col = 0;
    for (const auto& p : parts) {
        auto pv = p.data();
        const std::size_t pc = p.cols();
        for (std::size_t i = 0; i < r; ++i)
            std::copy_n(&pv[i * pc], pc, &v[i * total + col]);
        col += pc;
    }
    std::vector<std::size_t> col_counts;
    col_counts.reserve(parts.size());
    for (const auto& p : parts) col_counts.push_back(p.cols());
    return make_op_tensor(r, total, std::move(v), parts, [col_counts, r, total](TensorNode& n) {
        std::size_t col = 0;
        for (std::size_t pi = 0; pi < col_counts.size(); ++pi) {
            auto& dst = *n.parents[pi];
            const std::size_t pc = col_counts[pi];
            if (wants(dst)) {
                dst.ensure_grad();
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < pc; ++j)
                        dst.grad[i * pc + j] += n.grad[i * total + col + j];
            }
            col += pc;
        }
    });
}

Tensor interleave_rows(const Tensor& a, const Tensor& b, const std::vector<RowRef>& plan) {
    if (a.cols() != b.cols()) {
        throw DimensionError("interleave_rows: column mismatch " + a.shape_string() + " vs " +
                             b.shape_string());
    }
    const std::size_t c = a.cols();
    std::vector<double> v(plan.size() * c);
    for (std::size_t i = 0; i < plan.size(); ++i) {
        const Tensor& src = plan[i].source == 0 ? a : b;
        if (plan[i].row >= src.rows()) {
            throw ContractError("interleave_rows: row " + std::to_string(plan[i].row) +
                                " out of range for source " + std::to_string(plan[i].source));
        }
        std::copy_n(&src.data()[plan[i].row * c], c, &v[i * c]);
    }
    return make_op_tensor(plan.size(), c, std::move(v), {a, b}, [plan, c](TensorNode& n) {
        for (std::size_t i = 0; i < plan.size(); ++i) {
            auto& dst = plan[i].source == 0 ? p0(n) : p1(n);
            if (!wants(dst)) continue;
            dst.ensure_grad();
            for (std::size_t j = 0; j < c; ++j)
                dst.grad[plan[i].row * c + j] += n.grad[i * c + j];
        }
    });
}

// ---- reductions ----

Tensor sum_all(const Tensor& m) {
    double s = 0.0;
    for (double x : m.data()) s += x;
    return make_op_tensor(1, 1, {s}, {m}, [](TensorNode& n) {
        if (!wants(p0(n))) return;
        auto& dst = p0(n);
        dst.ensure_grad();
        for (double& g : dst.grad) g += n.grad[0];
    });
}

Tensor mean_rows(const Tensor& m) {
    const std::size_t r = m.rows(), c = m.cols();
    if (r == 0) throw ContractError("mean_rows: empty tensor");
    std::vector<double> v(c, 0.0);
    auto mv = m.data();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) v[j] += mv[i * c + j];
    for (double& x : v) x /= static_cast<double>(r);
    return make_op_tensor(1, c, std::move(v), {m}, [r, c](TensorNode& n) {
        if (!wants(p0(n))) return;
        auto& dst = p0(n);
        dst.ensure_grad();
        const double inv = 1.0 / static_cast<double>(r);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) dst.grad[i * c + j] += n.grad[j] * inv;
    });
}

Tensor pick(const Tensor& m, std::size_t row, std::size_t col) {
    if (row >= m.rows() || col >= m.cols()) {
        throw DimensionError("pick: (" + std::to_string(row) + "," + std::to_string(col) +
                             ") out of range for " + m.shape_string());
    }
    const std::size_t c = m.cols();
    return make_op_tensor(1, 1, {m.at(row, col)}, {m}, [row, col, c](TensorNode& n) {
        if (!wants(p0(n))) return;
        auto& dst = p0(n);
        dst.ensure_grad();
        dst.grad[row * c + col] += n.grad[0];
    });
}

// ---- graph utilities ----

Tensor detach(const Tensor& m) {
    return Tensor::from_data(m.rows(), m.cols(),
                             std::vector<double>(m.data().begin(), m.data().end()));
}

Tensor straight_through_ones(const Tensor& w) {
    return make_op_tensor(w.rows(), w.cols(), std::vector<double>(w.size(), 1.0), {w},
                          [](TensorNode& n) {
        if (!wants(p0(n))) return;
        accumulate(p0(n), n.grad);
    });
}

Tensor gumbel_sample(std::size_t rows, std::size_t cols, RngStream& rng) {
    std::vector<double> v(rows * cols);
    for (double& x : v) x = gumbel_from_uniform(rng.uniform_open01());
    return Tensor::from_data(rows, cols, std::move(v));
}

Tensor gaussian_sample(std::size_t rows, std::size_t cols, RngStream& rng, double mean,
                       double stddev) {
    std::vector<double> v(rows * cols);
    for (double& x : v) x = rng.gaussian(mean, stddev);
    return Tensor::from_data(rows, cols, std::move(v));
}

bool all_finite(const Tensor& m) {
    for (double x : m.data())
        if (!std::isfinite(x)) return false;
    return true;
}

} // namespace vawi
