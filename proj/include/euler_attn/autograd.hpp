#ifndef EULER_ATTN_AUTOGRAD_HPP
#define EULER_ATTN_AUTOGRAD_HPP

// Dense fp64 tensors with a tape-based reverse-mode gradient engine.
// Ops are recorded eagerly; creation order doubles as topological order,
// so backward() replays the reachable subgraph in reverse creation order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace euler_attn {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;   // allocated on first use
    bool requires_grad = false;
    bool leaf = true;
    bool backward_done = false; // set when this node was a backward() root
    std::uint64_t seq = 0;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

inline std::uint64_t next_seq() {
    static std::uint64_t counter = 0;
    return ++counter;
}

} // namespace detail

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return make(std::move(shape), 0.0, requires_grad);
    }

    static Tensor full(Shape shape, double fill, bool requires_grad = false) {
        return make(std::move(shape), fill, requires_grad);
    }

    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false) {
        if (numel(shape) != values.size())
            throw std::invalid_argument("tensor data size " + std::to_string(values.size()) +
                                        " does not match shape " + shape_str(shape));
        Tensor t;
        t.node_ = std::make_shared<detail::Node>();
        t.node_->shape = std::move(shape);
        t.node_->value = std::move(values);
        t.node_->requires_grad = requires_grad;
        t.node_->seq = detail::next_seq();
        return t;
    }

    static Tensor scalar(double v) { return from({1}, {v}); }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node()->shape; }
    std::size_t size() const { return node()->value.size(); }
    std::size_t dim(std::size_t i) const { return node()->shape.at(i); }
    bool requires_grad() const { return node()->requires_grad; }

    const std::vector<double>& value() const { return node()->value; }

    // Leaf-only mutation, used by initialization and optimizer updates.
    std::vector<double>& leaf_value() {
        if (!node()->leaf) throw std::logic_error("cannot mutate a non-leaf tensor");
        return node()->value;
    }

    double item() const {
        if (size() != 1) throw std::invalid_argument("item() on non-scalar tensor " + shape_str(shape()));
        return node()->value[0];
    }

    const std::vector<double>& grad() const {
        if (!node()->requires_grad) throw std::logic_error("grad() on a tensor without gradient tracking");
        node()->ensure_grad();
        return node()->grad;
    }

    void zero_grad() {
        node()->grad.assign(node()->value.size(), 0.0);
    }

    std::shared_ptr<detail::Node> node_ptr() const { return node_; }

private:
    static Tensor make(Shape shape, double fill, bool requires_grad) {
        std::size_t n = numel(shape);
        Tensor t;
        t.node_ = std::make_shared<detail::Node>();
        t.node_->shape = std::move(shape);
        t.node_->value.assign(n, fill);
        t.node_->requires_grad = requires_grad;
        t.node_->seq = detail::next_seq();
        return t;
    }

    detail::Node* node() const {
        if (!node_) throw std::logic_error("use of an empty tensor handle");
        return node_.get();
    }

    std::shared_ptr<detail::Node> node_;
};

namespace detail {

inline Tensor wrap_result(Shape shape, std::vector<double> value,
                          std::vector<std::shared_ptr<Node>> parents,
                          std::function<void(Node&)> backprop) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || p->requires_grad;
    Tensor out = Tensor::from(std::move(shape), std::move(value));
    Node* n = out.node_ptr().get();
    n->leaf = false;
    n->requires_grad = needs;
    if (needs) {
        n->parents = std::move(parents);
        n->backprop = std::move(backprop);
    }
    return out;
}

// Right-aligned broadcasting. Strides are per output dimension, zero where
// the input is broadcast.
struct BroadcastPlan {
    Shape out;
    std::vector<std::size_t> sa, sb;
};

inline BroadcastPlan broadcast_plan(const Shape& a, const Shape& b) {
    std::size_t rank = std::max(a.size(), b.size());
    BroadcastPlan plan;
    plan.out.assign(rank, 1);
    std::vector<std::size_t> da(rank, 1), db(rank, 1);
    for (std::size_t i = 0; i < a.size(); ++i) da[rank - a.size() + i] = a[i];
    for (std::size_t i = 0; i < b.size(); ++i) db[rank - b.size() + i] = b[i];
    for (std::size_t i = 0; i < rank; ++i) {
        if (da[i] == db[i]) plan.out[i] = da[i];
        else if (da[i] == 1) plan.out[i] = db[i];
        else if (db[i] == 1) plan.out[i] = da[i];
        else throw std::invalid_argument("shapes " + shape_str(a) + " and " + shape_str(b) +
                                         " are not broadcast-compatible");
    }
    auto strides = [rank](const std::vector<std::size_t>& dims, const Shape& out) {
        std::vector<std::size_t> st(rank, 0);
        std::size_t acc = 1;
        for (std::size_t i = rank; i-- > 0;) {
            st[i] = (dims[i] == 1 && out[i] != 1) ? 0 : acc;
            acc *= dims[i];
        }
        return st;
    };
    plan.sa = strides(da, plan.out);
    plan.sb = strides(db, plan.out);
    return plan;
}

template <class F>
inline void for_each_broadcast(const BroadcastPlan& plan, F&& fn) {
    std::size_t n = numel(plan.out);
    std::size_t rank = plan.out.size();
    std::vector<std::size_t> idx(rank, 0);
    std::size_t offa = 0, offb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        fn(i, offa, offb);
        for (std::size_t k = rank; k-- > 0;) {
            ++idx[k];
            offa += plan.sa[k];
            offb += plan.sb[k];
            if (idx[k] < plan.out[k]) break;
            offa -= plan.sa[k] * plan.out[k];
            offb -= plan.sb[k] * plan.out[k];
            idx[k] = 0;
        }
    }
}

// Generic broadcasting binary elementwise op. FwdFn(a,b)->value,
// DaFn/DbFn(a,b)->local derivative.
template <class FwdFn, class DaFn, class DbFn>
inline Tensor binary_elementwise(const Tensor& a, const Tensor& b,
                                 FwdFn fwd, DaFn dfda, DbFn dfdb) {
    auto plan = broadcast_plan(a.shape(), b.shape());
    std::vector<double> out(numel(plan.out));
    const auto& va = a.value();
    const auto& vb = b.value();
    for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) {
        out[i] = fwd(va[ia], vb[ib]);
    });
    auto an = a.node_ptr();
    auto bn = b.node_ptr();
    return wrap_result(plan.out, std::move(out), {an, bn},
        [an, bn, plan, dfda, dfdb](Node& self) {
            const auto& va = an->value;
            const auto& vb = bn->value;
            const auto& g = self.grad;
            if (an->requires_grad) an->ensure_grad();
            if (bn->requires_grad) bn->ensure_grad();
            for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) {
                if (an->requires_grad) an->grad[ia] += dfda(va[ia], vb[ib]) * g[i];
                if (bn->requires_grad) bn->grad[ib] += dfdb(va[ia], vb[ib]) * g[i];
            });
        });
}

template <class FwdFn, class DFn>
inline Tensor unary_elementwise(const Tensor& a, FwdFn fwd, DFn dfdx) {
    const auto& va = a.value();
    std::vector<double> out(va.size());
    for (std::size_t i = 0; i < va.size(); ++i) out[i] = fwd(va[i]);
    auto an = a.node_ptr();
    return wrap_result(a.shape(), std::move(out), {an},
        [an, dfdx](Node& self) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                an->grad[i] += dfdx(an->value[i], self.value[i]) * self.grad[i];
        });
}

} // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
    return detail::binary_elementwise(a, b,
        [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    return detail::binary_elementwise(a, b,
        [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    return detail::binary_elementwise(a, b,
        [](double x, double y) { return x * y; },
        [](double, double y) { return y; },
        [](double x, double) { return x; });
}

inline Tensor div(const Tensor& a, const Tensor& b) {
    return detail::binary_elementwise(a, b,
        [](double x, double y) { return x / y; },
        [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

// atan2(0, 0) is defined as 0 with zero gradient.
inline Tensor atan2t(const Tensor& y, const Tensor& x) {
    return detail::binary_elementwise(y, x,
        [](double yy, double xx) { return (yy == 0.0 && xx == 0.0) ? 0.0 : std::atan2(yy, xx); },
        [](double yy, double xx) {
            double d = xx * xx + yy * yy;
            return d == 0.0 ? 0.0 : xx / d;
        },
        [](double yy, double xx) {
            double d = xx * xx + yy * yy;
            return d == 0.0 ? 0.0 : -yy / d;
        });
}

inline Tensor neg(const Tensor& a) {
    return detail::unary_elementwise(a,
        [](double x) { return -x; },
        [](double, double) { return -1.0; });
}

inline Tensor add_scalar(const Tensor& a, double c) {
    return detail::unary_elementwise(a,
        [c](double x) { return x + c; },
        [](double, double) { return 1.0; });
}

inline Tensor mul_scalar(const Tensor& a, double c) {
    return detail::unary_elementwise(a,
        [c](double x) { return x * c; },
        [c](double, double) { return c; });
}

inline Tensor sqrt_t(const Tensor& a) {
    return detail::unary_elementwise(a,
        [](double x) { return std::sqrt(x); },
        [](double, double y) { return 0.5 / y; });
}

inline Tensor sin_t(const Tensor& a) {
    return detail::unary_elementwise(a,
        [](double x) { return std::sin(x); },
        [](double x, double) { return std::cos(x); });
}

inline Tensor cos_t(const Tensor& a) {
    return detail::unary_elementwise(a,
        [](double x) { return std::cos(x); },
        [](double x, double) { return -std::sin(x); });
}

inline Tensor exp_t(const Tensor& a) {
    return detail::unary_elementwise(a,
        [](double x) { return std::exp(x); },
        [](double, double y) { return y; });
}

inline Tensor log_t(const Tensor& a) {
    return detail::unary_elementwise(a,
        [](double x) { return std::log(x); },
        [](double x, double) { return 1.0 / x; });
}

inline Tensor relu(const Tensor& a) {
    return detail::unary_elementwise(a,
        [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

// Canonicalizes angles into (-pi, pi]. The shift is a multiple of 2*pi, so
// the derivative w.r.t. the input is 1 everywhere.
inline Tensor wrap_phase(const Tensor& a) {
    return detail::unary_elementwise(a,
        [](double x) {
            double y = x - 2.0 * M_PI * std::ceil((x - M_PI) / (2.0 * M_PI));
            if (y <= -M_PI) y += 2.0 * M_PI;
            if (y > M_PI) y -= 2.0 * M_PI;
            return y;
        },
        [](double, double) { return 1.0; });
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2)
        throw std::invalid_argument("matmul expects 2-d tensors, got " +
                                    shape_str(a.shape()) + " and " + shape_str(b.shape()));
    std::size_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2)
        throw std::invalid_argument("matmul inner dimensions differ: " +
                                    shape_str(a.shape()) + " x " + shape_str(b.shape()));
    std::vector<double> out(m * n, 0.0);
    const auto& va = a.value();
    const auto& vb = b.value();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            double aip = va[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = vb.data() + p * n;
            double* orow = out.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    auto an = a.node_ptr();
    auto bn = b.node_ptr();
    return detail::wrap_result({m, n}, std::move(out), {an, bn},
        [an, bn, m, k, n](detail::Node& self) {
            const auto& g = self.grad;
            if (an->requires_grad) {
                an->ensure_grad();
                // dA = dC * B^T
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        double acc = 0.0;
                        const double* grow = g.data() + i * n;
                        const double* brow = bn->value.data() + p * n;
                        for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        an->grad[i * k + p] += acc;
                    }
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                // dB = A^T * dC
                for (std::size_t i = 0; i < m; ++i) {
                    const double* arow = an->value.data() + i * k;
                    const double* grow = g.data() + i * n;
                    for (std::size_t p = 0; p < k; ++p) {
                        double aip = arow[p];
                        if (aip == 0.0) continue;
                        double* brow = bn->grad.data() + p * n;
                        for (std::size_t j = 0; j < n; ++j) brow[j] += aip * grow[j];
                    }
                }
            }
        });
}

inline Tensor transpose(const Tensor& a) {
    if (a.shape().size() != 2)
        throw std::invalid_argument("transpose expects a 2-d tensor, got " + shape_str(a.shape()));
    std::size_t m = a.dim(0), n = a.dim(1);
    std::vector<double> out(m * n);
    const auto& va = a.value();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = va[i * n + j];
    auto an = a.node_ptr();
    return detail::wrap_result({n, m}, std::move(out), {an},
        [an, m, n](detail::Node& self) {
            an->ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    an->grad[i * n + j] += self.grad[j * m + i];
        });
}

// Sum over the last dimension, kept as a trailing dimension of size 1.
inline Tensor row_sum(const Tensor& a) {
    if (a.shape().empty()) throw std::invalid_argument("row_sum on a rank-0 tensor");
    std::size_t c = a.shape().back();
    std::size_t rows = a.size() / c;
    std::vector<double> out(rows, 0.0);
    const auto& va = a.value();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < c; ++j) out[r] += va[r * c + j];
    Shape os = a.shape();
    os.back() = 1;
    auto an = a.node_ptr();
    return detail::wrap_result(os, std::move(out), {an},
        [an, rows, c](detail::Node& self) {
            an->ensure_grad();
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t j = 0; j < c; ++j) an->grad[r * c + j] += self.grad[r];
        });
}

inline Tensor sum_all(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.value()) acc += v;
    auto an = a.node_ptr();
    return detail::wrap_result({1}, {acc}, {an},
        [an](detail::Node& self) {
            an->ensure_grad();
            for (auto& g : an->grad) g += self.grad[0];
        });
}

// Row-wise softmax over the last dimension (numerically stable).
inline Tensor softmax_rows(const Tensor& a) {
    if (a.shape().empty()) throw std::invalid_argument("softmax_rows on a rank-0 tensor");
    std::size_t c = a.shape().back();
    std::size_t rows = a.size() / c;
    std::vector<double> out(a.size());
    const auto& va = a.value();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = va.data() + r * c;
        double m = *std::max_element(row, row + c);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - m);
        for (std::size_t j = 0; j < c; ++j) out[r * c + j] = std::exp(row[j] - m) / z;
    }
    auto an = a.node_ptr();
    return detail::wrap_result(a.shape(), std::move(out), {an},
        [an, rows, c](detail::Node& self) {
            an->ensure_grad();
            for (std::size_t r = 0; r < rows; ++r) {
                const double* y = self.value.data() + r * c;
                const double* g = self.grad.data() + r * c;
                double dot = 0.0;
                for (std::size_t j = 0; j < c; ++j) dot += y[j] * g[j];
                for (std::size_t j = 0; j < c; ++j)
                    an->grad[r * c + j] += y[j] * (g[j] - dot);
            }
        });
}

// Mean over rows of -log softmax(row)[target]. Fused for stability; the
// backward is the usual softmax-minus-onehot.
inline Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<std::size_t>& targets) {
    if (logits.shape().size() != 2)
        throw std::invalid_argument("softmax_cross_entropy expects (rows, classes) logits");
    std::size_t rows = logits.dim(0), c = logits.dim(1);
    if (targets.size() != rows)
        throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(targets.size()) +
                                    " targets for " + std::to_string(rows) + " rows");
    const auto& v = logits.value();
    double total = 0.0;
    std::vector<double> probs(rows * c);
    for (std::size_t r = 0; r < rows; ++r) {
        if (targets[r] >= c) throw std::invalid_argument("softmax_cross_entropy: target out of range");
        const double* row = v.data() + r * c;
        double m = *std::max_element(row, row + c);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - m);
        for (std::size_t j = 0; j < c; ++j) probs[r * c + j] = std::exp(row[j] - m) / z;
        total += std::log(z) + m - row[targets[r]];
    }
    auto ln = logits.node_ptr();
    return detail::wrap_result({1}, {total / static_cast<double>(rows)}, {ln},
        [ln, rows, c, targets, probs = std::move(probs)](detail::Node& self) {
            ln->ensure_grad();
            double scale = self.grad[0] / static_cast<double>(rows);
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t j = 0; j < c; ++j)
                    ln->grad[r * c + j] += probs[r * c + j] * scale;
                ln->grad[r * c + targets[r]] -= scale;
            }
        });
}

// Slice [start, start+len) of the last dimension.
inline Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t len) {
    if (a.shape().empty()) throw std::invalid_argument("slice_cols on a rank-0 tensor");
    std::size_t c = a.shape().back();
    if (start + len > c)
        throw std::invalid_argument("slice_cols [" + std::to_string(start) + "," +
                                    std::to_string(start + len) + ") out of range for width " +
                                    std::to_string(c));
    std::size_t rows = a.size() / c;
    std::vector<double> out(rows * len);
    const auto& va = a.value();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < len; ++j) out[r * len + j] = va[r * c + start + j];
    Shape os = a.shape();
    os.back() = len;
    auto an = a.node_ptr();
    return detail::wrap_result(os, std::move(out), {an},
        [an, rows, c, start, len](detail::Node& self) {
            an->ensure_grad();
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t j = 0; j < len; ++j)
                    an->grad[r * c + start + j] += self.grad[r * len + j];
        });
}

// Concatenate along the last dimension.
inline Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != b.shape().size() || a.shape().empty())
        throw std::invalid_argument("concat_cols rank mismatch");
    for (std::size_t i = 0; i + 1 < a.shape().size(); ++i)
        if (a.shape()[i] != b.shape()[i])
            throw std::invalid_argument("concat_cols leading shape mismatch: " +
                                        shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    std::size_t ca = a.shape().back(), cb = b.shape().back();
    std::size_t rows = a.size() / ca;
    std::vector<double> out(rows * (ca + cb));
    const auto& va = a.value();
    const auto& vb = b.value();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < ca; ++j) out[r * (ca + cb) + j] = va[r * ca + j];
        for (std::size_t j = 0; j < cb; ++j) out[r * (ca + cb) + ca + j] = vb[r * cb + j];
    }
    Shape os = a.shape();
    os.back() = ca + cb;
    auto an = a.node_ptr();
    auto bn = b.node_ptr();
    return detail::wrap_result(os, std::move(out), {an, bn},
        [an, bn, rows, ca, cb](detail::Node& self) {
            if (an->requires_grad) an->ensure_grad();
            if (bn->requires_grad) bn->ensure_grad();
            for (std::size_t r = 0; r < rows; ++r) {
                if (an->requires_grad)
                    for (std::size_t j = 0; j < ca; ++j)
                        an->grad[r * ca + j] += self.grad[r * (ca + cb) + j];
                if (bn->requires_grad)
                    for (std::size_t j = 0; j < cb; ++j)
                        bn->grad[r * cb + j] += self.grad[r * (ca + cb) + ca + j];
            }
        });
}

// Same data, new shape. The element count must match.
inline Tensor reshape(const Tensor& a, Shape shape) {
    if (numel(shape) != a.size())
        throw std::invalid_argument("reshape " + shape_str(a.shape()) + " -> " + shape_str(shape) +
                                    " changes the element count");
    auto an = a.node_ptr();
    return detail::wrap_result(std::move(shape), a.value(), {an},
        [an](detail::Node& self) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        });
}

// Vertical concatenation of 2-d tensors with equal widths.
inline Tensor vstack(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("vstack of nothing");
    std::size_t c = parts[0].dim(1);
    Tensor flat = reshape(parts[0], {parts[0].size()});
    std::size_t rows = parts[0].dim(0);
    for (std::size_t i = 1; i < parts.size(); ++i) {
        if (parts[i].shape().size() != 2 || parts[i].dim(1) != c)
            throw std::invalid_argument("vstack width mismatch");
        flat = concat_cols(flat, reshape(parts[i], {parts[i].size()}));
        rows += parts[i].dim(0);
    }
    return reshape(flat, {rows, c});
}

// Contiguous block of rows of a 2-d tensor.
inline Tensor take_rows(const Tensor& a, std::size_t start, std::size_t count);

// Row lookup into a 2-d table; the backward scatter-adds, so repeated ids
// accumulate.
inline Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& ids) {
    if (table.shape().size() != 2)
        throw std::invalid_argument("gather_rows expects a 2-d table");
    std::size_t rows = table.dim(0), c = table.dim(1);
    std::vector<double> out(ids.size() * c);
    const auto& vt = table.value();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= rows)
            throw std::invalid_argument("gather_rows id " + std::to_string(ids[i]) +
                                        " out of range for table with " + std::to_string(rows) + " rows");
        std::copy_n(vt.data() + ids[i] * c, c, out.data() + i * c);
    }
    auto tn = table.node_ptr();
    return detail::wrap_result({ids.size(), c}, std::move(out), {tn},
        [tn, ids, c](detail::Node& self) {
            tn->ensure_grad();
            for (std::size_t i = 0; i < ids.size(); ++i)
                for (std::size_t j = 0; j < c; ++j)
                    tn->grad[ids[i] * c + j] += self.grad[i * c + j];
        });
}

inline Tensor take_rows(const Tensor& a, std::size_t start, std::size_t count) {
    if (a.shape().size() != 2)
        throw std::invalid_argument("take_rows expects a 2-d tensor");
    if (start + count > a.dim(0))
        throw std::invalid_argument("take_rows range out of bounds");
    std::vector<std::size_t> ids(count);
    std::iota(ids.begin(), ids.end(), start);
    return gather_rows(a, ids);
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator+(const Tensor& a, double c) { return add_scalar(a, c); }
inline Tensor operator-(const Tensor& a, double c) { return add_scalar(a, -c); }
inline Tensor operator*(const Tensor& a, double c) { return mul_scalar(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return mul_scalar(a, c); }
inline Tensor operator/(const Tensor& a, double c) { return mul_scalar(a, 1.0 / c); }

// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
// reachable tensor with requires_grad set.
inline void backward(const Tensor& loss) {
    auto root = loss.node_ptr();
    if (!root) throw std::logic_error("backward on an empty tensor handle");
    if (root->value.size() != 1)
        throw std::invalid_argument("backward requires a scalar loss, got " + shape_str(root->shape));
    if (!root->requires_grad)
        throw std::invalid_argument("backward on a tensor detached from any tracked input");
    if (root->backward_done)
        throw std::logic_error("backward called twice on the same forward pass");
    root->backward_done = true;

    // Creation order is a topological order; reverse-sorted reachable nodes
    // give the exact reverse traversal.
    std::vector<detail::Node*> order;
    std::vector<detail::Node*> stack{root.get()};
    std::unordered_set<detail::Node*> seen;
    while (!stack.empty()) {
        detail::Node* n = stack.back();
        stack.pop_back();
        if (!seen.insert(n).second) continue;
        order.push_back(n);
        for (const auto& p : n->parents)
            if (p->requires_grad) stack.push_back(p.get());
    }
    std::sort(order.begin(), order.end(),
              [](const detail::Node* a, const detail::Node* b) { return a->seq > b->seq; });

    root->ensure_grad();
    root->grad[0] += 1.0;
    for (detail::Node* n : order)
        if (n->backprop) n->backprop(*n);
}

inline bool all_finite(const Tensor& t) {
    for (double v : t.value())
        if (!std::isfinite(v)) return false;
    return true;
}

} // namespace euler_attn

#endif
