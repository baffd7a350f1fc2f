#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "skyfuse/errors.hpp"
#include "skyfuse/rng.hpp"
#include "skyfuse/tensor.hpp"

namespace skyfuse {

template <typename S>
class Var;

namespace detail {

template <typename S>
struct Node {
    Tensor<S> out;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node<S>>> parents;
    std::function<void()> backprop;  // reads out.grad(), adds into parent grads
    bool needs_grad = false;

    bool is_leaf() const { return parents.empty() && out.requires_grad(); }
};

template <typename S>
inline thread_local bool grad_mode_enabled = true;

template <typename S>
Var<S> from_node(std::shared_ptr<Node<S>> node);

}  // namespace detail

/// Disables graph recording for its scope (evaluation, benchmarking).
class NoGradGuard {
public:
    NoGradGuard()
        : prev_f_(detail::grad_mode_enabled<float>),
          prev_d_(detail::grad_mode_enabled<double>) {
        detail::grad_mode_enabled<float> = false;
        detail::grad_mode_enabled<double> = false;
    }
    ~NoGradGuard() {
        detail::grad_mode_enabled<float> = prev_f_;
        detail::grad_mode_enabled<double> = prev_d_;
    }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_f_, prev_d_;
};

/// Handle to a tensor in the recorded compute graph. Cheap to copy; the
/// underlying node (value, gradient, recorded inputs) is shared.
///
/// Gradients accumulate additively across backward() calls; callers zero
/// them between optimizer steps.
template <typename S>
class Var {
public:
    Var() = default;

    explicit Var(Tensor<S> value, bool requires_grad = false)
        : node_(std::make_shared<detail::Node<S>>()) {
        node_->out = std::move(value);
        node_->out.set_requires_grad(requires_grad);
        node_->needs_grad = requires_grad;
    }

    const Tensor<S>& value() const { return node_->out; }
    /// Mutable access for in-place parameter updates.
    Tensor<S>& tensor() { return node_->out; }

    const std::vector<S>& grad() const { return node_->out.grad(); }
    bool has_grad() const { return node_->out.has_grad(); }
    void zero_grad() { node_->out.zero_grad(); }

    bool requires_grad() const { return node_ && node_->needs_grad; }
    bool defined() const { return node_ != nullptr; }

    const Shape& shape() const { return node_->out.shape(); }
    std::size_t size() const { return node_->out.size(); }

    /// Copy of the value with no graph history and no gradient.
    Var detach() const { return Var(Tensor<S>(shape(), node_->out.values())); }

    detail::Node<S>* node() const { return node_.get(); }
    std::shared_ptr<detail::Node<S>> node_ptr() const { return node_; }

private:
    explicit Var(std::shared_ptr<detail::Node<S>> node) : node_(std::move(node)) {}

    template <typename T>
    friend Var<T> detail::from_node(std::shared_ptr<detail::Node<T>>);

    std::shared_ptr<detail::Node<S>> node_;
};

namespace detail {

template <typename S>
Var<S> from_node(std::shared_ptr<Node<S>> node) {
    return Var<S>(std::move(node));
}

template <typename S>
using EMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using EMap = Eigen::Map<EMat<S>>;
template <typename S>
using ECMap = Eigen::Map<const EMat<S>>;

/// Builds an op node. `make_backprop` receives the finished node and returns
/// its backward closure; it is only invoked when the result participates in
/// gradient computation, so saved activations are not captured in eval mode.
template <typename S, typename MakeBackprop>
Var<S> make_op(const char* op, Tensor<S> out, std::vector<Var<S>> inputs,
               MakeBackprop&& make_backprop) {
    auto node = std::make_shared<Node<S>>();
    node->out = std::move(out);
    node->op = op;

    bool needs = false;
    if (grad_mode_enabled<S>) {
        for (const auto& v : inputs) needs = needs || v.requires_grad();
    }
    node->needs_grad = needs;
    if (needs) {
        node->parents.reserve(inputs.size());
        for (auto& v : inputs) node->parents.push_back(v.node_ptr());
        node->backprop = make_backprop(node.get());
    }
    return from_node(std::move(node));
}

template <typename S>
void add_into(std::vector<S>& dst, const std::vector<S>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

/// Splits a shape around `axis` into (outer, n, inner) extents.
inline void axis_split(const Shape& shape, std::size_t axis, std::size_t& outer,
                       std::size_t& n, std::size_t& inner) {
    outer = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
    n = shape[axis];
    inner = 1;
    for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
}

inline std::size_t checked_axis(const Shape& shape, int axis, const char* op) {
    const int r = static_cast<int>(shape.size());
    const int a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r)
        throw ValueError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(shape));
    return static_cast<std::size_t>(a);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and broadcast arithmetic
// ---------------------------------------------------------------------------

/// a + b. Shapes must match, or the smaller operand's shape must be a
/// trailing suffix of the larger one (bias vectors, positional tables).
template <typename S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();

    const bool b_suffix = sb.size() <= sa.size() &&
                          std::equal(sb.rbegin(), sb.rend(), sa.rbegin());
    const bool a_suffix = sa.size() <= sb.size() &&
                          std::equal(sa.rbegin(), sa.rend(), sb.rbegin());
    if (!b_suffix && !a_suffix)
        throw ShapeError("add: incompatible shapes " + shape_str(sa) + " and " +
                         shape_str(sb));
    if (!b_suffix) return add(b, a);

    const std::size_t nb = b.size();
    const std::size_t repeats = a.size() / std::max<std::size_t>(nb, 1);
    Tensor<S> out(sa);
    {
        const S* pa = a.value().data();
        const S* pb = b.value().data();
        S* po = out.data();
        for (std::size_t r = 0; r < repeats; ++r)
            for (std::size_t i = 0; i < nb; ++i, ++po, ++pa) *po = *pa + pb[i];
    }
    return detail::make_op<S>("add", std::move(out), {a, b}, [=](detail::Node<S>* n) {
        return [n, nb, repeats]() {
            const auto& dy = n->out.grad();
            auto* pa = n->parents[0].get();
            auto* pb = n->parents[1].get();
            if (pa->needs_grad) {
                pa->out.ensure_grad();
                detail::add_into(pa->out.grad(), dy);
            }
            if (pb->needs_grad) {
                pb->out.ensure_grad();
                auto& gb = pb->out.grad();
                const S* pdy = dy.data();
                for (std::size_t r = 0; r < repeats; ++r)
                    for (std::size_t i = 0; i < nb; ++i, ++pdy) gb[i] += *pdy;
            }
        };
    });
}

/// Elementwise product; shapes must match exactly.
template <typename S>
Var<S> mul(const Var<S>& a, const Var<S>& b) {
    if (a.shape() != b.shape())
        throw ShapeError("mul: shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " differ");
    Tensor<S> out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = a.value()[i] * b.value()[i];
    return detail::make_op<S>("mul", std::move(out), {a, b}, [](detail::Node<S>* n) {
        return [n]() {
            const auto& dy = n->out.grad();
            auto* pa = n->parents[0].get();
            auto* pb = n->parents[1].get();
            if (pa->needs_grad) {
                pa->out.ensure_grad();
                auto& ga = pa->out.grad();
                const auto& vb = pb->out.values();
                for (std::size_t i = 0; i < dy.size(); ++i) ga[i] += dy[i] * vb[i];
            }
            if (pb->needs_grad) {
                pb->out.ensure_grad();
                auto& gb = pb->out.grad();
                const auto& va = pa->out.values();
                for (std::size_t i = 0; i < dy.size(); ++i) gb[i] += dy[i] * va[i];
            }
        };
    });
}

/// x * c for a plain scalar c.
template <typename S>
Var<S> scale(const Var<S>& x, S c) {
    Tensor<S> out(x.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] * c;
    return detail::make_op<S>("scale", std::move(out), {x}, [c](detail::Node<S>* n) {
        return [n, c]() {
            auto* p = n->parents[0].get();
            if (!p->needs_grad) return;
            p->out.ensure_grad();
            const auto& dy = n->out.grad();
            auto& gx = p->out.grad();
            for (std::size_t i = 0; i < dy.size(); ++i) gx[i] += dy[i] * c;
        };
    });
}

template <typename S>
Var<S> operator+(const Var<S>& a, const Var<S>& b) { return add(a, b); }
template <typename S>
Var<S> operator*(const Var<S>& a, const Var<S>& b) { return mul(a, b); }
template <typename S>
Var<S> operator*(const Var<S>& x, S c) { return scale(x, c); }

// ---------------------------------------------------------------------------
// Matrix product
// ---------------------------------------------------------------------------

/// Batched matrix product: a[..., m, k] x b[..., k, n] -> [..., m, n].
/// Leading (batch) extents must match exactly, or be absent on one side,
/// in which case that operand is shared across the batch.
template <typename S>
Var<S> matmul(const Var<S>& a, const Var<S>& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.size() < 2 || sb.size() < 2)
        throw ShapeError("matmul: operands must have rank >= 2, got " +
                         shape_str(sa) + " and " + shape_str(sb));

    const std::size_t m = sa[sa.size() - 2], k = sa[sa.size() - 1];
    const std::size_t k2 = sb[sb.size() - 2], n = sb[sb.size() - 1];
    Shape batch_a(sa.begin(), sa.end() - 2);
    Shape batch_b(sb.begin(), sb.end() - 2);
    if (k != k2 || (!batch_a.empty() && !batch_b.empty() && batch_a != batch_b))
        throw ShapeError("matmul: incompatible shapes " + shape_str(sa) + " and " +
                         shape_str(sb));

    const Shape& batch = batch_a.empty() ? batch_b : batch_a;
    const std::size_t nbatch = shape_numel(batch);
    const bool a_batched = !batch_a.empty();
    const bool b_batched = !batch_b.empty();

    Shape out_shape = batch;
    out_shape.push_back(m);
    out_shape.push_back(n);
    Tensor<S> out(std::move(out_shape));

    using detail::ECMap;
    using detail::EMap;
    for (std::size_t i = 0; i < nbatch; ++i) {
        ECMap<S> A(a.value().data() + (a_batched ? i * m * k : 0), m, k);
        ECMap<S> B(b.value().data() + (b_batched ? i * k * n : 0), k, n);
        EMap<S> C(out.data() + i * m * n, m, n);
        C.noalias() = A * B;
    }

    return detail::make_op<S>(
        "matmul", std::move(out), {a, b},
        [=](detail::Node<S>* node) {
            return [node, m, k, n, nbatch, a_batched, b_batched]() {
                auto* pa = node->parents[0].get();
                auto* pb = node->parents[1].get();
                if (pa->needs_grad) pa->out.ensure_grad();
                if (pb->needs_grad) pb->out.ensure_grad();
                for (std::size_t i = 0; i < nbatch; ++i) {
                    ECMap<S> dC(node->out.grad().data() + i * m * n, m, n);
                    if (pa->needs_grad) {
                        ECMap<S> B(pb->out.values().data() + (b_batched ? i * k * n : 0), k, n);
                        EMap<S> dA(pa->out.grad().data() + (a_batched ? i * m * k : 0), m, k);
                        dA.noalias() += dC * B.transpose();
                    }
                    if (pb->needs_grad) {
                        ECMap<S> A(pa->out.values().data() + (a_batched ? i * m * k : 0), m, k);
                        EMap<S> dB(pb->out.grad().data() + (b_batched ? i * k * n : 0), k, n);
                        dB.noalias() += A.transpose() * dC;
                    }
                }
            };
        });
}

// ---------------------------------------------------------------------------
// Shape manipulation
// ---------------------------------------------------------------------------

template <typename S>
Var<S> reshape(const Var<S>& x, Shape new_shape) {
    if (shape_numel(new_shape) != x.size())
        throw ShapeError("reshape: " + shape_str(x.shape()) + " has " +
                         std::to_string(x.size()) + " elements, target " +
                         shape_str(new_shape) + " has " +
                         std::to_string(shape_numel(new_shape)));
    Tensor<S> out(std::move(new_shape), std::vector<S>(x.value().values()));
    return detail::make_op<S>("reshape", std::move(out), {x}, [](detail::Node<S>* n) {
        return [n]() {
            auto* p = n->parents[0].get();
            if (!p->needs_grad) return;
            p->out.ensure_grad();
            detail::add_into(p->out.grad(), n->out.grad());
        };
    });
}

namespace detail {

template <typename S>
void permute_two(const Shape& in_shape, const S* src, std::size_t ax0,
                 std::size_t ax1, S* dst) {
    // Generic two-axis swap via index arithmetic.
    Shape out_shape = in_shape;
    std::swap(out_shape[ax0], out_shape[ax1]);
    const std::size_t rank = in_shape.size();
    std::vector<std::size_t> in_strides(rank, 1), out_strides(rank, 1);
    for (std::size_t i = rank - 1; i-- > 0;) {
        in_strides[i] = in_strides[i + 1] * in_shape[i + 1];
        out_strides[i] = out_strides[i + 1] * out_shape[i + 1];
    }
    const std::size_t total = shape_numel(in_shape);
    std::vector<std::size_t> idx(rank, 0);
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rem = flat;
        std::size_t dst_off = 0;
        for (std::size_t d = 0; d < rank; ++d) {
            idx[d] = rem / in_strides[d];
            rem %= in_strides[d];
        }
        std::swap(idx[ax0], idx[ax1]);
        for (std::size_t d = 0; d < rank; ++d) dst_off += idx[d] * out_strides[d];
        dst[dst_off] = src[flat];
    }
}

}  // namespace detail

/// Swaps two axes (copying).
template <typename S>
Var<S> transpose(const Var<S>& x, int axis0, int axis1) {
    const std::size_t a0 = detail::checked_axis(x.shape(), axis0, "transpose");
    const std::size_t a1 = detail::checked_axis(x.shape(), axis1, "transpose");
    Shape out_shape = x.shape();
    std::swap(out_shape[a0], out_shape[a1]);
    Tensor<S> out(out_shape);
    detail::permute_two(x.shape(), x.value().data(), a0, a1, out.data());
    return detail::make_op<S>(
        "transpose", std::move(out), {x}, [a0, a1](detail::Node<S>* n) {
            return [n, a0, a1]() {
                auto* p = n->parents[0].get();
                if (!p->needs_grad) return;
                p->out.ensure_grad();
                // Swapping the same axes again inverts the permutation.
                Tensor<S> tmp(p->out.shape());
                detail::permute_two(n->out.shape(), n->out.grad().data(), a0, a1,
                                    tmp.data());
                detail::add_into(p->out.grad(), tmp.values());
            };
        });
}

// ---------------------------------------------------------------------------
// Nonlinearities and normalization
// ---------------------------------------------------------------------------

/// Numerically stable softmax along `axis` (max-subtracted).
template <typename S>
Var<S> softmax(const Var<S>& x, int axis) {
    const std::size_t ax = detail::checked_axis(x.shape(), axis, "softmax");
    std::size_t outer, n, inner;
    detail::axis_split(x.shape(), ax, outer, n, inner);

    Tensor<S> out(x.shape());
    const S* px = x.value().data();
    S* py = out.data();
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
            const std::size_t base = o * n * inner + i;
            S mx = px[base];
            for (std::size_t j = 1; j < n; ++j)
                mx = std::max(mx, px[base + j * inner]);
            S sum = S(0);
            for (std::size_t j = 0; j < n; ++j) {
                const S e = std::exp(px[base + j * inner] - mx);
                py[base + j * inner] = e;
                sum += e;
            }
            const S inv = S(1) / sum;
            for (std::size_t j = 0; j < n; ++j) py[base + j * inner] *= inv;
        }
    }

    return detail::make_op<S>(
        "softmax", std::move(out), {x}, [outer, n, inner](detail::Node<S>* node) {
            return [node, outer, n, inner]() {
                auto* p = node->parents[0].get();
                if (!p->needs_grad) return;
                p->out.ensure_grad();
                const auto& y = node->out.values();
                const auto& dy = node->out.grad();
                auto& gx = p->out.grad();
                for (std::size_t o = 0; o < outer; ++o) {
                    for (std::size_t i = 0; i < inner; ++i) {
                        const std::size_t base = o * n * inner + i;
                        S dot = S(0);
                        for (std::size_t j = 0; j < n; ++j) {
                            const std::size_t ix = base + j * inner;
                            dot += dy[ix] * y[ix];
                        }
                        for (std::size_t j = 0; j < n; ++j) {
                            const std::size_t ix = base + j * inner;
                            gx[ix] += y[ix] * (dy[ix] - dot);
                        }
                    }
                }
            };
        });
}

namespace detail {

template <typename S>
S normal_cdf(S x) {
    return S(0.5) * (S(1) + std::erf(x * S(0.70710678118654752440)));
}

template <typename S>
S normal_pdf(S x) {
    return S(0.39894228040143267794) * std::exp(S(-0.5) * x * x);
}

}  // namespace detail

/// GELU in its exact form x * Phi(x), with Phi the standard normal CDF.
template <typename S>
Var<S> gelu(const Var<S>& x) {
    Tensor<S> out(x.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const S v = x.value()[i];
        out[i] = v * detail::normal_cdf(v);
    }
    return detail::make_op<S>("gelu", std::move(out), {x}, [](detail::Node<S>* n) {
        return [n]() {
            auto* p = n->parents[0].get();
            if (!p->needs_grad) return;
            p->out.ensure_grad();
            const auto& xv = p->out.values();
            const auto& dy = n->out.grad();
            auto& gx = p->out.grad();
            for (std::size_t i = 0; i < dy.size(); ++i) {
                const S v = xv[i];
                gx[i] += dy[i] * (detail::normal_cdf(v) + v * detail::normal_pdf(v));
            }
        };
    });
}

/// Layer normalization over the last axis, then gain * xhat + bias.
/// eps floors the variance, so constant rows normalize to zero.
template <typename S>
Var<S> layer_norm(const Var<S>& x, const Var<S>& gain, const Var<S>& bias,
                  S eps = S(1e-5)) {
    const Shape& sx = x.shape();
    if (sx.empty()) throw ShapeError("layer_norm: scalar input");
    const std::size_t d = sx.back();
    if (gain.shape() != Shape{d} || bias.shape() != Shape{d})
        throw ShapeError("layer_norm: gain/bias must be (" + std::to_string(d) +
                         "), got " + shape_str(gain.shape()) + " and " +
                         shape_str(bias.shape()));

    const std::size_t rows = x.size() / d;
    Tensor<S> out(sx);
    std::vector<S> xhat(x.size());
    std::vector<S> inv_std(rows);

    const S* px = x.value().data();
    const S* pg = gain.value().data();
    const S* pb = bias.value().data();
    S* py = out.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const S* row = px + r * d;
        S mean = S(0);
        for (std::size_t j = 0; j < d; ++j) mean += row[j];
        mean /= S(d);
        S var = S(0);
        for (std::size_t j = 0; j < d; ++j) {
            const S c = row[j] - mean;
            var += c * c;
        }
        var /= S(d);
        const S istd = S(1) / std::sqrt(var + eps);
        inv_std[r] = istd;
        for (std::size_t j = 0; j < d; ++j) {
            const S xh = (row[j] - mean) * istd;
            xhat[r * d + j] = xh;
            py[r * d + j] = pg[j] * xh + pb[j];
        }
    }

    return detail::make_op<S>(
        "layer_norm", std::move(out), {x, gain, bias},
        [rows, d, xh = std::move(xhat), istd = std::move(inv_std)](detail::Node<S>* n) {
            return [n, rows, d, xh, istd]() {
                auto* px_ = n->parents[0].get();
                auto* pg_ = n->parents[1].get();
                auto* pb_ = n->parents[2].get();
                const auto& dy = n->out.grad();
                const auto& g = pg_->out.values();
                if (px_->needs_grad) {
                    px_->out.ensure_grad();
                    auto& gx = px_->out.grad();
                    for (std::size_t r = 0; r < rows; ++r) {
                        const std::size_t base = r * d;
                        S sum_t = S(0), sum_tx = S(0);
                        for (std::size_t j = 0; j < d; ++j) {
                            const S t = dy[base + j] * g[j];
                            sum_t += t;
                            sum_tx += t * xh[base + j];
                        }
                        const S mt = sum_t / S(d);
                        const S mtx = sum_tx / S(d);
                        for (std::size_t j = 0; j < d; ++j) {
                            const S t = dy[base + j] * g[j];
                            gx[base + j] += istd[r] * (t - mt - xh[base + j] * mtx);
                        }
                    }
                }
                if (pg_->needs_grad) {
                    pg_->out.ensure_grad();
                    auto& gg = pg_->out.grad();
                    for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t j = 0; j < d; ++j)
                            gg[j] += dy[r * d + j] * xh[r * d + j];
                }
                if (pb_->needs_grad) {
                    pb_->out.ensure_grad();
                    auto& gb = pb_->out.grad();
                    for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t j = 0; j < d; ++j) gb[j] += dy[r * d + j];
                }
            };
        });
}

/// Inverted dropout: in training mode each element is zeroed with
/// probability `rate` and survivors are scaled by 1/(1-rate), so the eval
/// path is the identity.
template <typename S>
Var<S> dropout(const Var<S>& x, double rate, bool training, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0)
        throw ValueError("dropout: rate must lie in [0, 1), got " +
                         std::to_string(rate));
    if (!training || rate == 0.0) return x;

    const S keep_scale = S(1.0 / (1.0 - rate));
    std::vector<S> mask(x.size());
    Tensor<S> out(x.shape());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = rng.uniform() >= rate ? keep_scale : S(0);
        out[i] = x.value()[i] * mask[i];
    }
    return detail::make_op<S>(
        "dropout", std::move(out), {x}, [m = std::move(mask)](detail::Node<S>* n) {
            return [n, m]() {
                auto* p = n->parents[0].get();
                if (!p->needs_grad) return;
                p->out.ensure_grad();
                const auto& dy = n->out.grad();
                auto& gx = p->out.grad();
                for (std::size_t i = 0; i < dy.size(); ++i) gx[i] += dy[i] * m[i];
            };
        });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

/// Arithmetic mean along `axis`; the axis is removed (rank-1 inputs yield a
/// one-element tensor). The gradient distributes 1/n to each contributor.
template <typename S>
Var<S> mean_axis(const Var<S>& x, int axis) {
    const std::size_t ax = detail::checked_axis(x.shape(), axis, "mean_axis");
    std::size_t outer, n, inner;
    detail::axis_split(x.shape(), ax, outer, n, inner);

    Shape out_shape;
    for (std::size_t i = 0; i < x.shape().size(); ++i)
        if (i != ax) out_shape.push_back(x.shape()[i]);
    if (out_shape.empty()) out_shape.push_back(1);

    Tensor<S> out(out_shape);
    const S* px = x.value().data();
    const S inv_n = S(1) / S(n);
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
            S acc = S(0);
            for (std::size_t j = 0; j < n; ++j)
                acc += px[(o * n + j) * inner + i];
            out[o * inner + i] = acc * inv_n;
        }
    }

    return detail::make_op<S>(
        "mean_axis", std::move(out), {x},
        [outer, n, inner, inv_n](detail::Node<S>* node) {
            return [node, outer, n, inner, inv_n]() {
                auto* p = node->parents[0].get();
                if (!p->needs_grad) return;
                p->out.ensure_grad();
                const auto& dy = node->out.grad();
                auto& gx = p->out.grad();
                for (std::size_t o = 0; o < outer; ++o)
                    for (std::size_t j = 0; j < n; ++j)
                        for (std::size_t i = 0; i < inner; ++i)
                            gx[(o * n + j) * inner + i] += dy[o * inner + i] * inv_n;
            };
        });
}

/// Sum of all elements (scalar result).
template <typename S>
Var<S> sum(const Var<S>& x) {
    S acc = S(0);
    for (std::size_t i = 0; i < x.size(); ++i) acc += x.value()[i];
    return detail::make_op<S>("sum", Tensor<S>::scalar(acc), {x},
                              [](detail::Node<S>* n) {
                                  return [n]() {
                                      auto* p = n->parents[0].get();
                                      if (!p->needs_grad) return;
                                      p->out.ensure_grad();
                                      const S dy = n->out.grad()[0];
                                      for (auto& g : p->out.grad()) g += dy;
                                  };
                              });
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

/// Mean negative log-likelihood of the labeled class under softmax(logits),
/// computed with max-subtracted log-sum-exp.
template <typename S>
Var<S> cross_entropy(const Var<S>& logits, std::span<const int> labels) {
    const Shape& sl = logits.shape();
    if (sl.size() != 2)
        throw ShapeError("cross_entropy: logits must be (batch x classes), got " +
                         shape_str(sl));
    const std::size_t batch = sl[0], classes = sl[1];
    if (labels.size() != batch)
        throw ShapeError("cross_entropy: " + std::to_string(labels.size()) +
                         " labels for batch " + std::to_string(batch));
    for (int lab : labels)
        if (lab < 0 || static_cast<std::size_t>(lab) >= classes)
            throw ValueError("cross_entropy: label " + std::to_string(lab) +
                             " outside [0, " + std::to_string(classes) + ")");

    std::vector<S> probs(logits.size());
    const S* pl = logits.value().data();
    S loss = S(0);
    for (std::size_t i = 0; i < batch; ++i) {
        const S* row = pl + i * classes;
        S mx = row[0];
        for (std::size_t k = 1; k < classes; ++k) mx = std::max(mx, row[k]);
        S sum_exp = S(0);
        for (std::size_t k = 0; k < classes; ++k) {
            const S e = std::exp(row[k] - mx);
            probs[i * classes + k] = e;
            sum_exp += e;
        }
        const S inv = S(1) / sum_exp;
        for (std::size_t k = 0; k < classes; ++k) probs[i * classes + k] *= inv;
        loss += mx + std::log(sum_exp) - row[labels[i]];
    }
    loss /= S(batch);

    std::vector<int> labels_copy(labels.begin(), labels.end());
    return detail::make_op<S>(
        "cross_entropy", Tensor<S>::scalar(loss), {logits},
        [batch, classes, p = std::move(probs),
         lab = std::move(labels_copy)](detail::Node<S>* n) {
            return [n, batch, classes, p, lab]() {
                auto* parent = n->parents[0].get();
                if (!parent->needs_grad) return;
                parent->out.ensure_grad();
                const S dy = n->out.grad()[0] / S(batch);
                auto& gx = parent->out.grad();
                for (std::size_t i = 0; i < batch; ++i) {
                    for (std::size_t k = 0; k < classes; ++k) {
                        const S onehot =
                            k == static_cast<std::size_t>(lab[i]) ? S(1) : S(0);
                        gx[i * classes + k] += dy * (p[i * classes + k] - onehot);
                    }
                }
            };
        });
}

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

/// Reverse-mode sweep from a scalar loss. Interior gradients are scratch and
/// reset per call; leaf gradients accumulate across calls until zeroed.
template <typename S>
void backward(const Var<S>& loss) {
    if (loss.size() != 1)
        throw ShapeError("backward: loss must be scalar, got " +
                         shape_str(loss.shape()));
    auto* root = loss.node();
    if (!root->needs_grad) return;  // nothing reaches a trainable leaf

    // Depth-first topological order over nodes that participate in grads.
    std::vector<detail::Node<S>*> order;
    std::unordered_set<detail::Node<S>*> seen;
    std::vector<std::pair<detail::Node<S>*, std::size_t>> stack{{root, 0}};
    seen.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            auto* parent = node->parents[next++].get();
            if (parent->needs_grad && !seen.count(parent))
                stack.push_back({parent, 0}), seen.insert(parent);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (auto* node : order) {
        node->out.ensure_grad();
        if (!node->is_leaf()) node->out.zero_grad();
    }
    root->out.grad()[0] += S(1);

    // `order` ends at the root; run it back-to-front.
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backprop) (*it)->backprop();
}

// ---------------------------------------------------------------------------
// Gradient verification
// ---------------------------------------------------------------------------

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
    std::vector<std::size_t> failing_indices;
    bool passed = true;
};

/// Compares reverse-mode gradients of a scalar-valued function against
/// central finite differences (f(x+h) - f(x-h)) / 2h, element by element.
/// Run with S = double; float differences are too noisy at useful h.
template <typename S>
GradCheckReport grad_check(const std::function<Var<S>(const Var<S>&)>& f,
                           const Tensor<S>& x0, double h, double tol) {
    Var<S> x(Tensor<S>(x0.shape(), x0.values()), /*requires_grad=*/true);
    Var<S> loss = f(x);
    if (loss.size() != 1)
        throw ShapeError("grad_check: function must be scalar-valued");
    backward(loss);
    const std::vector<S> analytic = x.grad();

    GradCheckReport report;
    report.checked = x0.size();
    Tensor<S> probe(x0.shape(), x0.values());
    for (std::size_t i = 0; i < x0.size(); ++i) {
        const S saved = probe[i];
        probe[i] = saved + S(h);
        const double fp = static_cast<double>(f(Var<S>(probe)).value()[0]);
        probe[i] = saved - S(h);
        const double fm = static_cast<double>(f(Var<S>(probe)).value()[0]);
        probe[i] = saved;

        const double numeric = (fp - fm) / (2.0 * h);
        const double a = static_cast<double>(analytic[i]);
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
        const double rel = std::abs(a - numeric) / denom;
        if (rel > report.max_rel_error) {
            report.max_rel_error = rel;
            report.worst_index = i;
        }
        if (rel > tol) report.failing_indices.push_back(i);
    }
    report.passed = report.failing_indices.empty();
    return report;
}

}  // namespace skyfuse
