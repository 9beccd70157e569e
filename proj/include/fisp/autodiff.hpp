#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "fisp/tensor.hpp"

namespace fisp::ad {

// Define-by-run reverse-mode autodiff over NCHW tensors. Each op builds a
// Node holding its value, its parents, and a closure that scatters the
// node's gradient back into the parents. backward() walks the graph in
// reverse topological order. Graphs are rebuilt every iteration; leaf
// parameter nodes persist across iterations.
class Node {
  public:
    Tensor val;
    Tensor grad;  // allocated on first use, same shape as val
    bool needs = false;
    std::vector<std::shared_ptr<Node>> prev;
    std::function<void()> back;

    Tensor& grad_buf() {
        if (grad.numel() == 0) grad = Tensor(val.n, val.c, val.h, val.w);
        return grad;
    }
    void zero_grad() {
        if (grad.numel() != 0) std::fill(grad.v.begin(), grad.v.end(), 0.0);
    }
};

using Var = std::shared_ptr<Node>;

inline Var leaf(Tensor t, bool needs_grad = false) {
    auto n = std::make_shared<Node>();
    n->val = std::move(t);
    n->needs = needs_grad;
    return n;
}

inline Var constant(Tensor t) { return leaf(std::move(t), false); }

namespace detail {

inline Var make_node(Tensor value, std::vector<Var> parents) {
    auto n = std::make_shared<Node>();
    n->val = std::move(value);
    for (const auto& p : parents)
        if (p->needs) n->needs = true;
    n->prev = std::move(parents);
    return n;
}

}  // namespace detail

// Reverse topological order via iterative post-order DFS from the root.
inline void backward(const Var& root) {
    if (root->val.numel() != 1) throw NumericError("backward: root must be a scalar");
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.push_back({root.get(), 0});
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->prev.size()) {
            Node* child = node->prev[next++].get();
            if (child->needs && !seen.count(child)) {
                seen.insert(child);
                stack.push_back({child, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->grad_buf().v[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->back) (*it)->back();
}

// ---------------------------------------------------------------------------
// elementwise and reduction ops
// ---------------------------------------------------------------------------

inline Var add(const Var& a, const Var& b) {
    require_same_shape(a->val, b->val, "add");
    Tensor out = a->val;
    for (std::int64_t i = 0; i < out.numel(); ++i) out.v[i] += b->val.v[i];
    Var n = detail::make_node(std::move(out), {a, b});
    if (n->needs) {
        Node* np = n.get();
        Node* ap = a.get();
        Node* bp = b.get();
        n->back = [np, ap, bp] {
            const auto& g = np->grad.v;
            if (ap->needs) {
                auto& ga = ap->grad_buf().v;
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (bp->needs) {
                auto& gb = bp->grad_buf().v;
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
            }
        };
    }
    return n;
}

inline Var sub(const Var& a, const Var& b) {
    require_same_shape(a->val, b->val, "sub");
    Tensor out = a->val;
    for (std::int64_t i = 0; i < out.numel(); ++i) out.v[i] -= b->val.v[i];
    Var n = detail::make_node(std::move(out), {a, b});
    if (n->needs) {
        Node* np = n.get();
        Node* ap = a.get();
        Node* bp = b.get();
        n->back = [np, ap, bp] {
            const auto& g = np->grad.v;
            if (ap->needs) {
                auto& ga = ap->grad_buf().v;
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (bp->needs) {
                auto& gb = bp->grad_buf().v;
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
            }
        };
    }
    return n;
}

inline Var mul(const Var& a, const Var& b) {
    require_same_shape(a->val, b->val, "mul");
    Tensor out = a->val;
    for (std::int64_t i = 0; i < out.numel(); ++i) out.v[i] *= b->val.v[i];
    Var n = detail::make_node(std::move(out), {a, b});
    if (n->needs) {
        Node* np = n.get();
        Node* ap = a.get();
        Node* bp = b.get();
        n->back = [np, ap, bp] {
            const auto& g = np->grad.v;
            if (ap->needs) {
                auto& ga = ap->grad_buf().v;
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bp->val.v[i];
            }
            if (bp->needs) {
                auto& gb = bp->grad_buf().v;
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ap->val.v[i];
            }
        };
    }
    return n;
}

inline Var div(const Var& a, const Var& b) {
    require_same_shape(a->val, b->val, "div");
    Tensor out = a->val;
    for (std::int64_t i = 0; i < out.numel(); ++i) out.v[i] /= b->val.v[i];
    Var n = detail::make_node(std::move(out), {a, b});
    if (n->needs) {
        Node* np = n.get();
        Node* ap = a.get();
        Node* bp = b.get();
        n->back = [np, ap, bp] {
            const auto& g = np->grad.v;
            if (ap->needs) {
                auto& ga = ap->grad_buf().v;
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / bp->val.v[i];
            }
            if (bp->needs) {
                auto& gb = bp->grad_buf().v;
                for (std::size_t i = 0; i < g.size(); ++i)
                    gb[i] -= g[i] * np->val.v[i] / bp->val.v[i];
            }
        };
    }
    return n;
}

// k*x + c, scalars
inline Var affine(const Var& a, double k, double c) {
    Tensor out = a->val;
    for (auto& x : out.v) x = k * x + c;
    Var n = detail::make_node(std::move(out), {a});
    if (n->needs) {
        Node* np = n.get();
        Node* ap = a.get();
        n->back = [np, ap, k] {
            auto& ga = ap->grad_buf().v;
            const auto& g = np->grad.v;
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += k * g[i];
        };
    }
    return n;
}

inline Var scale(const Var& a, double k) { return affine(a, k, 0.0); }

inline Var leaky_relu(const Var& a, double slope = 0.2) {
    Tensor out = a->val;
    for (auto& x : out.v)
        if (x < 0.0) x *= slope;
    Var n = detail::make_node(std::move(out), {a});
    if (n->needs) {
        Node* np = n.get();
        Node* ap = a.get();
        n->back = [np, ap, slope] {
            auto& ga = ap->grad_buf().v;
            const auto& g = np->grad.v;
            const auto& x = ap->val.v;
            for (std::size_t i = 0; i < g.size(); ++i)
                ga[i] += g[i] * (x[i] >= 0.0 ? 1.0 : slope);
        };
    }
    return n;
}

inline Var softplus(const Var& a) {
    Tensor out = a->val;
    for (auto& x : out.v) x = x > 30.0 ? x : std::log1p(std::exp(x));
    Var n = detail::make_node(std::move(out), {a});
    if (n->needs) {
        Node* np = n.get();
        Node* ap = a.get();
        n->back = [np, ap] {
            auto& ga = ap->grad_buf().v;
            const auto& g = np->grad.v;
            const auto& x = ap->val.v;
            for (std::size_t i = 0; i < g.size(); ++i)
                ga[i] += g[i] / (1.0 + std::exp(-x[i]));
        };
    }
    return n;
}

inline Var mean_all(const Var& a) {
    const double inv = 1.0 / static_cast<double>(a->val.numel());
    double s = 0.0;
    for (double x : a->val.v) s += x;
    Var n = detail::make_node(Tensor::scalar(s * inv), {a});
    if (n->needs) {
        Node* np = n.get();
        Node* ap = a.get();
        n->back = [np, ap, inv] {
            auto& ga = ap->grad_buf().v;
            const double g = np->grad.v[0] * inv;
            for (auto& x : ga) x += g;
        };
    }
    return n;
}

// mean |a - b|; subgradient 0 at exact zeros
inline Var mean_abs_diff(const Var& a, const Var& b) {
    require_same_shape(a->val, b->val, "mean_abs_diff");
    const double inv = 1.0 / static_cast<double>(a->val.numel());
    double s = 0.0;
    for (std::int64_t i = 0; i < a->val.numel(); ++i) s += std::abs(a->val.v[i] - b->val.v[i]);
    Var n = detail::make_node(Tensor::scalar(s * inv), {a, b});
    if (n->needs) {
        Node* np = n.get();
        Node* ap = a.get();
        Node* bp = b.get();
        n->back = [np, ap, bp, inv] {
            const double g = np->grad.v[0] * inv;
            for (std::size_t i = 0; i < ap->val.v.size(); ++i) {
                const double d = ap->val.v[i] - bp->val.v[i];
                const double sgn = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
                if (ap->needs) ap->grad_buf().v[i] += g * sgn;
                if (bp->needs) bp->grad_buf().v[i] -= g * sgn;
            }
        };
    }
    return n;
}

// sum(x .* w) with constant weights; handy as a scalar probe in tests
inline Var weighted_sum(const Var& a, Tensor weights) {
    require_same_shape(a->val, weights, "weighted_sum");
    double s = 0.0;
    for (std::int64_t i = 0; i < a->val.numel(); ++i) s += a->val.v[i] * weights.v[i];
    Var n = detail::make_node(Tensor::scalar(s), {a});
    if (n->needs) {
        Node* np = n.get();
        Node* ap = a.get();
        auto w = std::make_shared<Tensor>(std::move(weights));
        n->back = [np, ap, w] {
            auto& ga = ap->grad_buf().v;
            const double g = np->grad.v[0];
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * w->v[i];
        };
    }
    return n;
}

// ---------------------------------------------------------------------------
// structural ops
// ---------------------------------------------------------------------------

inline Var slice_channels(const Var& a, std::int64_t c0, std::int64_t c1) {
    if (c0 < 0 || c1 > a->val.c || c0 >= c1)
        throw DimensionError("slice_channels: bad range [" + std::to_string(c0) + "," +
                             std::to_string(c1) + ") for " + a->val.shape_str());
    const Tensor& x = a->val;
    Tensor out(x.n, c1 - c0, x.h, x.w);
    const std::int64_t plane = x.h * x.w;
    for (std::int64_t in = 0; in < x.n; ++in)
        for (std::int64_t ic = c0; ic < c1; ++ic)
            std::copy_n(x.plane(in, ic), plane, out.plane(in, ic - c0));
    Var n = detail::make_node(std::move(out), {a});
    if (n->needs) {
        Node* np = n.get();
        Node* ap = a.get();
        n->back = [np, ap, c0, c1, plane] {
            Tensor& ga = ap->grad_buf();
            for (std::int64_t in = 0; in < ga.n; ++in)
                for (std::int64_t ic = c0; ic < c1; ++ic) {
                    const double* src = np->grad.plane(in, ic - c0);
                    double* dst = ga.plane(in, ic);
                    for (std::int64_t i = 0; i < plane; ++i) dst[i] += src[i];
                }
        };
    }
    return n;
}

inline Var concat_channels(const Var& a, const Var& b) {
    const Tensor& x = a->val;
    const Tensor& y = b->val;
    if (x.n != y.n || x.h != y.h || x.w != y.w)
        throw DimensionError("concat_channels: incompatible shapes " + x.shape_str() + " vs " +
                             y.shape_str());
    Tensor out(x.n, x.c + y.c, x.h, x.w);
    const std::int64_t plane = x.h * x.w;
    for (std::int64_t in = 0; in < x.n; ++in) {
        for (std::int64_t ic = 0; ic < x.c; ++ic)
            std::copy_n(x.plane(in, ic), plane, out.plane(in, ic));
        for (std::int64_t ic = 0; ic < y.c; ++ic)
            std::copy_n(y.plane(in, ic), plane, out.plane(in, x.c + ic));
    }
    Var n = detail::make_node(std::move(out), {a, b});
    if (n->needs) {
        Node* np = n.get();
        Node* ap = a.get();
        Node* bp = b.get();
        n->back = [np, ap, bp, plane] {
            const Tensor& g = np->grad;
            if (ap->needs) {
                Tensor& ga = ap->grad_buf();
                for (std::int64_t in = 0; in < ga.n; ++in)
                    for (std::int64_t ic = 0; ic < ga.c; ++ic) {
                        const double* src = g.plane(in, ic);
                        double* dst = ga.plane(in, ic);
                        for (std::int64_t i = 0; i < plane; ++i) dst[i] += src[i];
                    }
            }
            if (bp->needs) {
                Tensor& gb = bp->grad_buf();
                for (std::int64_t in = 0; in < gb.n; ++in)
                    for (std::int64_t ic = 0; ic < gb.c; ++ic) {
                        const double* src = g.plane(in, ap->val.c + ic);
                        double* dst = gb.plane(in, ic);
                        for (std::int64_t i = 0; i < plane; ++i) dst[i] += src[i];
                    }
            }
        };
    }
    return n;
}

}  // namespace fisp::ad
