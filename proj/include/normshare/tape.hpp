// Reverse-mode differentiation tape. Operations append nodes in topological
// order; one reverse sweep propagates gradients and accumulates them into the
// persistent parameter tensors behind the leaf nodes.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "normshare/common.hpp"
#include "normshare/rng.hpp"
#include "normshare/tensor.hpp"

namespace normshare {

template <class Real>
class Tape;

template <class Real>
struct Var {
    Tape<Real>* tape = nullptr;
    int id = -1;

    const std::vector<int>& shape() const { return tape->node(id).shape; }
    const std::vector<Real>& values() const { return tape->node(id).values; }
    size_t numel() const { return values().size(); }
    int rows() const {
        const auto& s = shape();
        return s.size() == 2 ? s[0] : 1;
    }
    int cols() const {
        const auto& s = shape();
        return s.empty() ? 1 : s.back();
    }
    Real scalar() const {
        if (numel() != 1) throw ContractError(cat("expected scalar, got shape ", shape_str(shape())));
        return values()[0];
    }
};

template <class Real>
class Tape {
public:
    // back(tape, own_id): reads grad of own_id, accumulates into input grads.
    using BackFn = std::function<void(Tape&, int)>;

    struct Node {
        std::vector<int> shape;
        std::vector<Real> values;
        std::vector<Real> grad;  // sized lazily during backward
        std::vector<int> inputs;
        BackFn back;
        Tensor<Real>* param = nullptr;
        bool needs_grad = false;
    };

    explicit Tape(bool recording = true) : recording_(recording) {}

    bool recording() const { return recording_; }

    Node& node(int id) { return nodes_[static_cast<size_t>(id)]; }
    const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }
    int size() const { return static_cast<int>(nodes_.size()); }

    // Leaf backed by a persistent parameter; memoized so k uses of one tensor
    // feed a single node and gradient accumulation happens on that node.
    Var<Real> leaf(Tensor<Real>& t) {
        auto it = leaf_ids_.find(&t);
        if (it != leaf_ids_.end()) return {this, it->second};
        Node n;
        n.shape = t.shape;
        n.values = t.values;
        n.needs_grad = recording_ && t.requires_grad;
        n.param = &t;
        nodes_.push_back(std::move(n));
        const int id = static_cast<int>(nodes_.size()) - 1;
        leaf_ids_.emplace(&t, id);
        return {this, id};
    }

    Var<Real> constant(std::vector<int> shape, std::vector<Real> values) {
        if (numel_of(shape) != values.size())
            throw DimensionError(cat("constant: shape ", shape_str(shape), " does not hold ", values.size(), " values"));
        Node n;
        n.shape = std::move(shape);
        n.values = std::move(values);
        nodes_.push_back(std::move(n));
        return {this, static_cast<int>(nodes_.size()) - 1};
    }

    Var<Real> make(std::vector<int> shape, std::vector<Real> values, std::vector<int> inputs, BackFn back) {
        if (numel_of(shape) != values.size())
            throw DimensionError(cat("op result: shape ", shape_str(shape), " does not hold ", values.size(), " values"));
        Node n;
        n.shape = std::move(shape);
        n.values = std::move(values);
        bool needs = false;
        for (int i : inputs) needs = needs || node(i).needs_grad;
        n.needs_grad = recording_ && needs;
        n.inputs = std::move(inputs);
        if (n.needs_grad) n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return {this, static_cast<int>(nodes_.size()) - 1};
    }

    std::vector<Real>& grad_of(int id) {
        Node& n = node(id);
        if (n.grad.empty()) n.grad.assign(n.values.size(), Real(0));
        return n.grad;
    }

    // Propagates d(loss)/d(node) back through the tape, adding leaf gradients
    // into the parameter tensors. Returns the parameters that received grad.
    std::vector<Tensor<Real>*> backward(Var<Real> loss) {
        if (loss.tape != this) throw ContractError("backward: loss recorded on a different tape");
        Node& ln = node(loss.id);
        if (ln.values.size() != 1) throw ContractError(cat("backward: loss must be scalar, got ", shape_str(ln.shape)));
        if (!ln.needs_grad) return {};
        grad_of(loss.id)[0] = Real(1);
        std::vector<Tensor<Real>*> touched;
        for (int id = loss.id; id >= 0; --id) {
            Node& n = node(id);
            if (!n.needs_grad || n.grad.empty()) continue;
            if (n.param) {
                if (n.param->grad.size() != n.param->values.size()) n.param->zero_grad();
                for (size_t i = 0; i < n.grad.size(); ++i) n.param->grad[i] += n.grad[i];
                touched.push_back(n.param);
            } else if (n.back) {
                n.back(*this, id);
            }
        }
        return touched;
    }

private:
    std::vector<Node> nodes_;
    std::unordered_map<const Tensor<Real>*, int> leaf_ids_;
    bool recording_;
};

namespace detail {

// Row-wise view: 1-d (n) is treated as (1, n).
inline std::pair<int, int> rows_cols(const std::vector<int>& shape, const char* op) {
    if (shape.size() == 1) return {1, shape[0]};
    if (shape.size() == 2) return {shape[0], shape[1]};
    throw DimensionError(cat(op, ": expected 1-d or 2-d tensor, got ", shape_str(shape)));
}

template <class Real>
inline void check_same_shape(const Var<Real>& a, const Var<Real>& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(cat(op, ": shape mismatch ", shape_str(a.shape()), " vs ", shape_str(b.shape())));
}

}  // namespace detail

// ---- elementwise ----

template <class Real>
Var<Real> add(Var<Real> a, Var<Real> b) {
    detail::check_same_shape(a, b, "add");
    std::vector<Real> out(a.values());
    const auto& bv = b.values();
    for (size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    const int ia = a.id, ib = b.id;
    return a.tape->make(a.shape(), std::move(out), {ia, ib}, [ia, ib](Tape<Real>& t, int self) {
        const auto& g = t.node(self).grad;
        if (t.node(ia).needs_grad) {
            auto& ga = t.grad_of(ia);
            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (t.node(ib).needs_grad) {
            auto& gb = t.grad_of(ib);
            for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        }
    });
}

template <class Real>
Var<Real> mul(Var<Real> a, Var<Real> b) {
    detail::check_same_shape(a, b, "elementwise-multiply");
    std::vector<Real> out(a.values());
    const auto& bv = b.values();
    for (size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    const int ia = a.id, ib = b.id;
    return a.tape->make(a.shape(), std::move(out), {ia, ib}, [ia, ib](Tape<Real>& t, int self) {
        const auto& g = t.node(self).grad;
        const auto& av = t.node(ia).values;
        const auto& bv2 = t.node(ib).values;
        if (t.node(ia).needs_grad) {
            auto& ga = t.grad_of(ia);
            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv2[i];
        }
        if (t.node(ib).needs_grad) {
            auto& gb = t.grad_of(ib);
            for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        }
    });
}

template <class Real>
Var<Real> scale(Var<Real> a, double c) {
    std::vector<Real> out(a.values());
    for (Real& v : out) v = static_cast<Real>(v * c);
    const int ia = a.id;
    return a.tape->make(a.shape(), std::move(out), {ia}, [ia, c](Tape<Real>& t, int self) {
        const auto& g = t.node(self).grad;
        auto& ga = t.grad_of(ia);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += static_cast<Real>(g[i] * c);
    });
}

// Adds a single row (1,m) or (m) to every row of a (n,m) matrix.
template <class Real>
Var<Real> add_row(Var<Real> a, Var<Real> row) {
    const auto [n, m] = detail::rows_cols(a.shape(), "add-row");
    const auto [rn, rm] = detail::rows_cols(row.shape(), "add-row");
    if (rn != 1 || rm != m)
        throw DimensionError(cat("add-row: shape mismatch ", shape_str(a.shape()), " vs ", shape_str(row.shape())));
    std::vector<Real> out(a.values());
    const auto& rv = row.values();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) out[static_cast<size_t>(i) * m + j] += rv[static_cast<size_t>(j)];
    const int ia = a.id, ir = row.id;
    return a.tape->make(a.shape(), std::move(out), {ia, ir}, [ia, ir, n, m](Tape<Real>& t, int self) {
        const auto& g = t.node(self).grad;
        if (t.node(ia).needs_grad) {
            auto& ga = t.grad_of(ia);
            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (t.node(ir).needs_grad) {
            auto& gr = t.grad_of(ir);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j) gr[static_cast<size_t>(j)] += g[static_cast<size_t>(i) * m + j];
        }
    });
}

// ---- matmul ----

template <class Real>
Var<Real> matmul(Var<Real> a, Var<Real> b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
        throw DimensionError(cat("matmul: shape mismatch ", shape_str(a.shape()), " vs ", shape_str(b.shape())));
    const int n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
    std::vector<Real> out(static_cast<size_t>(n) * m, Real(0));
    {
        const Real* av = a.values().data();
        const Real* bv = b.values().data();
        Real* ov = out.data();
        for (int i = 0; i < n; ++i)
            for (int p = 0; p < k; ++p) {
                const Real aip = av[static_cast<size_t>(i) * k + p];
                const Real* brow = bv + static_cast<size_t>(p) * m;
                Real* orow = ov + static_cast<size_t>(i) * m;
                for (int j = 0; j < m; ++j) orow[j] += aip * brow[j];
            }
    }
    const int ia = a.id, ib = b.id;
    return a.tape->make({n, m}, std::move(out), {ia, ib}, [ia, ib, n, k, m](Tape<Real>& t, int self) {
        const Real* g = t.node(self).grad.data();
        const Real* av = t.node(ia).values.data();
        const Real* bv = t.node(ib).values.data();
        if (t.node(ia).needs_grad) {
            Real* ga = t.grad_of(ia).data();
            for (int i = 0; i < n; ++i)
                for (int p = 0; p < k; ++p) {
                    Real s = 0;
                    const Real* grow = g + static_cast<size_t>(i) * m;
                    const Real* brow = bv + static_cast<size_t>(p) * m;
                    for (int j = 0; j < m; ++j) s += grow[j] * brow[j];
                    ga[static_cast<size_t>(i) * k + p] += s;
                }
        }
        if (t.node(ib).needs_grad) {
            Real* gb = t.grad_of(ib).data();
            for (int i = 0; i < n; ++i)
                for (int p = 0; p < k; ++p) {
                    const Real aip = av[static_cast<size_t>(i) * k + p];
                    const Real* grow = g + static_cast<size_t>(i) * m;
                    Real* gbrow = gb + static_cast<size_t>(p) * m;
                    for (int j = 0; j < m; ++j) gbrow[j] += aip * grow[j];
                }
        }
    });
}

// ---- nonlinearities ----

template <class Real>
Var<Real> tanh(Var<Real> a) {
    std::vector<Real> out(a.values());
    for (Real& v : out) v = std::tanh(v);
    const int ia = a.id;
    return a.tape->make(a.shape(), std::move(out), {ia}, [ia](Tape<Real>& t, int self) {
        const auto& g = t.node(self).grad;
        const auto& y = t.node(self).values;
        auto& ga = t.grad_of(ia);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (Real(1) - y[i] * y[i]);
    });
}

template <class Real>
Var<Real> sigmoid(Var<Real> a) {
    std::vector<Real> out(a.values());
    for (Real& v : out) v = Real(1) / (Real(1) + std::exp(-v));
    const int ia = a.id;
    return a.tape->make(a.shape(), std::move(out), {ia}, [ia](Tape<Real>& t, int self) {
        const auto& g = t.node(self).grad;
        const auto& y = t.node(self).values;
        auto& ga = t.grad_of(ia);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (Real(1) - y[i]);
    });
}

// ---- shape ops ----

template <class Real>
Var<Real> reshape(Var<Real> a, std::vector<int> new_shape) {
    if (numel_of(new_shape) != a.numel())
        throw DimensionError(cat("reshape: ", shape_str(a.shape()), " -> ", shape_str(new_shape), " changes element count"));
    const int ia = a.id;
    return a.tape->make(std::move(new_shape), std::vector<Real>(a.values()), {ia}, [ia](Tape<Real>& t, int self) {
        const auto& g = t.node(self).grad;
        auto& ga = t.grad_of(ia);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

template <class Real>
Var<Real> concat_cols(const std::vector<Var<Real>>& parts) {
    if (parts.empty()) throw ContractError("concat: no inputs");
    int n = -1, total = 0;
    for (const auto& p : parts) {
        const auto [pn, pm] = detail::rows_cols(p.shape(), "concat");
        if (n < 0) n = pn;
        if (pn != n) throw DimensionError(cat("concat: row mismatch ", shape_str(p.shape())));
        total += pm;
    }
    std::vector<Real> out(static_cast<size_t>(n) * total);
    std::vector<int> ids;
    std::vector<int> widths;
    int off = 0;
    for (const auto& p : parts) {
        const int m = detail::rows_cols(p.shape(), "concat").second;
        const auto& pv = p.values();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) out[static_cast<size_t>(i) * total + off + j] = pv[static_cast<size_t>(i) * m + j];
        ids.push_back(p.id);
        widths.push_back(m);
        off += m;
    }
    Tape<Real>& t = *parts[0].tape;
    return t.make({n, total}, std::move(out), std::vector<int>(ids),
                  [ids, widths, n, total](Tape<Real>& tp, int self) {
                      const auto& g = tp.node(self).grad;
                      int o = 0;
                      for (size_t k = 0; k < ids.size(); ++k) {
                          const int m = widths[k];
                          if (tp.node(ids[k]).needs_grad) {
                              auto& gp = tp.grad_of(ids[k]);
                              for (int i = 0; i < n; ++i)
                                  for (int j = 0; j < m; ++j)
                                      gp[static_cast<size_t>(i) * m + j] += g[static_cast<size_t>(i) * total + o + j];
                          }
                          o += m;
                      }
                  });
}

template <class Real>
Var<Real> concat_rows(const std::vector<Var<Real>>& parts) {
    if (parts.empty()) throw ContractError("concat: no inputs");
    int m = -1, total = 0;
    for (const auto& p : parts) {
        const auto [pn, pm] = detail::rows_cols(p.shape(), "concat");
        if (m < 0) m = pm;
        if (pm != m) throw DimensionError(cat("concat: column mismatch ", shape_str(p.shape())));
        total += pn;
    }
    std::vector<Real> out;
    out.reserve(static_cast<size_t>(total) * m);
    std::vector<int> ids;
    std::vector<int> heights;
    for (const auto& p : parts) {
        out.insert(out.end(), p.values().begin(), p.values().end());
        ids.push_back(p.id);
        heights.push_back(detail::rows_cols(p.shape(), "concat").first);
    }
    Tape<Real>& t = *parts[0].tape;
    return t.make({total, m}, std::move(out), std::vector<int>(ids), [ids, heights, m](Tape<Real>& tp, int self) {
        const auto& g = tp.node(self).grad;
        size_t row = 0;
        for (size_t k = 0; k < ids.size(); ++k) {
            const size_t count = static_cast<size_t>(heights[k]) * m;
            if (tp.node(ids[k]).needs_grad) {
                auto& gp = tp.grad_of(ids[k]);
                for (size_t i = 0; i < count; ++i) gp[i] += g[row * m + i];
            }
            row += static_cast<size_t>(heights[k]);
        }
    });
}

template <class Real>
Var<Real> concat(int axis, const std::vector<Var<Real>>& parts) {
    if (axis == 0) return concat_rows(parts);
    if (axis == 1) return concat_cols(parts);
    throw ParameterError(cat("concat: axis must be 0 or 1, got ", axis));
}

template <class Real>
Var<Real> slice_cols(Var<Real> a, int c0, int c1) {
    const auto [n, m] = detail::rows_cols(a.shape(), "slice");
    if (c0 < 0 || c1 > m || c0 >= c1)
        throw DimensionError(cat("slice: columns [", c0, ",", c1, ") out of range for ", shape_str(a.shape())));
    const int w = c1 - c0;
    std::vector<Real> out(static_cast<size_t>(n) * w);
    const auto& av = a.values();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < w; ++j) out[static_cast<size_t>(i) * w + j] = av[static_cast<size_t>(i) * m + c0 + j];
    const int ia = a.id;
    return a.tape->make({n, w}, std::move(out), {ia}, [ia, n, m, c0, w](Tape<Real>& t, int self) {
        const auto& g = t.node(self).grad;
        auto& ga = t.grad_of(ia);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < w; ++j) ga[static_cast<size_t>(i) * m + c0 + j] += g[static_cast<size_t>(i) * w + j];
    });
}

template <class Real>
Var<Real> slice_rows(Var<Real> a, int r0, int r1) {
    const auto [n, m] = detail::rows_cols(a.shape(), "slice");
    if (r0 < 0 || r1 > n || r0 >= r1)
        throw DimensionError(cat("slice: rows [", r0, ",", r1, ") out of range for ", shape_str(a.shape())));
    const int h = r1 - r0;
    std::vector<Real> out(a.values().begin() + static_cast<size_t>(r0) * m,
                          a.values().begin() + static_cast<size_t>(r1) * m);
    const int ia = a.id;
    return a.tape->make({h, m}, std::move(out), {ia}, [ia, m, r0, h](Tape<Real>& t, int self) {
        const auto& g = t.node(self).grad;
        auto& ga = t.grad_of(ia);
        for (size_t i = 0; i < static_cast<size_t>(h) * m; ++i) ga[static_cast<size_t>(r0) * m + i] += g[i];
    });
}

// ---- row-wise softmax family ----

template <class Real>
Var<Real> softmax(Var<Real> a) {
    const auto [n, m] = detail::rows_cols(a.shape(), "softmax");
    std::vector<Real> out(a.values());
    for (int i = 0; i < n; ++i) {
        Real* row = out.data() + static_cast<size_t>(i) * m;
        Real mx = row[0];
        for (int j = 1; j < m; ++j) mx = std::max(mx, row[j]);
        Real sum = 0;
        for (int j = 0; j < m; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (int j = 0; j < m; ++j) row[j] /= sum;
    }
    const int ia = a.id;
    return a.tape->make(a.shape(), std::move(out), {ia}, [ia, n, m](Tape<Real>& t, int self) {
        const auto& g = t.node(self).grad;
        const auto& y = t.node(self).values;
        auto& ga = t.grad_of(ia);
        for (int i = 0; i < n; ++i) {
            const size_t off = static_cast<size_t>(i) * m;
            Real dot = 0;
            for (int j = 0; j < m; ++j) dot += g[off + j] * y[off + j];
            for (int j = 0; j < m; ++j) ga[off + j] += y[off + j] * (g[off + j] - dot);
        }
    });
}

template <class Real>
Var<Real> log_softmax(Var<Real> a) {
    const auto [n, m] = detail::rows_cols(a.shape(), "log-softmax");
    std::vector<Real> out(a.values());
    for (int i = 0; i < n; ++i) {
        Real* row = out.data() + static_cast<size_t>(i) * m;
        Real mx = row[0];
        for (int j = 1; j < m; ++j) mx = std::max(mx, row[j]);
        Real sum = 0;
        for (int j = 0; j < m; ++j) sum += std::exp(row[j] - mx);
        const Real lse = mx + std::log(sum);
        for (int j = 0; j < m; ++j) row[j] -= lse;
    }
    const int ia = a.id;
    return a.tape->make(a.shape(), std::move(out), {ia}, [ia, n, m](Tape<Real>& t, int self) {
        const auto& g = t.node(self).grad;
        const auto& y = t.node(self).values;
        auto& ga = t.grad_of(ia);
        for (int i = 0; i < n; ++i) {
            const size_t off = static_cast<size_t>(i) * m;
            Real gsum = 0;
            for (int j = 0; j < m; ++j) gsum += g[off + j];
            for (int j = 0; j < m; ++j) ga[off + j] += g[off + j] - std::exp(y[off + j]) * gsum;
        }
    });
}

// ---- lookup / dropout / reductions ----

template <class Real>
Var<Real> embedding_lookup(Var<Real> table, const std::vector<int>& ids) {
    if (table.shape().size() != 2)
        throw DimensionError(cat("embedding-lookup: table must be 2-d, got ", shape_str(table.shape())));
    const int v = table.shape()[0], e = table.shape()[1];
    if (ids.empty()) throw ContractError("embedding-lookup: empty id sequence");
    for (int id : ids)
        if (id < 0 || id >= v) throw IndexError(cat("embedding-lookup: id ", id, " out of range [0,", v, ")"));
    const int len = static_cast<int>(ids.size());
    std::vector<Real> out(static_cast<size_t>(len) * e);
    const auto& tv = table.values();
    for (int t = 0; t < len; ++t)
        std::copy_n(tv.begin() + static_cast<size_t>(ids[t]) * e, e, out.begin() + static_cast<size_t>(t) * e);
    const int it = table.id;
    return table.tape->make({len, e}, std::move(out), {it}, [it, ids, e, len](Tape<Real>& t, int self) {
        const auto& g = t.node(self).grad;
        auto& gt = t.grad_of(it);
        for (int p = 0; p < len; ++p) {
            const size_t src = static_cast<size_t>(p) * e;
            const size_t dst = static_cast<size_t>(ids[p]) * e;
            for (int j = 0; j < e; ++j) gt[dst + j] += g[src + j];
        }
    });
}

// Inverted dropout: survivors scaled by 1/(1-p) at train time, identity at eval.
template <class Real>
Var<Real> dropout(Var<Real> a, double p, Pcg32& rng, bool train) {
    if (p < 0.0 || p >= 1.0) throw ParameterError(cat("dropout: p must be in [0,1), got ", p));
    if (!train || p == 0.0) return a;
    const Real keep_scale = static_cast<Real>(1.0 / (1.0 - p));
    std::vector<Real> mask(a.numel());
    for (Real& m : mask) m = (rng.next_double() >= p) ? keep_scale : Real(0);
    std::vector<Real> out(a.values());
    for (size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    const int ia = a.id;
    return a.tape->make(a.shape(), std::move(out), {ia}, [ia, mask = std::move(mask)](Tape<Real>& t, int self) {
        const auto& g = t.node(self).grad;
        auto& ga = t.grad_of(ia);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
    });
}

template <class Real>
Var<Real> sum(Var<Real> a) {
    Real s = 0;
    for (Real v : a.values()) s += v;
    const int ia = a.id;
    return a.tape->make({1}, {s}, {ia}, [ia](Tape<Real>& t, int self) {
        const Real g = t.node(self).grad[0];
        auto& ga = t.grad_of(ia);
        for (Real& v : ga) v += g;
    });
}

template <class Real>
Var<Real> mean(Var<Real> a) {
    Real s = 0;
    for (Real v : a.values()) s += v;
    const Real inv = Real(1) / static_cast<Real>(a.numel());
    const int ia = a.id;
    return a.tape->make({1}, {s * inv}, {ia}, [ia, inv](Tape<Real>& t, int self) {
        const Real g = t.node(self).grad[0] * inv;
        auto& ga = t.grad_of(ia);
        for (Real& v : ga) v += g;
    });
}

// Mean over positions of -log softmax(logits)[target]; logits is (T,V).
template <class Real>
Var<Real> cross_entropy_loss(Var<Real> logits, const std::vector<int>& targets) {
    const auto [tn, v] = detail::rows_cols(logits.shape(), "cross-entropy");
    if (tn < 1) throw ContractError("cross-entropy: need at least one position");
    if (static_cast<size_t>(tn) != targets.size())
        throw DimensionError(cat("cross-entropy: ", tn, " logit rows vs ", targets.size(), " targets"));
    for (int tgt : targets)
        if (tgt < 0 || tgt >= v) throw IndexError(cat("cross-entropy: target ", tgt, " out of range [0,", v, ")"));
    const auto& lv = logits.values();
    Real total = 0;
    for (int i = 0; i < tn; ++i) {
        const Real* row = lv.data() + static_cast<size_t>(i) * v;
        Real mx = row[0];
        for (int j = 1; j < v; ++j) mx = std::max(mx, row[j]);
        Real sum = 0;
        for (int j = 0; j < v; ++j) sum += std::exp(row[j] - mx);
        total += (mx + std::log(sum)) - row[targets[static_cast<size_t>(i)]];
    }
    const Real loss = total / static_cast<Real>(tn);
    const int il = logits.id;
    return logits.tape->make({1}, {loss}, {il}, [il, targets, tn, v](Tape<Real>& t, int self) {
        const Real g = t.node(self).grad[0] / static_cast<Real>(tn);
        const auto& lv2 = t.node(il).values;
        auto& gl = t.grad_of(il);
        for (int i = 0; i < tn; ++i) {
            const Real* row = lv2.data() + static_cast<size_t>(i) * v;
            Real* grow = gl.data() + static_cast<size_t>(i) * v;
            Real mx = row[0];
            for (int j = 1; j < v; ++j) mx = std::max(mx, row[j]);
            Real sum = 0;
            for (int j = 0; j < v; ++j) sum += std::exp(row[j] - mx);
            for (int j = 0; j < v; ++j) {
                const Real p = std::exp(row[j] - mx) / sum;
                grow[j] += g * (p - (j == targets[static_cast<size_t>(i)] ? Real(1) : Real(0)));
            }
        }
    });
}

// ---- generic op catalogue surface ----

enum class OpKind {
    matmul,
    add,
    elementwise_multiply,
    tanh,
    sigmoid,
    concat,
    slice,
    softmax,
    log_softmax,
    embedding_lookup,
    dropout,
    sum,
    mean,
};

struct OpArgs {
    int axis = 1;                 // concat
    int start = 0, stop = 0;      // slice (columns)
    double p = 0.0;               // dropout
    Pcg32* rng = nullptr;         // dropout
    bool train = true;            // dropout
    std::vector<int> ids;         // embedding-lookup
};

template <class Real>
Var<Real> forward_op(OpKind kind, const std::vector<Var<Real>>& inputs, const OpArgs& args = {}) {
    auto one = [&](const char* op) -> Var<Real> {
        if (inputs.size() != 1) throw ContractError(cat(op, ": expected 1 input, got ", inputs.size()));
        return inputs[0];
    };
    auto two = [&](const char* op) -> std::pair<Var<Real>, Var<Real>> {
        if (inputs.size() != 2) throw ContractError(cat(op, ": expected 2 inputs, got ", inputs.size()));
        return {inputs[0], inputs[1]};
    };
    switch (kind) {
        case OpKind::matmul: {
            auto [a, b] = two("matmul");
            return matmul(a, b);
        }
        case OpKind::add: {
            auto [a, b] = two("add");
            return add(a, b);
        }
        case OpKind::elementwise_multiply: {
            auto [a, b] = two("elementwise-multiply");
            return mul(a, b);
        }
        case OpKind::tanh:
            return tanh(one("tanh"));
        case OpKind::sigmoid:
            return sigmoid(one("sigmoid"));
        case OpKind::concat:
            return concat(args.axis, inputs);
        case OpKind::slice:
            return slice_cols(one("slice"), args.start, args.stop);
        case OpKind::softmax:
            return softmax(one("softmax"));
        case OpKind::log_softmax:
            return log_softmax(one("log-softmax"));
        case OpKind::embedding_lookup:
            return embedding_lookup(one("embedding-lookup"), args.ids);
        case OpKind::dropout: {
            if (!args.rng) throw ContractError("dropout: missing rng");
            return dropout(one("dropout"), args.p, *args.rng, args.train);
        }
        case OpKind::sum:
            return sum(one("sum"));
        case OpKind::mean:
            return mean(one("mean"));
    }
    throw ContractError("forward_op: unknown op kind");
}

}  // namespace normshare
