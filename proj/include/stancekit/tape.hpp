#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "stancekit/error.hpp"
#include "stancekit/param_store.hpp"
#include "stancekit/tensor.hpp"

namespace stancekit {

/// Compressed sparse row matrix with constant (non-differentiated) values.
/// Used for relation-normalized adjacency operators and mean-pool weights.
class SparseMatrix {
public:
    SparseMatrix() = default;
    SparseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

    struct Triplet {
        std::size_t row, col;
        Real value;
    };

    static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> items) {
        for (const auto& t : items)
            if (t.row >= rows || t.col >= cols) fail("numerics", "sparse triplet out of range");
        std::sort(items.begin(), items.end(), [](const Triplet& a, const Triplet& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });
        SparseMatrix m(rows, cols);
        for (std::size_t i = 0; i < items.size();) {
            std::size_t j = i + 1;
            Real v = items[i].value;
            while (j < items.size() && items[j].row == items[i].row && items[j].col == items[i].col) {
                v += items[j].value;
                ++j;
            }
            m.col_idx_.push_back(items[i].col);
            m.values_.push_back(v);
            ++m.row_ptr_[items[i].row + 1];
            i = j;
        }
        for (std::size_t r = 0; r < rows; ++r) m.row_ptr_[r + 1] += m.row_ptr_[r];
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t nonzeros() const { return values_.size(); }

    /// dst = this * X  (dense X with cols_ rows).
    Tensor multiply(const Tensor& x) const {
        if (x.rank() != 2 || x.dim(0) != cols_) fail("numerics", "spmm shape mismatch");
        Tensor out({rows_, x.dim(1)});
        const std::size_t n = x.dim(1);
        for (std::size_t r = 0; r < rows_; ++r) {
            auto dst = out.row(r);
            for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
                const Real v = values_[k];
                auto src = x.row(col_idx_[k]);
                for (std::size_t j = 0; j < n; ++j) dst[j] += v * src[j];
            }
        }
        return out;
    }

    /// dst += this^T * Y  (accumulating; Y has rows_ rows).
    void accumulate_transpose_multiply(Tensor& dst, const Tensor& y) const {
        if (y.rank() != 2 || y.dim(0) != rows_ || dst.dim(0) != cols_ || dst.dim(1) != y.dim(1))
            fail("numerics", "spmm transpose shape mismatch");
        const std::size_t n = y.dim(1);
        for (std::size_t r = 0; r < rows_; ++r) {
            auto src = y.row(r);
            for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
                const Real v = values_[k];
                auto d = dst.row(col_idx_[k]);
                for (std::size_t j = 0; j < n; ++j) d[j] += v * src[j];
            }
        }
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::size_t> col_idx_;
    std::vector<Real> values_;
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid for the tape's lifetime.
struct Var {
    Tape* tape = nullptr;
    std::size_t index = 0;

    const Tensor& value() const;
};

/// Reverse-mode automatic differentiation over named parameters.
///
/// A tape is single-use: build the forward expression, call backward() once on
/// a scalar node, and gradients for every *trainable* parameter that took part
/// are accumulated into the owning ParamStore. Frozen parameters never get a
/// gradient buffer at all.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // -- leaves --------------------------------------------------------------

    Var constant(Tensor value) { return push(std::move(value), false, {}); }

    Var param(ParamStore& store, const std::string& name) {
        const auto key = std::make_pair(&store, name);
        auto it = param_memo_.find(key);
        if (it != param_memo_.end()) return Var{this, it->second};
        const bool trainable = store.trainable(name);
        Var v = push(store.tensor(name), trainable, {});
        param_memo_.emplace(key, v.index);
        if (trainable) param_leaves_.emplace_back(&store, name, v.index);
        return v;
    }

    // -- elementwise ----------------------------------------------------------

    Var add(Var a, Var b) {
        const Tensor& av = val(a);
        const Tensor& bv = val(b);
        if (!av.same_shape(bv)) fail("numerics", "add shape mismatch");
        Tensor out = av;
        auto o = out.data();
        auto bd = bv.data();
        for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
        Var r = push(std::move(out), needs(a) || needs(b), [this, a, b](const Node& n) {
            if (needs(a)) axpy(grad(a), Real(1), n.grad);
            if (needs(b)) axpy(grad(b), Real(1), n.grad);
        });
        return r;
    }

    Var sub(Var a, Var b) {
        const Tensor& av = val(a);
        const Tensor& bv = val(b);
        if (!av.same_shape(bv)) fail("numerics", "sub shape mismatch");
        Tensor out = av;
        auto o = out.data();
        auto bd = bv.data();
        for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bd[i];
        return push(std::move(out), needs(a) || needs(b), [this, a, b](const Node& n) {
            if (needs(a)) axpy(grad(a), Real(1), n.grad);
            if (needs(b)) axpy(grad(b), Real(-1), n.grad);
        });
    }

    Var mul(Var a, Var b) {
        const Tensor& av = val(a);
        const Tensor& bv = val(b);
        if (!av.same_shape(bv)) fail("numerics", "mul shape mismatch");
        Tensor out = av;
        auto o = out.data();
        auto bd = bv.data();
        for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bd[i];
        return push(std::move(out), needs(a) || needs(b), [this, a, b](const Node& n) {
            auto g = n.grad.data();
            if (needs(a)) {
                auto da = grad(a).data();
                auto bd2 = val(b).data();
                for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * bd2[i];
            }
            if (needs(b)) {
                auto db = grad(b).data();
                auto ad2 = val(a).data();
                for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * ad2[i];
            }
        });
    }

    Var scale(Var a, Real c) {
        Tensor out = val(a);
        for (Real& v : out.data()) v *= c;
        return push(std::move(out), needs(a), [this, a, c](const Node& n) {
            if (needs(a)) axpy(grad(a), c, n.grad);
        });
    }

    Var relu(Var a) {
        Tensor out = val(a);
        for (Real& v : out.data()) v = v > Real(0) ? v : Real(0);
        return push(std::move(out), needs(a), [this, a](const Node& n) {
            if (!needs(a)) return;
            auto da = grad(a).data();
            auto x = val(a).data();
            auto g = n.grad.data();
            for (std::size_t i = 0; i < g.size(); ++i)
                if (x[i] > Real(0)) da[i] += g[i];
        });
    }

    Var sigmoid(Var a) {
        Tensor out = val(a);
        for (Real& v : out.data()) v = Real(1) / (Real(1) + std::exp(-v));
        Var r = push(std::move(out), needs(a), [this, a](const Node& n) {
            if (!needs(a)) return;
            auto da = grad(a).data();
            auto s = n.value.data();
            auto g = n.grad.data();
            for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * s[i] * (Real(1) - s[i]);
        });
        return r;
    }

    /// y[i,j] = x[i,j] + bias[j]; bias may be shape [n] or [1,n].
    Var add_bias(Var x, Var bias) {
        const Tensor& xv = val(x);
        const Tensor& bv = val(bias);
        if (xv.rank() != 2) fail("numerics", "add_bias expects a matrix");
        const std::size_t n = xv.dim(1);
        if (bv.size() != n) fail("numerics", "add_bias width mismatch");
        Tensor out = xv;
        auto bd = bv.data();
        for (std::size_t i = 0; i < out.dim(0); ++i) {
            auto row = out.row(i);
            for (std::size_t j = 0; j < n; ++j) row[j] += bd[j];
        }
        return push(std::move(out), needs(x) || needs(bias), [this, x, bias](const Node& n) {
            const std::size_t m = n.value.dim(0), w = n.value.dim(1);
            if (needs(x)) axpy(grad(x), Real(1), n.grad);
            if (needs(bias)) {
                auto db = grad(bias).data();
                for (std::size_t i = 0; i < m; ++i) {
                    auto g = n.grad.row(i);
                    for (std::size_t j = 0; j < w; ++j) db[j] += g[j];
                }
            }
        });
    }

    // -- matrix products -------------------------------------------------------

    /// C = A * B with A [m,k], B [k,n].
    Var matmul(Var a, Var b) {
        const Tensor& av = val(a);
        const Tensor& bv = val(b);
        if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
            fail("numerics", "matmul shape mismatch");
        Tensor out({av.dim(0), bv.dim(1)});
        acc_ab(out, av, bv);
        return push(std::move(out), needs(a) || needs(b), [this, a, b](const Node& n) {
            if (needs(a)) acc_abt(grad(a), n.grad, val(b));
            if (needs(b)) acc_atb(grad(b), val(a), n.grad);
        });
    }

    /// C = A * B^T with A [m,k], B [n,k].
    Var matmul_nt(Var a, Var b) {
        const Tensor& av = val(a);
        const Tensor& bv = val(b);
        if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(1))
            fail("numerics", "matmul_nt shape mismatch");
        Tensor out({av.dim(0), bv.dim(0)});
        acc_abt(out, av, bv);
        return push(std::move(out), needs(a) || needs(b), [this, a, b](const Node& n) {
            if (needs(a)) acc_ab(grad(a), n.grad, val(b));
            if (needs(b)) acc_atb(grad(b), n.grad, val(a));
        });
    }

    /// Y = S * X where S is a constant sparse operator. Only X is differentiated.
    Var spmm(const SparseMatrix& s, Var x) {
        // The operator is copied so the caller's matrix may go out of scope.
        auto op = std::make_shared<SparseMatrix>(s);
        Tensor out = op->multiply(val(x));
        return push(std::move(out), needs(x), [this, x, op](const Node& n) {
            if (needs(x)) op->accumulate_transpose_multiply(grad(x), n.grad);
        });
    }

    // -- structural ops ---------------------------------------------------------

    /// out[i,:] = table[indices[i],:]
    Var gather_rows(Var table, std::vector<std::size_t> indices) {
        const Tensor& tv = val(table);
        if (tv.rank() != 2) fail("numerics", "gather_rows expects a matrix");
        for (std::size_t i : indices)
            if (i >= tv.dim(0)) fail("numerics", "gather_rows index out of range");
        Tensor out({indices.size(), tv.dim(1)});
        for (std::size_t i = 0; i < indices.size(); ++i) {
            auto src = tv.row(indices[i]);
            std::copy(src.begin(), src.end(), out.row(i).begin());
        }
        auto idx = std::make_shared<std::vector<std::size_t>>(std::move(indices));
        return push(std::move(out), needs(table), [this, table, idx](const Node& n) {
            if (!needs(table)) return;
            Tensor& dt = grad(table);
            for (std::size_t i = 0; i < idx->size(); ++i) {
                auto g = n.grad.row(i);
                auto d = dt.row((*idx)[i]);
                for (std::size_t j = 0; j < g.size(); ++j) d[j] += g[j];
            }
        });
    }

    Var concat_rows(Var a, Var b) {
        const Tensor& av = val(a);
        const Tensor& bv = val(b);
        if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(1))
            fail("numerics", "concat_rows width mismatch");
        Tensor out({av.dim(0) + bv.dim(0), av.dim(1)});
        std::copy(av.data().begin(), av.data().end(), out.data().begin());
        std::copy(bv.data().begin(), bv.data().end(), out.data().begin() + av.size());
        return push(std::move(out), needs(a) || needs(b), [this, a, b](const Node& n) {
            const std::size_t ma = val(a).dim(0);
            if (needs(a)) {
                auto da = grad(a).data();
                auto g = n.grad.data();
                for (std::size_t i = 0; i < da.size(); ++i) da[i] += g[i];
            }
            if (needs(b)) {
                auto db = grad(b).data();
                auto g = n.grad.data();
                const std::size_t off = ma * n.value.dim(1);
                for (std::size_t i = 0; i < db.size(); ++i) db[i] += g[off + i];
            }
        });
    }

    Var slice_rows(Var x, std::size_t first, std::size_t count) {
        const Tensor& xv = val(x);
        if (xv.rank() != 2 || first + count > xv.dim(0)) fail("numerics", "slice_rows out of range");
        Tensor out({count, xv.dim(1)});
        std::copy(xv.data().begin() + first * xv.dim(1),
                  xv.data().begin() + (first + count) * xv.dim(1), out.data().begin());
        return push(std::move(out), needs(x), [this, x, first](const Node& n) {
            if (!needs(x)) return;
            auto dx = grad(x).data();
            auto g = n.grad.data();
            const std::size_t off = first * n.value.dim(1);
            for (std::size_t i = 0; i < g.size(); ++i) dx[off + i] += g[i];
        });
    }

    Var concat_cols(Var a, Var b) {
        const Tensor& av = val(a);
        const Tensor& bv = val(b);
        if (av.rank() != 2 || bv.rank() != 2 || av.dim(0) != bv.dim(0))
            fail("numerics", "concat_cols height mismatch");
        const std::size_t m = av.dim(0), na = av.dim(1), nb = bv.dim(1);
        Tensor out({m, na + nb});
        for (std::size_t i = 0; i < m; ++i) {
            auto dst = out.row(i);
            auto ra = av.row(i);
            auto rb = bv.row(i);
            std::copy(ra.begin(), ra.end(), dst.begin());
            std::copy(rb.begin(), rb.end(), dst.begin() + na);
        }
        return push(std::move(out), needs(a) || needs(b), [this, a, b, na, nb](const Node& n) {
            for (std::size_t i = 0; i < n.value.dim(0); ++i) {
                auto g = n.grad.row(i);
                if (needs(a)) {
                    auto da = grad(a).row(i);
                    for (std::size_t j = 0; j < na; ++j) da[j] += g[j];
                }
                if (needs(b)) {
                    auto db = grad(b).row(i);
                    for (std::size_t j = 0; j < nb; ++j) db[j] += g[na + j];
                }
            }
        });
    }

    Var slice_cols(Var x, std::size_t first, std::size_t count) {
        const Tensor& xv = val(x);
        if (xv.rank() != 2 || first + count > xv.dim(1)) fail("numerics", "slice_cols out of range");
        Tensor out({xv.dim(0), count});
        for (std::size_t i = 0; i < xv.dim(0); ++i) {
            auto src = xv.row(i);
            std::copy(src.begin() + first, src.begin() + first + count, out.row(i).begin());
        }
        return push(std::move(out), needs(x), [this, x, first](const Node& n) {
            if (!needs(x)) return;
            for (std::size_t i = 0; i < n.value.dim(0); ++i) {
                auto g = n.grad.row(i);
                auto dx = grad(x).row(i);
                for (std::size_t j = 0; j < g.size(); ++j) dx[first + j] += g[j];
            }
        });
    }

    // -- reductions ---------------------------------------------------------------

    /// Column means over all rows: [m,n] -> [1,n].
    Var mean_rows(Var x) {
        const Tensor& xv = val(x);
        if (xv.rank() != 2 || xv.dim(0) == 0) fail("numerics", "mean_rows expects a non-empty matrix");
        const std::size_t m = xv.dim(0), n = xv.dim(1);
        Tensor out({1, n});
        auto o = out.row(0);
        for (std::size_t i = 0; i < m; ++i) {
            auto src = xv.row(i);
            for (std::size_t j = 0; j < n; ++j) o[j] += src[j];
        }
        const Real inv = Real(1) / static_cast<Real>(m);
        for (std::size_t j = 0; j < n; ++j) o[j] *= inv;
        return push(std::move(out), needs(x), [this, x, m, inv](const Node& n2) {
            if (!needs(x)) return;
            auto g = n2.grad.row(0);
            Tensor& dx = grad(x);
            for (std::size_t i = 0; i < m; ++i) {
                auto d = dx.row(i);
                for (std::size_t j = 0; j < g.size(); ++j) d[j] += g[j] * inv;
            }
        });
    }

    /// Row sums: [m,n] -> [m].
    Var row_sum(Var x) {
        const Tensor& xv = val(x);
        if (xv.rank() != 2) fail("numerics", "row_sum expects a matrix");
        Tensor out({xv.dim(0)});
        for (std::size_t i = 0; i < xv.dim(0); ++i) {
            Real s = 0;
            for (Real v : xv.row(i)) s += v;
            out[i] = s;
        }
        return push(std::move(out), needs(x), [this, x](const Node& n) {
            if (!needs(x)) return;
            Tensor& dx = grad(x);
            for (std::size_t i = 0; i < dx.dim(0); ++i) {
                const Real g = n.grad[i];
                for (Real& d : dx.row(i)) d += g;
            }
        });
    }

    /// Sum of every element -> scalar [1].
    Var sum(Var x) {
        Real s = 0;
        for (Real v : val(x).data()) s += v;
        return push(Tensor::scalar(s), needs(x), [this, x](const Node& n) {
            if (needs(x)) {
                const Real g = n.grad[0];
                for (Real& d : grad(x).data()) d += g;
            }
        });
    }

    /// Mean over rows of the squared L2 norm of each row -> scalar [1].
    Var mean_rows_sumsq(Var x) {
        const Tensor& xv = val(x);
        if (xv.rank() != 2 || xv.dim(0) == 0) fail("numerics", "mean_rows_sumsq expects a non-empty matrix");
        const std::size_t m = xv.dim(0);
        Real s = 0;
        for (Real v : xv.data()) s += v * v;
        s /= static_cast<Real>(m);
        return push(Tensor::scalar(s), needs(x), [this, x, m](const Node& n) {
            if (!needs(x)) return;
            const Real c = Real(2) * n.grad[0] / static_cast<Real>(m);
            auto xd = val(x).data();
            auto dx = grad(x).data();
            for (std::size_t i = 0; i < xd.size(); ++i) dx[i] += c * xd[i];
        });
    }

    // -- normalization ---------------------------------------------------------------

    /// Row-wise softmax. If `valid_cols` is given, columns marked 0 get
    /// probability exactly zero and take no gradient (standard key-padding
    /// mask). Each row must keep at least one valid column.
    Var softmax_rows(Var x, const std::vector<std::uint8_t>* valid_cols = nullptr) {
        const Tensor& xv = val(x);
        if (xv.rank() != 2) fail("numerics", "softmax_rows expects a matrix");
        const std::size_t m = xv.dim(0), n = xv.dim(1);
        std::shared_ptr<std::vector<std::uint8_t>> mask;
        if (valid_cols) {
            if (valid_cols->size() != n) fail("numerics", "softmax mask width mismatch");
            if (std::find(valid_cols->begin(), valid_cols->end(), std::uint8_t(1)) == valid_cols->end())
                fail("numerics", "softmax mask excludes every column");
            mask = std::make_shared<std::vector<std::uint8_t>>(*valid_cols);
        }
        Tensor out({m, n});
        for (std::size_t i = 0; i < m; ++i) {
            auto src = xv.row(i);
            auto dst = out.row(i);
            Real mx = -std::numeric_limits<Real>::infinity();
            for (std::size_t j = 0; j < n; ++j)
                if (!mask || (*mask)[j]) mx = std::max(mx, src[j]);
            Real z = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (mask && !(*mask)[j]) {
                    dst[j] = 0;
                } else {
                    dst[j] = std::exp(src[j] - mx);
                    z += dst[j];
                }
            }
            for (std::size_t j = 0; j < n; ++j) dst[j] /= z;
        }
        return push(std::move(out), needs(x), [this, x](const Node& nd) {
            if (!needs(x)) return;
            const std::size_t m2 = nd.value.dim(0), n2 = nd.value.dim(1);
            Tensor& dx = grad(x);
            for (std::size_t i = 0; i < m2; ++i) {
                auto p = nd.value.row(i);
                auto g = nd.grad.row(i);
                Real dot = 0;
                for (std::size_t j = 0; j < n2; ++j) dot += g[j] * p[j];
                auto d = dx.row(i);
                for (std::size_t j = 0; j < n2; ++j) d[j] += p[j] * (g[j] - dot);
            }
        });
    }

    /// Row-wise layer normalization with learned gain and bias (each [n] or [1,n]).
    Var layer_norm(Var x, Var gain, Var bias, Real eps = Real(1e-5)) {
        const Tensor& xv = val(x);
        const Tensor& gv = val(gain);
        const Tensor& bv = val(bias);
        if (xv.rank() != 2) fail("numerics", "layer_norm expects a matrix");
        const std::size_t m = xv.dim(0), n = xv.dim(1);
        if (gv.size() != n || bv.size() != n) fail("numerics", "layer_norm gain/bias width mismatch");
        Tensor out({m, n});
        auto norm = std::make_shared<Tensor>(Tensor({m, n})); // x-hat, kept for backward
        auto inv_sigma = std::make_shared<std::vector<Real>>(m);
        auto gd = gv.data();
        auto bd = bv.data();
        for (std::size_t i = 0; i < m; ++i) {
            auto src = xv.row(i);
            Real mu = 0;
            for (Real v : src) mu += v;
            mu /= static_cast<Real>(n);
            Real var = 0;
            for (Real v : src) var += (v - mu) * (v - mu);
            var /= static_cast<Real>(n);
            const Real is = Real(1) / std::sqrt(var + eps);
            (*inv_sigma)[i] = is;
            auto nh = norm->row(i);
            auto dst = out.row(i);
            for (std::size_t j = 0; j < n; ++j) {
                nh[j] = (src[j] - mu) * is;
                dst[j] = nh[j] * gd[j] + bd[j];
            }
        }
        return push(std::move(out), needs(x) || needs(gain) || needs(bias),
                    [this, x, gain, bias, norm, inv_sigma](const Node& nd) {
            const std::size_t m2 = nd.value.dim(0), n2 = nd.value.dim(1);
            auto gv2 = val(gain).data();
            for (std::size_t i = 0; i < m2; ++i) {
                auto g = nd.grad.row(i);
                auto nh = norm->row(i);
                if (needs(gain)) {
                    auto dg = grad(gain).data();
                    for (std::size_t j = 0; j < n2; ++j) dg[j] += g[j] * nh[j];
                }
                if (needs(bias)) {
                    auto db = grad(bias).data();
                    for (std::size_t j = 0; j < n2; ++j) db[j] += g[j];
                }
                if (needs(x)) {
                    // d x-hat = g * gain; then the two centering corrections.
                    Real sum_d = 0, sum_dn = 0;
                    for (std::size_t j = 0; j < n2; ++j) {
                        const Real dh = g[j] * gv2[j];
                        sum_d += dh;
                        sum_dn += dh * nh[j];
                    }
                    const Real invn = Real(1) / static_cast<Real>(n2);
                    auto dx = grad(x).row(i);
                    const Real is = (*inv_sigma)[i];
                    for (std::size_t j = 0; j < n2; ++j) {
                        const Real dh = g[j] * gv2[j];
                        dx[j] += is * (dh - invn * sum_d - nh[j] * invn * sum_dn);
                    }
                }
            }
        });
    }

    // -- losses --------------------------------------------------------------------

    /// Mean binary cross-entropy of probabilities `p` (shape [m]) against
    /// 0/1 targets. Probabilities are clamped to [1e-12, 1-1e-12]; where the
    /// clamp binds the gradient is zero, matching the flat loss surface.
    Var bce_mean(Var p, std::vector<Real> targets) {
        const Tensor& pv = val(p);
        if (pv.rank() != 1 || pv.size() != targets.size() || targets.empty())
            fail("numerics", "bce_mean shape mismatch");
        const Real lo = Real(1e-12), hi = Real(1) - Real(1e-12);
        const std::size_t m = targets.size();
        Real loss = 0;
        for (std::size_t i = 0; i < m; ++i) {
            const Real c = std::clamp(pv[i], lo, hi);
            loss += targets[i] * std::log(c) + (Real(1) - targets[i]) * std::log(Real(1) - c);
        }
        loss = -loss / static_cast<Real>(m);
        auto t = std::make_shared<std::vector<Real>>(std::move(targets));
        return push(Tensor::scalar(loss), needs(p), [this, p, t, lo, hi](const Node& nd) {
            if (!needs(p)) return;
            const std::size_t m2 = t->size();
            const Real g = nd.grad[0] / static_cast<Real>(m2);
            auto pd = val(p).data();
            auto dp = grad(p).data();
            for (std::size_t i = 0; i < m2; ++i) {
                if (pd[i] <= lo || pd[i] >= hi) continue;
                dp[i] += g * ((Real(1) - (*t)[i]) / (Real(1) - pd[i]) - (*t)[i] / pd[i]);
            }
        });
    }

    /// Mean negative log-likelihood of gold rows in a probability matrix,
    /// clamping each picked probability to at least 1e-12.
    Var nll_mean(Var probs, std::vector<std::size_t> gold) {
        const Tensor& pv = val(probs);
        if (pv.rank() != 2 || pv.dim(0) != gold.size() || gold.empty())
            fail("numerics", "nll_mean shape mismatch");
        for (std::size_t i = 0; i < gold.size(); ++i)
            if (gold[i] >= pv.dim(1)) fail("numerics", "nll_mean gold label out of range");
        const Real lo = Real(1e-12);
        Real loss = 0;
        for (std::size_t i = 0; i < gold.size(); ++i)
            loss -= std::log(std::max(pv(i, gold[i]), lo));
        loss /= static_cast<Real>(gold.size());
        auto idx = std::make_shared<std::vector<std::size_t>>(std::move(gold));
        return push(Tensor::scalar(loss), needs(probs), [this, probs, idx, lo](const Node& nd) {
            if (!needs(probs)) return;
            const Real g = nd.grad[0] / static_cast<Real>(idx->size());
            const Tensor& pv2 = val(probs);
            Tensor& dp = grad(probs);
            for (std::size_t i = 0; i < idx->size(); ++i) {
                const Real p = pv2(i, (*idx)[i]);
                if (p <= lo) continue;
                dp(i, (*idx)[i]) -= g / p;
            }
        });
    }

    // -- engine ---------------------------------------------------------------------

    const Tensor& value(Var v) const { return nodes_[v.index]->value; }

    /// Runs reverse-mode accumulation from a scalar node and flushes parameter
    /// gradients into their stores. May be called once per tape.
    void backward(Var loss) {
        if (backward_done_) fail("numerics", "backward already ran on this tape");
        backward_done_ = true;
        Node& ln = *nodes_[loss.index];
        if (ln.value.size() != 1) fail("numerics", "backward requires a scalar loss");
        if (!ln.needs_grad) fail("numerics", "loss does not depend on any trainable parameter");
        ln.grad.fill(Real(1));
        for (std::size_t i = nodes_.size(); i-- > 0;) {
            Node& n = *nodes_[i];
            if (n.needs_grad && n.backward) n.backward(n);
        }
        for (const auto& [store, name, idx] : param_leaves_)
            store->accumulate_grad(name, nodes_[idx]->grad);
    }

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool needs_grad = false;
        std::function<void(const Node&)> backward;
    };

    Var push(Tensor value, bool needs_grad, std::function<void(const Node&)> bw) {
        auto node = std::make_unique<Node>();
        node->value = std::move(value);
        node->needs_grad = needs_grad;
        if (needs_grad) {
            node->grad = Tensor(node->value.shape());
            node->backward = std::move(bw);
        }
        debug_check_finite(node->value, "tape op output");
        nodes_.push_back(std::move(node));
        return Var{this, nodes_.size() - 1};
    }

    const Tensor& val(Var v) const { return nodes_[v.index]->value; }
    Tensor& grad(Var v) { return nodes_[v.index]->grad; }
    bool needs(Var v) const { return nodes_[v.index]->needs_grad; }

    static void axpy(Tensor& dst, Real c, const Tensor& src) {
        auto d = dst.data();
        auto s = src.data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += c * s[i];
    }

    // dst += A * B
    static void acc_ab(Tensor& dst, const Tensor& a, const Tensor& b) {
        const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
        for (std::size_t i = 0; i < m; ++i) {
            auto ar = a.row(i);
            auto dr = dst.row(i);
            for (std::size_t kk = 0; kk < k; ++kk) {
                const Real av = ar[kk];
                if (av == Real(0)) continue;
                auto br = b.row(kk);
                for (std::size_t j = 0; j < n; ++j) dr[j] += av * br[j];
            }
        }
    }

    // dst += A * B^T
    static void acc_abt(Tensor& dst, const Tensor& a, const Tensor& b) {
        const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
        for (std::size_t i = 0; i < m; ++i) {
            auto ar = a.row(i);
            auto dr = dst.row(i);
            for (std::size_t j = 0; j < n; ++j) {
                auto br = b.row(j);
                Real s = 0;
                for (std::size_t kk = 0; kk < k; ++kk) s += ar[kk] * br[kk];
                dr[j] += s;
            }
        }
    }

    // dst += A^T * B
    static void acc_atb(Tensor& dst, const Tensor& a, const Tensor& b) {
        const std::size_t k = a.dim(0), m = a.dim(1), n = b.dim(1);
        for (std::size_t kk = 0; kk < k; ++kk) {
            auto ar = a.row(kk);
            auto br = b.row(kk);
            for (std::size_t i = 0; i < m; ++i) {
                const Real av = ar[i];
                if (av == Real(0)) continue;
                auto dr = dst.row(i);
                for (std::size_t j = 0; j < n; ++j) dr[j] += av * br[j];
            }
        }
    }

    std::vector<std::unique_ptr<Node>> nodes_;
    std::map<std::pair<ParamStore*, std::string>, std::size_t> param_memo_;
    std::vector<std::tuple<ParamStore*, std::string, std::size_t>> param_leaves_;
    bool backward_done_ = false;
};

inline const Tensor& Var::value() const { return tape->value(*this); }

} // namespace stancekit
