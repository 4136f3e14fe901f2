#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "biome/matrix.hpp"

namespace biome::ad {

// Reverse-mode tape over dense double matrices. Nodes live in creation order,
// which is a valid topological order, so backward is a single reverse sweep.
// Var is a non-owning pointer into the Graph; a Graph must outlive its Vars.

struct Node {
    Mat val;
    Mat grad;  // allocated lazily, same shape as val
    bool requires_grad = false;
    std::function<void()> back;  // accumulates into parents' grads

    Mat& g() {
        if (grad.rows != val.rows || grad.cols != val.cols) grad = Mat::zeros(val.rows, val.cols);
        return grad;
    }
};

using Var = Node*;

class Graph {
public:
    Var leaf(Mat value, bool requires_grad = false) {
        nodes_.push_back(std::make_unique<Node>());
        Node* n = nodes_.back().get();
        n->val = std::move(value);
        n->requires_grad = requires_grad;
        return n;
    }

    Var constant(const Mat& value) { return leaf(value, false); }

    // Seeds d(root)/d(root) = 1 and sweeps the tape. Root must be scalar.
    void backward(Var root) {
        require_shape(root->val.rows == 1 && root->val.cols == 1, "backward: root must be 1x1");
        root->g().v[0] = 1.0;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            Node* n = it->get();
            if (n->requires_grad && n->back && !n->grad.empty()) n->back();
        }
    }

    size_t size() const { return nodes_.size(); }

private:
    friend Var make_op(Graph& g, Mat val, std::initializer_list<Var> parents,
                       std::function<void()> back);
    std::vector<std::unique_ptr<Node>> nodes_;
};

inline Var make_op(Graph& g, Mat val, std::initializer_list<Var> parents,
                   std::function<void()> back) {
    g.nodes_.push_back(std::make_unique<Node>());
    Node* n = g.nodes_.back().get();
    n->val = std::move(val);
    for (Var p : parents) n->requires_grad |= p->requires_grad;
    if (n->requires_grad) n->back = std::move(back);
    return n;
}

// ---- elementwise ----

inline Var add(Graph& g, Var a, Var b) {
    require_shape(a->val.same_shape(b->val), "add: shape mismatch");
    Mat out = a->val;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] += b->val.v[i];
    Var r = make_op(g, std::move(out), {a, b}, nullptr);
    r->back = [a, b, r]() {
        if (a->requires_grad)
            for (size_t i = 0; i < r->grad.size(); ++i) a->g().v[i] += r->grad.v[i];
        if (b->requires_grad)
            for (size_t i = 0; i < r->grad.size(); ++i) b->g().v[i] += r->grad.v[i];
    };
    return r;
}

inline Var sub(Graph& g, Var a, Var b) {
    require_shape(a->val.same_shape(b->val), "sub: shape mismatch");
    Mat out = a->val;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] -= b->val.v[i];
    Var r = make_op(g, std::move(out), {a, b}, nullptr);
    r->back = [a, b, r]() {
        if (a->requires_grad)
            for (size_t i = 0; i < r->grad.size(); ++i) a->g().v[i] += r->grad.v[i];
        if (b->requires_grad)
            for (size_t i = 0; i < r->grad.size(); ++i) b->g().v[i] -= r->grad.v[i];
    };
    return r;
}

inline Var mul(Graph& g, Var a, Var b) {
    require_shape(a->val.same_shape(b->val), "mul: shape mismatch");
    Mat out = a->val;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] *= b->val.v[i];
    Var r = make_op(g, std::move(out), {a, b}, nullptr);
    r->back = [a, b, r]() {
        if (a->requires_grad)
            for (size_t i = 0; i < r->grad.size(); ++i) a->g().v[i] += r->grad.v[i] * b->val.v[i];
        if (b->requires_grad)
            for (size_t i = 0; i < r->grad.size(); ++i) b->g().v[i] += r->grad.v[i] * a->val.v[i];
    };
    return r;
}

inline Var divide(Graph& g, Var a, Var b) {
    require_shape(a->val.same_shape(b->val), "divide: shape mismatch");
    Mat out = a->val;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] /= b->val.v[i];
    Var r = make_op(g, std::move(out), {a, b}, nullptr);
    r->back = [a, b, r]() {
        for (size_t i = 0; i < r->grad.size(); ++i) {
            const double gi = r->grad.v[i];
            const double bi = b->val.v[i];
            if (a->requires_grad) a->g().v[i] += gi / bi;
            if (b->requires_grad) b->g().v[i] -= gi * a->val.v[i] / (bi * bi);
        }
    };
    return r;
}

inline Var scale(Graph& g, Var a, double s) {
    Mat out = a->val;
    for (auto& x : out.v) x *= s;
    Var r = make_op(g, std::move(out), {a}, nullptr);
    r->back = [a, r, s]() {
        if (!a->requires_grad) return;
        for (size_t i = 0; i < r->grad.size(); ++i) a->g().v[i] += s * r->grad.v[i];
    };
    return r;
}

inline Var add_scalar(Graph& g, Var a, double s) {
    Mat out = a->val;
    for (auto& x : out.v) x += s;
    Var r = make_op(g, std::move(out), {a}, nullptr);
    r->back = [a, r]() {
        if (!a->requires_grad) return;
        for (size_t i = 0; i < r->grad.size(); ++i) a->g().v[i] += r->grad.v[i];
    };
    return r;
}

inline Var abs_val(Graph& g, Var a) {
    Mat out = a->val;
    for (auto& x : out.v) x = std::abs(x);
    Var r = make_op(g, std::move(out), {a}, nullptr);
    r->back = [a, r]() {
        if (!a->requires_grad) return;
        for (size_t i = 0; i < r->grad.size(); ++i) {
            const double x = a->val.v[i];
            a->g().v[i] += r->grad.v[i] * (x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0));
        }
    };
    return r;
}

inline Var sqrt_val(Graph& g, Var a) {
    Mat out = a->val;
    for (auto& x : out.v) x = std::sqrt(x);
    Var r = make_op(g, std::move(out), {a}, nullptr);
    r->back = [a, r]() {
        if (!a->requires_grad) return;
        for (size_t i = 0; i < r->grad.size(); ++i)
            a->g().v[i] += r->grad.v[i] * 0.5 / r->val.v[i];
    };
    return r;
}

inline Var silu(Graph& g, Var a) {
    Mat out = a->val;
    for (auto& x : out.v) x = x / (1.0 + std::exp(-x));
    Var r = make_op(g, std::move(out), {a}, nullptr);
    r->back = [a, r]() {
        if (!a->requires_grad) return;
        for (size_t i = 0; i < r->grad.size(); ++i) {
            const double x = a->val.v[i];
            const double s = 1.0 / (1.0 + std::exp(-x));
            a->g().v[i] += r->grad.v[i] * (s + x * s * (1.0 - s));
        }
    };
    return r;
}

// softplus(x) = log(1 + e^x), computed stably.
inline Var softplus(Graph& g, Var a) {
    Mat out = a->val;
    for (auto& x : out.v) x = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
    Var r = make_op(g, std::move(out), {a}, nullptr);
    r->back = [a, r]() {
        if (!a->requires_grad) return;
        for (size_t i = 0; i < r->grad.size(); ++i) {
            const double x = a->val.v[i];
            a->g().v[i] += r->grad.v[i] / (1.0 + std::exp(-x));
        }
    };
    return r;
}

// ---- matrix products ----

inline Var matmul(Graph& g, Var a, Var b) {
    Mat out;
    mm_nn(a->val, b->val, out, false);
    Var r = make_op(g, std::move(out), {a, b}, nullptr);
    r->back = [a, b, r]() {
        if (a->requires_grad) mm_nt(r->grad, b->val, a->g(), true);
        if (b->requires_grad) mm_tn(a->val, r->grad, b->g(), true);
    };
    return r;
}

// a * b^T without materializing the transpose (used for attention scores).
inline Var matmul_nt(Graph& g, Var a, Var b) {
    Mat out;
    mm_nt(a->val, b->val, out, false);
    Var r = make_op(g, std::move(out), {a, b}, nullptr);
    r->back = [a, b, r]() {
        if (a->requires_grad) mm_nn(r->grad, b->val, a->g(), true);
        if (b->requires_grad) mm_tn(r->grad, a->val, b->g(), true);
    };
    return r;
}

// ---- shape ops ----

inline Var slice_cols(Graph& g, Var a, int c0, int n) {
    require_shape(c0 >= 0 && n > 0 && c0 + n <= a->val.cols, "slice_cols: out of range");
    Mat out(a->val.rows, n);
    for (int i = 0; i < a->val.rows; ++i)
        std::copy_n(a->val.row_ptr(i) + c0, n, out.row_ptr(i));
    Var r = make_op(g, std::move(out), {a}, nullptr);
    r->back = [a, r, c0, n]() {
        if (!a->requires_grad) return;
        Mat& ag = a->g();
        for (int i = 0; i < r->grad.rows; ++i) {
            const double* src = r->grad.row_ptr(i);
            double* dst = ag.row_ptr(i) + c0;
            for (int j = 0; j < n; ++j) dst[j] += src[j];
        }
    };
    return r;
}

inline Var concat_cols(Graph& g, const std::vector<Var>& parts) {
    require_shape(!parts.empty(), "concat_cols: empty");
    int rows = parts[0]->val.rows, cols = 0;
    for (Var p : parts) {
        require_shape(p->val.rows == rows, "concat_cols: row mismatch");
        cols += p->val.cols;
    }
    Mat out(rows, cols);
    int off = 0;
    for (Var p : parts) {
        for (int i = 0; i < rows; ++i)
            std::copy_n(p->val.row_ptr(i), p->val.cols, out.row_ptr(i) + off);
        off += p->val.cols;
    }
    bool rg = false;
    for (Var p : parts) rg |= p->requires_grad;
    Var r = make_op(g, std::move(out), {}, nullptr);
    r->requires_grad = rg;
    std::vector<Var> ps = parts;
    r->back = [ps, r]() {
        int off = 0;
        for (Var p : ps) {
            if (p->requires_grad) {
                Mat& pg = p->g();
                for (int i = 0; i < r->grad.rows; ++i) {
                    const double* src = r->grad.row_ptr(i) + off;
                    double* dst = pg.row_ptr(i);
                    for (int j = 0; j < p->val.cols; ++j) dst[j] += src[j];
                }
            }
            off += p->val.cols;
        }
    };
    return r;
}

// ---- broadcasts (row vector over all rows) ----

inline Var mul_rowvec(Graph& g, Var x, Var rv) {
    require_shape(rv->val.rows == 1 && rv->val.cols == x->val.cols, "mul_rowvec: shape");
    Mat out = x->val;
    for (int i = 0; i < out.rows; ++i) {
        double* orow = out.row_ptr(i);
        for (int j = 0; j < out.cols; ++j) orow[j] *= rv->val.v[j];
    }
    Var r = make_op(g, std::move(out), {x, rv}, nullptr);
    r->back = [x, rv, r]() {
        if (x->requires_grad) {
            Mat& xg = x->g();
            for (int i = 0; i < r->grad.rows; ++i) {
                const double* grow = r->grad.row_ptr(i);
                double* xrow = xg.row_ptr(i);
                for (int j = 0; j < r->grad.cols; ++j) xrow[j] += grow[j] * rv->val.v[j];
            }
        }
        if (rv->requires_grad) {
            Mat& vg = rv->g();
            for (int i = 0; i < r->grad.rows; ++i) {
                const double* grow = r->grad.row_ptr(i);
                const double* xrow = x->val.row_ptr(i);
                for (int j = 0; j < r->grad.cols; ++j) vg.v[j] += grow[j] * xrow[j];
            }
        }
    };
    return r;
}

inline Var add_rowvec(Graph& g, Var x, Var rv) {
    require_shape(rv->val.rows == 1 && rv->val.cols == x->val.cols, "add_rowvec: shape");
    Mat out = x->val;
    for (int i = 0; i < out.rows; ++i) {
        double* orow = out.row_ptr(i);
        for (int j = 0; j < out.cols; ++j) orow[j] += rv->val.v[j];
    }
    Var r = make_op(g, std::move(out), {x, rv}, nullptr);
    r->back = [x, rv, r]() {
        if (x->requires_grad) {
            Mat& xg = x->g();
            for (size_t i = 0; i < r->grad.size(); ++i) xg.v[i] += r->grad.v[i];
        }
        if (rv->requires_grad) {
            Mat& vg = rv->g();
            for (int i = 0; i < r->grad.rows; ++i) {
                const double* grow = r->grad.row_ptr(i);
                for (int j = 0; j < r->grad.cols; ++j) vg.v[j] += grow[j];
            }
        }
    };
    return r;
}

// ---- reductions ----

inline Var sum_all(Graph& g, Var a) {
    Mat out(1, 1);
    out.v[0] = a->val.sum();
    Var r = make_op(g, std::move(out), {a}, nullptr);
    r->back = [a, r]() {
        if (!a->requires_grad) return;
        const double gs = r->grad.v[0];
        Mat& ag = a->g();
        for (auto& x : ag.v) x += gs;
    };
    return r;
}

inline Var row_sum(Graph& g, Var a) {
    Mat out(a->val.rows, 1);
    for (int i = 0; i < a->val.rows; ++i) {
        double s = 0.0;
        const double* row = a->val.row_ptr(i);
        for (int j = 0; j < a->val.cols; ++j) s += row[j];
        out.v[i] = s;
    }
    Var r = make_op(g, std::move(out), {a}, nullptr);
    r->back = [a, r]() {
        if (!a->requires_grad) return;
        Mat& ag = a->g();
        for (int i = 0; i < ag.rows; ++i) {
            const double gi = r->grad.v[i];
            double* row = ag.row_ptr(i);
            for (int j = 0; j < ag.cols; ++j) row[j] += gi;
        }
    };
    return r;
}

inline Var mean_all(Graph& g, Var a) {
    return scale(g, sum_all(g, a), 1.0 / static_cast<double>(a->val.size()));
}

// Mean over rows -> 1 x cols (used for mean-pooled clip embeddings).
inline Var col_mean(Graph& g, Var a) {
    Mat out(1, a->val.cols);
    for (int i = 0; i < a->val.rows; ++i) {
        const double* row = a->val.row_ptr(i);
        for (int j = 0; j < a->val.cols; ++j) out.v[j] += row[j];
    }
    const double inv = 1.0 / static_cast<double>(a->val.rows);
    for (auto& x : out.v) x *= inv;
    Var r = make_op(g, std::move(out), {a}, nullptr);
    r->back = [a, r, inv]() {
        if (!a->requires_grad) return;
        Mat& ag = a->g();
        for (int i = 0; i < ag.rows; ++i) {
            double* row = ag.row_ptr(i);
            for (int j = 0; j < ag.cols; ++j) row[j] += inv * r->grad.v[j];
        }
    };
    return r;
}

// ---- neural-net specific ----

inline Var softmax_rows(Graph& g, Var a) {
    Mat out = a->val;
    for (int i = 0; i < out.rows; ++i) {
        double* row = out.row_ptr(i);
        double mx = row[0];
        for (int j = 1; j < out.cols; ++j) mx = std::max(mx, row[j]);
        double s = 0.0;
        for (int j = 0; j < out.cols; ++j) {
            row[j] = std::exp(row[j] - mx);
            s += row[j];
        }
        for (int j = 0; j < out.cols; ++j) row[j] /= s;
    }
    Var r = make_op(g, std::move(out), {a}, nullptr);
    r->back = [a, r]() {
        if (!a->requires_grad) return;
        Mat& ag = a->g();
        for (int i = 0; i < r->val.rows; ++i) {
            const double* y = r->val.row_ptr(i);
            const double* gy = r->grad.row_ptr(i);
            double dot = 0.0;
            for (int j = 0; j < r->val.cols; ++j) dot += y[j] * gy[j];
            double* row = ag.row_ptr(i);
            for (int j = 0; j < r->val.cols; ++j) row[j] += y[j] * (gy[j] - dot);
        }
    };
    return r;
}

// y_i = x_i / sqrt(mean(x_i^2) + eps) .* w, per row.
inline Var rms_norm_rows(Graph& g, Var x, Var w, double eps) {
    require_shape(w->val.rows == 1 && w->val.cols == x->val.cols, "rms_norm: scale shape");
    const int R = x->val.rows, C = x->val.cols;
    Mat out(R, C);
    std::vector<double> rinv(static_cast<size_t>(R));
    for (int i = 0; i < R; ++i) {
        const double* row = x->val.row_ptr(i);
        double ms = 0.0;
        for (int j = 0; j < C; ++j) ms += row[j] * row[j];
        ms = ms / C + eps;
        rinv[i] = 1.0 / std::sqrt(ms);
        double* orow = out.row_ptr(i);
        for (int j = 0; j < C; ++j) orow[j] = row[j] * rinv[i] * w->val.v[j];
    }
    Var r = make_op(g, std::move(out), {x, w}, nullptr);
    r->back = [x, w, r, rinv, C]() {
        for (int i = 0; i < x->val.rows; ++i) {
            const double* xr = x->val.row_ptr(i);
            const double* gy = r->grad.row_ptr(i);
            const double ri = rinv[i];
            if (x->requires_grad) {
                // dx_k = ri*w_k*g_k - ri^3/C * x_k * sum_j g_j*w_j*x_j
                double s = 0.0;
                for (int j = 0; j < C; ++j) s += gy[j] * w->val.v[j] * xr[j];
                const double f = ri * ri * ri / C * s;
                double* xg = x->g().row_ptr(i);
                for (int k = 0; k < C; ++k) xg[k] += ri * w->val.v[k] * gy[k] - f * xr[k];
            }
            if (w->requires_grad) {
                double* wg = w->g().v.data();
                for (int j = 0; j < C; ++j) wg[j] += gy[j] * xr[j] * ri;
            }
        }
    };
    return r;
}

// Rotates channel pairs (2i, 2i+1) of each row by pos * base^(-2i/dim).
// Parameter-free and norm-preserving per pair.
inline Var rope_rotate(Graph& g, Var x, const std::vector<int>& positions, double base) {
    const int R = x->val.rows, C = x->val.cols;
    require_shape(C % 2 == 0, "rope_rotate: head_dim must be even");
    require_shape(static_cast<int>(positions.size()) == R, "rope_rotate: positions size");
    Mat out(R, C);
    std::vector<double> inv_freq(static_cast<size_t>(C / 2));
    for (int i = 0; i < C / 2; ++i) inv_freq[i] = std::pow(base, -2.0 * i / C);
    for (int r = 0; r < R; ++r) {
        const double* xr = x->val.row_ptr(r);
        double* orow = out.row_ptr(r);
        for (int i = 0; i < C / 2; ++i) {
            const double th = positions[r] * inv_freq[i];
            const double c = std::cos(th), s = std::sin(th);
            orow[2 * i] = xr[2 * i] * c - xr[2 * i + 1] * s;
            orow[2 * i + 1] = xr[2 * i] * s + xr[2 * i + 1] * c;
        }
    }
    Var r = make_op(g, std::move(out), {x}, nullptr);
    std::vector<int> pos = positions;
    r->back = [x, r, pos, inv_freq]() {
        if (!x->requires_grad) return;
        const int C = x->val.cols;
        Mat& xg = x->g();
        for (int rr = 0; rr < x->val.rows; ++rr) {
            const double* gy = r->grad.row_ptr(rr);
            double* gx = xg.row_ptr(rr);
            for (int i = 0; i < C / 2; ++i) {
                const double th = pos[rr] * inv_freq[i];
                const double c = std::cos(th), s = std::sin(th);
                gx[2 * i] += gy[2 * i] * c + gy[2 * i + 1] * s;
                gx[2 * i + 1] += -gy[2 * i] * s + gy[2 * i + 1] * c;
            }
        }
    };
    return r;
}

// Gathers non-overlapping psize x psize blocks of a [F x T] map into rows of
// a [n_patches x psize^2] matrix, time-major (all frequency blocks of time
// block 0 first). Differentiable so saliency can flow back to the input map.
inline Var patch_gather(Graph& g, Var map, int psize) {
    const int F = map->val.rows, T = map->val.cols;
    require_shape(F >= psize && T >= psize,
                  "patch_gather: map smaller than one patch " + shape_str(map->val));
    const int fp = F / psize, tp = T / psize;
    Mat out(fp * tp, psize * psize);
    for (int tb = 0; tb < tp; ++tb)
        for (int fb = 0; fb < fp; ++fb) {
            double* prow = out.row_ptr(tb * fp + fb);
            for (int i = 0; i < psize; ++i)
                for (int j = 0; j < psize; ++j)
                    prow[i * psize + j] = map->val.at(fb * psize + i, tb * psize + j);
        }
    Var r = make_op(g, std::move(out), {map}, nullptr);
    r->back = [map, r, psize, fp, tp]() {
        if (!map->requires_grad) return;
        Mat& mg = map->g();
        for (int tb = 0; tb < tp; ++tb)
            for (int fb = 0; fb < fp; ++fb) {
                const double* prow = r->grad.row_ptr(tb * fp + fb);
                for (int i = 0; i < psize; ++i)
                    for (int j = 0; j < psize; ++j)
                        mg.at(fb * psize + i, tb * psize + j) += prow[i * psize + j];
            }
    };
    return r;
}

}  // namespace biome::ad
