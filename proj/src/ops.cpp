#include "lmkit/ops.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "lmkit/kernels.hpp"

namespace lmkit::ops {

namespace {

constexpr float kInvSqrt2 = 0.70710678118654752f;
constexpr float kInvSqrt2Pi = 0.39894228040143268f;

bool track(const Tensor& a) { return autograd::grad_enabled() && a.requires_grad(); }
bool track(const Tensor& a, const Tensor& b) { return track(a) || track(b); }

void finite(const Tensor& t, const char* op) {
    if (debug_checks_enabled()) check_finite(t, op);
}

void require_2d(const Tensor& t, const char* op) {
    if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a 2-D tensor");
}

// Row extent for ops that treat the last axis as the reduced one.
std::int64_t row_count(const Tensor& t) { return t.numel() / t.dim(-1); }

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw ShapeError("add: shape mismatch");
    Tensor out = Tensor::zeros(a.shape());
    const std::int64_t n = out.numel();
    const float* pa = a.data();
    const float* pb = b.data();
    float* po = out.data();
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
    finite(out, "add");
    if (track(a, b)) {
        autograd::record(out, {a, b}, [](autograd::Node& nd) {
            std::span<const float> g(nd.out->grad(), static_cast<std::size_t>(nd.out->numel()));
            if (nd.parents[0].requires_grad()) nd.parents[0].accumulate_grad(g);
            if (nd.parents[1].requires_grad()) nd.parents[1].accumulate_grad(g);
        });
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw ShapeError("mul: shape mismatch");
    Tensor out = Tensor::zeros(a.shape());
    const std::int64_t n = out.numel();
    const float* pa = a.data();
    const float* pb = b.data();
    float* po = out.data();
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
    finite(out, "mul");
    if (track(a, b)) {
        autograd::record(out, {a, b}, [](autograd::Node& nd) {
            const float* g = nd.out->grad();
            const std::int64_t n2 = nd.out->numel();
            Tensor &pa2 = nd.parents[0], &pb2 = nd.parents[1];
            if (pa2.requires_grad()) {
                auto& ga = pa2.grad_buf();
                const float* db = pb2.data();
                for (std::int64_t i = 0; i < n2; ++i) ga[static_cast<std::size_t>(i)] += g[i] * db[i];
            }
            if (pb2.requires_grad()) {
                auto& gb = pb2.grad_buf();
                const float* da = pa2.data();
                for (std::int64_t i = 0; i < n2; ++i) gb[static_cast<std::size_t>(i)] += g[i] * da[i];
            }
        });
    }
    return out;
}

Tensor scale(const Tensor& a, float s) {
    Tensor out = Tensor::zeros(a.shape());
    const std::int64_t n = out.numel();
    const float* pa = a.data();
    float* po = out.data();
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] * s;
    finite(out, "scale");
    if (track(a)) {
        autograd::record(out, {a}, [s](autograd::Node& nd) {
            if (!nd.parents[0].requires_grad()) return;
            const float* g = nd.out->grad();
            auto& ga = nd.parents[0].grad_buf();
            const std::int64_t n2 = nd.out->numel();
            for (std::int64_t i = 0; i < n2; ++i) ga[static_cast<std::size_t>(i)] += g[i] * s;
        });
    }
    return out;
}

Tensor gelu(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    const std::int64_t n = out.numel();
    const float* px = x.data();
    float* po = out.data();
#pragma omp parallel for schedule(static) if (kernels::parallel_enabled() && n > 16384)
    for (std::int64_t i = 0; i < n; ++i) {
        po[i] = 0.5f * px[i] * (1.0f + std::erff(px[i] * kInvSqrt2));
    }
    finite(out, "gelu");
    if (track(x)) {
        autograd::record(out, {x}, [](autograd::Node& nd) {
            if (!nd.parents[0].requires_grad()) return;
            const float* g = nd.out->grad();
            const float* px2 = nd.parents[0].data();
            auto& gx = nd.parents[0].grad_buf();
            const std::int64_t n2 = nd.out->numel();
            for (std::int64_t i = 0; i < n2; ++i) {
                const float v = px2[i];
                const float cdf = 0.5f * (1.0f + std::erff(v * kInvSqrt2));
                const float pdf = kInvSqrt2Pi * std::exp(-0.5f * v * v);
                gx[static_cast<std::size_t>(i)] += g[i] * (cdf + v * pdf);
            }
        });
    }
    return out;
}

Tensor softplus(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    const std::int64_t n = out.numel();
    const float* px = x.data();
    float* po = out.data();
    for (std::int64_t i = 0; i < n; ++i) {
        const float v = px[i];
        po[i] = std::max(v, 0.0f) + std::log1p(std::exp(-std::abs(v)));
    }
    finite(out, "softplus");
    if (track(x)) {
        autograd::record(out, {x}, [](autograd::Node& nd) {
            if (!nd.parents[0].requires_grad()) return;
            const float* g = nd.out->grad();
            const float* px2 = nd.parents[0].data();
            auto& gx = nd.parents[0].grad_buf();
            const std::int64_t n2 = nd.out->numel();
            for (std::int64_t i = 0; i < n2; ++i) {
                const float sig = 1.0f / (1.0f + std::exp(-px2[i]));
                gx[static_cast<std::size_t>(i)] += g[i] * sig;
            }
        });
    }
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul");
    require_2d(b, "matmul");
    const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw ShapeError("matmul: inner extents differ (" + std::to_string(k) + " vs " +
                         std::to_string(b.dim(0)) + ")");
    }
    Tensor out = Tensor::zeros({m, n});
    kernels::gemm(a.data(), kernels::Trans::N, b.data(), kernels::Trans::N, out.data(), m, k, n,
                  false);
    finite(out, "matmul");
    if (track(a, b)) {
        autograd::record(out, {a, b}, [m, k, n](autograd::Node& nd) {
            const float* g = nd.out->grad();
            Tensor &pa = nd.parents[0], &pb = nd.parents[1];
            if (pa.requires_grad()) {
                // dA += dC * B^T
                kernels::gemm(g, kernels::Trans::N, pb.data(), kernels::Trans::T,
                              pa.grad_buf().data(), m, n, k, true);
            }
            if (pb.requires_grad()) {
                // dB += A^T * dC
                kernels::gemm(pa.data(), kernels::Trans::T, g, kernels::Trans::N,
                              pb.grad_buf().data(), k, m, n, true);
            }
        });
    }
    return out;
}

Tensor linear(const Tensor& x, const Tensor& w) {
    require_2d(x, "linear");
    require_2d(w, "linear");
    const std::int64_t t = x.dim(0), d_in = x.dim(1), d_out = w.dim(0);
    if (w.dim(1) != d_in) {
        throw ShapeError("linear: input width " + std::to_string(d_in) +
                         " does not match weight [" + std::to_string(d_out) + ", " +
                         std::to_string(w.dim(1)) + "]");
    }
    Tensor out = Tensor::zeros({t, d_out});
    kernels::gemm(x.data(), kernels::Trans::N, w.data(), kernels::Trans::T, out.data(), t, d_in,
                  d_out, false);
    finite(out, "linear");
    if (track(x, w)) {
        autograd::record(out, {x, w}, [t, d_in, d_out](autograd::Node& nd) {
            const float* g = nd.out->grad();
            Tensor &px = nd.parents[0], &pw = nd.parents[1];
            if (px.requires_grad()) {
                // dX += dY * W
                kernels::gemm(g, kernels::Trans::N, pw.data(), kernels::Trans::N,
                              px.grad_buf().data(), t, d_out, d_in, true);
            }
            if (pw.requires_grad()) {
                // dW += dY^T * X
                kernels::gemm(g, kernels::Trans::T, px.data(), kernels::Trans::N,
                              pw.grad_buf().data(), d_out, t, d_in, true);
            }
        });
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    require_2d(a, "transpose");
    const std::int64_t m = a.dim(0), n = a.dim(1);
    Tensor out = Tensor::zeros({n, m});
    const float* pa = a.data();
    float* po = out.data();
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t j = 0; j < n; ++j) po[j * m + i] = pa[i * n + j];
    }
    if (track(a)) {
        autograd::record(out, {a}, [m, n](autograd::Node& nd) {
            if (!nd.parents[0].requires_grad()) return;
            const float* g = nd.out->grad();
            auto& ga = nd.parents[0].grad_buf();
            for (std::int64_t i = 0; i < m; ++i) {
                for (std::int64_t j = 0; j < n; ++j) {
                    ga[static_cast<std::size_t>(i * n + j)] += g[j * m + i];
                }
            }
        });
    }
    return out;
}

namespace {

void softmax_row(const float* x, float* y, std::int64_t n) {
    float mx = x[0];
    for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, x[j]);
    double total = 0.0;
    for (std::int64_t j = 0; j < n; ++j) {
        y[j] = std::exp(x[j] - mx);
        total += y[j];
    }
    const float inv = static_cast<float>(1.0 / total);
    for (std::int64_t j = 0; j < n; ++j) y[j] *= inv;
}

// dx = y .* (g - dot(y, g)), the usual softmax Jacobian-vector product.
void softmax_row_backward(const float* y, const float* g, float* gx, std::int64_t n) {
    double dot = 0.0;
    for (std::int64_t j = 0; j < n; ++j) dot += static_cast<double>(y[j]) * g[j];
    const float d = static_cast<float>(dot);
    for (std::int64_t j = 0; j < n; ++j) gx[j] += y[j] * (g[j] - d);
}

}  // namespace

Tensor softmax(const Tensor& x) {
    if (x.rank() < 1 || x.dim(-1) < 1) throw ShapeError("softmax: empty reduction axis");
    const std::int64_t n = x.dim(-1);
    const std::int64_t rows = row_count(x);
    Tensor out = Tensor::zeros(x.shape());
    const float* px = x.data();
    float* po = out.data();
#pragma omp parallel for schedule(static) if (kernels::parallel_enabled() && rows > 4)
    for (std::int64_t r = 0; r < rows; ++r) softmax_row(px + r * n, po + r * n, n);
    finite(out, "softmax");
    if (track(x)) {
        autograd::record(out, {x}, [rows, n](autograd::Node& nd) {
            if (!nd.parents[0].requires_grad()) return;
            const float* g = nd.out->grad();
            const float* y = nd.out->data();
            auto& gx = nd.parents[0].grad_buf();
            for (std::int64_t r = 0; r < rows; ++r) {
                softmax_row_backward(y + r * n, g + r * n, gx.data() + r * n, n);
            }
        });
    }
    return out;
}

Tensor causal_softmax(const Tensor& scores, std::int64_t past_len) {
    require_2d(scores, "causal_softmax");
    const std::int64_t t = scores.dim(0), s = scores.dim(1);
    if (past_len < 0 || s != past_len + t) {
        throw ShapeError("causal_softmax: expected width past_len + T");
    }
    Tensor out = Tensor::zeros({t, s});
    const float* px = scores.data();
    float* po = out.data();
#pragma omp parallel for schedule(static) if (kernels::parallel_enabled() && t > 4)
    for (std::int64_t i = 0; i < t; ++i) {
        const std::int64_t allowed = past_len + i + 1;
        softmax_row(px + i * s, po + i * s, allowed);
        // entries beyond `allowed` stay exactly zero
    }
    finite(out, "causal_softmax");
    if (track(scores)) {
        autograd::record(out, {scores}, [t, s, past_len](autograd::Node& nd) {
            if (!nd.parents[0].requires_grad()) return;
            const float* g = nd.out->grad();
            const float* y = nd.out->data();
            auto& gx = nd.parents[0].grad_buf();
            for (std::int64_t i = 0; i < t; ++i) {
                softmax_row_backward(y + i * s, g + i * s, gx.data() + i * s, past_len + i + 1);
            }
        });
    }
    return out;
}

namespace {

// Stable log-sum-exp of one row; also returns the row max.
double row_logsumexp(const float* x, std::int64_t n, float* out_max) {
    float mx = x[0];
    for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, x[j]);
    double total = 0.0;
    for (std::int64_t j = 0; j < n; ++j) total += std::exp(static_cast<double>(x[j]) - mx);
    *out_max = mx;
    return mx + std::log(total);
}

}  // namespace

Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets,
                     std::span<const std::uint8_t> mask) {
    require_2d(logits, "cross_entropy");
    const std::int64_t t = logits.dim(0), v = logits.dim(1);
    if (static_cast<std::int64_t>(targets.size()) != t ||
        static_cast<std::int64_t>(mask.size()) != t) {
        throw ShapeError("cross_entropy: targets/mask length must match rows");
    }
    std::int64_t n_active = 0;
    for (std::int64_t i = 0; i < t; ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        ++n_active;
        const std::int32_t tgt = targets[static_cast<std::size_t>(i)];
        if (tgt < 0 || tgt >= v) {
            throw IndexError("cross_entropy: target " + std::to_string(tgt) +
                             " out of range for vocab " + std::to_string(v));
        }
    }
    if (n_active == 0) {
        throw DegenerateInputError("cross_entropy: degenerate batch, loss mask is all false");
    }

    const float* pl = logits.data();
    double total = 0.0;
    for (std::int64_t i = 0; i < t; ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        float mx;
        const double lse = row_logsumexp(pl + i * v, v, &mx);
        total += lse - pl[i * v + targets[static_cast<std::size_t>(i)]];
    }
    Tensor out = Tensor::scalar(static_cast<float>(total / static_cast<double>(n_active)));
    finite(out, "cross_entropy");
    if (track(logits)) {
        std::vector<std::int32_t> tgt(targets.begin(), targets.end());
        std::vector<std::uint8_t> msk(mask.begin(), mask.end());
        autograd::record(out, {logits},
                         [t, v, n_active, tgt = std::move(tgt),
                          msk = std::move(msk)](autograd::Node& nd) {
                             if (!nd.parents[0].requires_grad()) return;
                             const float gscale = nd.out->grad()[0] / static_cast<float>(n_active);
                             const float* pl2 = nd.parents[0].data();
                             auto& gl = nd.parents[0].grad_buf();
#pragma omp parallel for schedule(static) if (kernels::parallel_enabled() && t > 8)
                             for (std::int64_t i = 0; i < t; ++i) {
                                 if (!msk[static_cast<std::size_t>(i)]) continue;
                                 const float* row = pl2 + i * v;
                                 float* grow = gl.data() + i * v;
                                 float mx = row[0];
                                 for (std::int64_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
                                 double total2 = 0.0;
                                 for (std::int64_t j = 0; j < v; ++j) {
                                     total2 += std::exp(static_cast<double>(row[j]) - mx);
                                 }
                                 const float inv = static_cast<float>(1.0 / total2);
                                 for (std::int64_t j = 0; j < v; ++j) {
                                     const float p =
                                         std::exp(row[j] - mx) * inv;
                                     grow[j] += gscale * p;
                                 }
                                 grow[tgt[static_cast<std::size_t>(i)]] -= gscale;
                             }
                         });
    }
    return out;
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets) {
    std::vector<std::uint8_t> mask(targets.size(), 1);
    return cross_entropy(logits, targets, mask);
}

Tensor sum(const Tensor& x) {
    double total = 0.0;
    for (float v : x.values()) total += v;
    Tensor out = Tensor::scalar(static_cast<float>(total));
    finite(out, "sum");
    if (track(x)) {
        autograd::record(out, {x}, [](autograd::Node& nd) {
            if (!nd.parents[0].requires_grad()) return;
            const float g = nd.out->grad()[0];
            auto& gx = nd.parents[0].grad_buf();
            for (float& v : gx) v += g;
        });
    }
    return out;
}

Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids) {
    require_2d(table, "embedding");
    const std::int64_t v = table.dim(0), d = table.dim(1);
    const std::int64_t t = static_cast<std::int64_t>(ids.size());
    if (t == 0) throw ShapeError("embedding: empty id sequence");
    for (std::int32_t id : ids) {
        if (id < 0 || id >= v) {
            throw IndexError("embedding: token id " + std::to_string(id) +
                             " out of range for vocab " + std::to_string(v));
        }
    }
    Tensor out = Tensor::zeros({t, d});
    const float* pt = table.data();
    float* po = out.data();
    for (std::int64_t i = 0; i < t; ++i) {
        std::memcpy(po + i * d, pt + static_cast<std::int64_t>(ids[static_cast<std::size_t>(i)]) * d,
                    sizeof(float) * static_cast<std::size_t>(d));
    }
    if (track(table)) {
        std::vector<std::int32_t> ids_copy(ids.begin(), ids.end());
        autograd::record(out, {table}, [d, ids_copy = std::move(ids_copy)](autograd::Node& nd) {
            if (!nd.parents[0].requires_grad()) return;
            const float* g = nd.out->grad();
            auto& gt = nd.parents[0].grad_buf();
            // Serial scatter-add keeps repeated ids deterministic.
            for (std::size_t i = 0; i < ids_copy.size(); ++i) {
                float* dst = gt.data() + static_cast<std::int64_t>(ids_copy[i]) * d;
                const float* src = g + static_cast<std::int64_t>(i) * d;
                for (std::int64_t j = 0; j < d; ++j) dst[j] += src[j];
            }
        });
    }
    return out;
}

Tensor rmsnorm(const Tensor& x, const Tensor& w, float eps) {
    const std::int64_t d = x.dim(-1);
    if (w.rank() != 1 || w.dim(0) != d) throw ShapeError("rmsnorm: weight must be [d]");
    const std::int64_t rows = row_count(x);
    Tensor out = Tensor::zeros(x.shape());
    const float* px = x.data();
    const float* pw = w.data();
    float* po = out.data();
#pragma omp parallel for schedule(static) if (kernels::parallel_enabled() && rows > 4)
    for (std::int64_t r = 0; r < rows; ++r) {
        const float* row = px + r * d;
        double ms = 0.0;
        for (std::int64_t j = 0; j < d; ++j) ms += static_cast<double>(row[j]) * row[j];
        const float inv = static_cast<float>(1.0 / std::sqrt(ms / static_cast<double>(d) + eps));
        float* orow = po + r * d;
        for (std::int64_t j = 0; j < d; ++j) orow[j] = row[j] * inv * pw[j];
    }
    finite(out, "rmsnorm");
    if (track(x, w)) {
        autograd::record(out, {x, w}, [rows, d, eps](autograd::Node& nd) {
            const float* g = nd.out->grad();
            Tensor &px2 = nd.parents[0], &pw2 = nd.parents[1];
            const float* xd = px2.data();
            const float* wd = pw2.data();
            const bool need_x = px2.requires_grad();
            const bool need_w = pw2.requires_grad();
            float* gx = need_x ? px2.grad_buf().data() : nullptr;
            float* gw = need_w ? pw2.grad_buf().data() : nullptr;
            for (std::int64_t r = 0; r < rows; ++r) {
                const float* row = xd + r * d;
                const float* grow = g + r * d;
                double ms = 0.0;
                for (std::int64_t j = 0; j < d; ++j) ms += static_cast<double>(row[j]) * row[j];
                const double inv = 1.0 / std::sqrt(ms / static_cast<double>(d) + eps);
                if (need_w) {
                    for (std::int64_t j = 0; j < d; ++j) {
                        gw[j] += grow[j] * row[j] * static_cast<float>(inv);
                    }
                }
                if (need_x) {
                    double dot = 0.0;  // sum_j g_j * w_j * x_j
                    for (std::int64_t j = 0; j < d; ++j) {
                        dot += static_cast<double>(grow[j]) * wd[j] * row[j];
                    }
                    const double k = dot * inv * inv * inv / static_cast<double>(d);
                    for (std::int64_t j = 0; j < d; ++j) {
                        gx[r * d + j] += static_cast<float>(grow[j] * wd[j] * inv - row[j] * k);
                    }
                }
            }
        });
    }
    return out;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw ShapeError("concat: no parts");
    if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
    for (const Tensor& p : parts) require_2d(p, "concat");
    const std::int64_t fixed = parts[0].dim(1 - axis);
    std::int64_t total = 0;
    for (const Tensor& p : parts) {
        if (p.dim(1 - axis) != fixed) throw ShapeError("concat: mismatched extents");
        total += p.dim(axis);
    }
    const std::int64_t rows = axis == 0 ? total : fixed;
    const std::int64_t cols = axis == 0 ? fixed : total;
    Tensor out = Tensor::zeros({rows, cols});
    float* po = out.data();
    if (axis == 0) {
        std::int64_t off = 0;
        for (const Tensor& p : parts) {
            std::memcpy(po + off * cols, p.data(),
                        sizeof(float) * static_cast<std::size_t>(p.numel()));
            off += p.dim(0);
        }
    } else {
        std::int64_t off = 0;
        for (const Tensor& p : parts) {
            const std::int64_t w = p.dim(1);
            const float* pp = p.data();
            for (std::int64_t i = 0; i < rows; ++i) {
                std::memcpy(po + i * cols + off, pp + i * w,
                            sizeof(float) * static_cast<std::size_t>(w));
            }
            off += w;
        }
    }
    bool any = false;
    for (const Tensor& p : parts) any = any || track(p);
    if (any) {
        autograd::record(out, parts, [axis, rows, cols](autograd::Node& nd) {
            const float* g = nd.out->grad();
            std::int64_t off = 0;
            for (Tensor& p : nd.parents) {
                const std::int64_t ext = p.dim(axis);
                if (p.requires_grad()) {
                    auto& gp = p.grad_buf();
                    if (axis == 0) {
                        for (std::int64_t i = 0; i < p.numel(); ++i) {
                            gp[static_cast<std::size_t>(i)] += g[off * cols + i];
                        }
                    } else {
                        const std::int64_t w = p.dim(1);
                        for (std::int64_t i = 0; i < rows; ++i) {
                            for (std::int64_t j = 0; j < w; ++j) {
                                gp[static_cast<std::size_t>(i * w + j)] += g[i * cols + off + j];
                            }
                        }
                    }
                }
                off += ext;
            }
        });
    }
    return out;
}

std::vector<Tensor> split(const Tensor& x, int axis, int n_parts) {
    require_2d(x, "split");
    if (axis != 0 && axis != 1) throw ShapeError("split: axis must be 0 or 1");
    if (n_parts < 1 || x.dim(axis) % n_parts != 0) {
        throw ShapeError("split: extent not divisible by part count");
    }
    const std::int64_t rows = x.dim(0), cols = x.dim(1);
    const std::int64_t ext = x.dim(axis) / n_parts;
    std::vector<Tensor> parts;
    parts.reserve(static_cast<std::size_t>(n_parts));
    const float* px = x.data();
    for (int p = 0; p < n_parts; ++p) {
        const std::int64_t off = static_cast<std::int64_t>(p) * ext;
        Tensor part = axis == 0 ? Tensor::zeros({ext, cols}) : Tensor::zeros({rows, ext});
        float* pd = part.data();
        if (axis == 0) {
            std::memcpy(pd, px + off * cols, sizeof(float) * static_cast<std::size_t>(ext * cols));
        } else {
            for (std::int64_t i = 0; i < rows; ++i) {
                std::memcpy(pd + i * ext, px + i * cols + off,
                            sizeof(float) * static_cast<std::size_t>(ext));
            }
        }
        if (track(x)) {
            autograd::record(part, {x}, [axis, off, ext, rows, cols](autograd::Node& nd) {
                if (!nd.parents[0].requires_grad()) return;
                const float* g = nd.out->grad();
                auto& gx = nd.parents[0].grad_buf();
                if (axis == 0) {
                    for (std::int64_t i = 0; i < ext * cols; ++i) {
                        gx[static_cast<std::size_t>(off * cols + i)] += g[i];
                    }
                } else {
                    for (std::int64_t i = 0; i < rows; ++i) {
                        for (std::int64_t j = 0; j < ext; ++j) {
                            gx[static_cast<std::size_t>(i * cols + off + j)] += g[i * ext + j];
                        }
                    }
                }
            });
        }
        parts.push_back(std::move(part));
    }
    return parts;
}

Tensor checkpoint(const std::function<Tensor(const Tensor&)>& fn, const Tensor& x) {
    if (!autograd::grad_enabled() || !x.requires_grad()) return fn(x);

    Tensor saved = x.detached();
    Tensor out;
    {
        autograd::NoGradGuard ng;
        out = fn(saved);
    }
    autograd::record(out, {x}, [fn, saved](autograd::Node& nd) {
        // Replay the segment with recording on; the alias input shares the
        // original tensor's grad cell, so d(input) lands in the right place
        // and parameter grads accumulate during the local sweep.
        Tensor replay_in = nd.parents[0].grad_alias();
        Tensor replay_out = fn(replay_in);
        std::span<const float> g(nd.out->grad(), static_cast<std::size_t>(nd.out->numel()));
        autograd::backward_seed(replay_out, g);
    });
    return out;
}

}  // namespace lmkit::ops
