#include "coogan/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cblas.h>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

namespace coogan::ad {

namespace {

std::atomic<i64> g_next_id{1};
thread_local bool g_recording = true;

Tensor zeros_like(const Tensor& t) { return Tensor(t.shape()); }

void check4(const Tensor& t, const char* where) {
    if (t.ndim() != 4) throw dimension_error(std::string(where) + ": expected NCHW tensor, got " + t.shape_str());
}

}  // namespace

// broadcast a scalar {1} to an arbitrary shape; adjoint of sum_all
static Var bcast_full(const Var& a, const std::vector<i64>& shape);

bool recording() { return g_recording; }

NoGradGuard::NoGradGuard() : prev_(g_recording) { g_recording = false; }
NoGradGuard::~NoGradGuard() { g_recording = prev_; }

Tensor& Var::value() { return n_->value; }
const Tensor& Var::value() const { return n_->value; }
bool Var::requires_grad() const { return n_ && n_->requires_grad; }
const std::vector<i64>& Var::shape() const { return n_->value.shape(); }
i64 Var::dim(int i) const { return n_->value.dim(i); }
i64 Var::numel() const { return n_->value.numel(); }
double Var::item() const {
    if (numel() != 1) throw dimension_error("item() on non-scalar " + n_->value.shape_str());
    return n_->value[0];
}

Var leaf(Tensor value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    n->id = g_next_id.fetch_add(1);
    return Var(n);
}

Var constant(Tensor value) { return leaf(std::move(value), false); }

Var scalar(double v) { return leaf(Tensor::scalar(v), false); }

Var detach(const Var& x) { return leaf(x.value(), false); }

namespace {

// Create an op node. If the tape is off or no parent needs gradients the
// result is a plain constant, truncating the graph.
Var make_op(Tensor value, std::vector<Var> parents, std::function<std::vector<Var>(const Var&)> backward) {
    bool need = false;
    if (g_recording)
        for (const auto& p : parents)
            if (p.requires_grad()) need = true;
    if (!need) return constant(std::move(value));
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    n->id = g_next_id.fetch_add(1);
    n->parents = std::move(parents);
    n->backward = std::move(backward);
    return Var(n);
}

template <typename F>
Tensor map1(const Tensor& a, F f) {
    Tensor out(a.shape());
    const double* pa = a.data();
    double* po = out.data();
    const i64 n = a.numel();
    for (i64 i = 0; i < n; ++i) po[i] = f(pa[i]);
    return out;
}

template <typename F>
Tensor map2(const Tensor& a, const Tensor& b, F f, const char* where) {
    check_same_shape(a, b, where);
    Tensor out(a.shape());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    const i64 n = a.numel();
    for (i64 i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
    return out;
}

// Elementwise mask-multiply whose mask derives from a reference tensor.
// Piecewise-linear activations (relu/leaky/abs) use it for their backward;
// the mask is locally constant so the second derivative w.r.t. the
// reference input vanishes almost everywhere.
Var mask_mul(const Var& ref, const Var& g, double pos_factor, double neg_factor) {
    check_same_shape(ref.value(), g.value(), "mask_mul");
    Tensor out(g.value().shape());
    {
        const double* pr = ref.value().data();
        const double* pg = g.value().data();
        double* po = out.data();
        const i64 n = out.numel();
        for (i64 i = 0; i < n; ++i) po[i] = pg[i] * (pr[i] > 0.0 ? pos_factor : neg_factor);
    }
    Var ref_c = detach(ref);
    return make_op(std::move(out), {ref_c, g}, [ref_c, pos_factor, neg_factor](const Var& gg) {
        return std::vector<Var>{Var(), mask_mul(ref_c, gg, pos_factor, neg_factor)};
    });
}

}  // namespace

Var add(const Var& a, const Var& b) {
    Tensor out = map2(a.value(), b.value(), [](double x, double y) { return x + y; }, "add");
    return make_op(std::move(out), {a, b}, [](const Var& g) { return std::vector<Var>{g, g}; });
}

Var sub(const Var& a, const Var& b) {
    Tensor out = map2(a.value(), b.value(), [](double x, double y) { return x - y; }, "sub");
    return make_op(std::move(out), {a, b}, [](const Var& g) { return std::vector<Var>{g, neg(g)}; });
}

Var mul(const Var& a, const Var& b) {
    Tensor out = map2(a.value(), b.value(), [](double x, double y) { return x * y; }, "mul");
    return make_op(std::move(out), {a, b}, [a, b](const Var& g) {
        return std::vector<Var>{mul(g, b), mul(g, a)};
    });
}

Var neg(const Var& a) {
    Tensor out = map1(a.value(), [](double x) { return -x; });
    return make_op(std::move(out), {a}, [](const Var& g) { return std::vector<Var>{neg(g)}; });
}

Var add_scalar(const Var& a, double s) {
    Tensor out = map1(a.value(), [s](double x) { return x + s; });
    return make_op(std::move(out), {a}, [](const Var& g) { return std::vector<Var>{g}; });
}

Var mul_scalar(const Var& a, double s) {
    Tensor out = map1(a.value(), [s](double x) { return x * s; });
    return make_op(std::move(out), {a}, [s](const Var& g) { return std::vector<Var>{mul_scalar(g, s)}; });
}

Var sigmoid(const Var& a) {
    Tensor out = map1(a.value(), [](double x) {
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    });
    // backward recomputes sigmoid(a) on the tape so higher-order
    // differentiation stays exact
    return make_op(std::move(out), {a}, [a](const Var& g) {
        Var y = sigmoid(a);
        return std::vector<Var>{mul(mul(g, y), add_scalar(neg(y), 1.0))};
    });
}

Var tanh_op(const Var& a) {
    Tensor out = map1(a.value(), [](double x) { return std::tanh(x); });
    return make_op(std::move(out), {a}, [a](const Var& g) {
        Var y = tanh_op(a);
        return std::vector<Var>{mul(g, add_scalar(neg(mul(y, y)), 1.0))};
    });
}

Var relu(const Var& a) {
    Tensor out = map1(a.value(), [](double x) { return x > 0.0 ? x : 0.0; });
    return make_op(std::move(out), {a}, [a](const Var& g) {
        return std::vector<Var>{mask_mul(a, g, 1.0, 0.0)};
    });
}

Var leaky_relu(const Var& a, double slope) {
    Tensor out = map1(a.value(), [slope](double x) { return x > 0.0 ? x : slope * x; });
    return make_op(std::move(out), {a}, [a, slope](const Var& g) {
        return std::vector<Var>{mask_mul(a, g, 1.0, slope)};
    });
}

Var softplus(const Var& a) {
    Tensor out = map1(a.value(), [](double x) {
        return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
    });
    return make_op(std::move(out), {a}, [a](const Var& g) {
        return std::vector<Var>{mul(g, sigmoid(a))};
    });
}

Var abs_op(const Var& a) {
    Tensor out = map1(a.value(), [](double x) { return std::abs(x); });
    return make_op(std::move(out), {a}, [a](const Var& g) {
        return std::vector<Var>{mask_mul(a, g, 1.0, -1.0)};
    });
}

Var square(const Var& a) { return mul(a, a); }

Var sqrt_op(const Var& a) {
    Tensor out = map1(a.value(), [](double x) { return std::sqrt(x); });
    return make_op(std::move(out), {a}, [a](const Var& g) {
        // d sqrt(x)/dx = 0.5 x^-1/2
        return std::vector<Var>{mul(g, mul_scalar(rsqrt(a, 0.0), 0.5))};
    });
}

Var rsqrt(const Var& a, double eps) {
    Tensor out = map1(a.value(), [eps](double x) { return 1.0 / std::sqrt(x + eps); });
    return make_op(std::move(out), {a}, [a, eps](const Var& g) {
        // d/dx (x+eps)^-1/2 = -0.5 (x+eps)^-3/2
        Var r = rsqrt(a, eps);
        return std::vector<Var>{mul(g, mul_scalar(mul(mul(r, r), r), -0.5))};
    });
}

Var sum_all(const Var& a) {
    double s = 0.0;
    const double* p = a.value().data();
    for (i64 i = 0; i < a.numel(); ++i) s += p[i];
    std::vector<i64> shp = a.shape();
    return make_op(Tensor::scalar(s), {a}, [shp](const Var& g) {
        return std::vector<Var>{bcast_full(g, shp)};
    });
}

static Var bcast_full(const Var& a, const std::vector<i64>& shape) {
    if (a.numel() != 1) throw dimension_error("bcast_full expects scalar");
    Tensor out = Tensor::full(shape, a.value()[0]);
    return make_op(std::move(out), {a}, [](const Var& g) {
        return std::vector<Var>{sum_all(g)};
    });
}

Var mean_all(const Var& a) { return mul_scalar(sum_all(a), 1.0 / static_cast<double>(a.numel())); }

Var mean_hw(const Var& a) {
    check4(a.value(), "mean_hw");
    const i64 n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
    Tensor out({n, c, 1, 1});
    const double* pa = a.value().data();
    double* po = out.data();
    const double inv = 1.0 / static_cast<double>(h * w);
    for (i64 i = 0; i < n * c; ++i) {
        double s = 0.0;
        const double* row = pa + i * h * w;
        for (i64 j = 0; j < h * w; ++j) s += row[j];
        po[i] = s * inv;
    }
    return make_op(std::move(out), {a}, [h, w](const Var& g) {
        return std::vector<Var>{mul_scalar(bcast_hw(g, h, w), 1.0 / static_cast<double>(h * w))};
    });
}

Var bcast_hw(const Var& a, i64 h, i64 w) {
    check4(a.value(), "bcast_hw");
    if (a.dim(2) != 1 || a.dim(3) != 1) throw dimension_error("bcast_hw expects (N,C,1,1)");
    const i64 n = a.dim(0), c = a.dim(1);
    Tensor out({n, c, h, w});
    const double* pa = a.value().data();
    double* po = out.data();
    for (i64 i = 0; i < n * c; ++i) {
        double v = pa[i];
        double* row = po + i * h * w;
        for (i64 j = 0; j < h * w; ++j) row[j] = v;
    }
    return make_op(std::move(out), {a}, [](const Var& g) {
        // adjoint: sum over spatial
        const i64 gh = g.dim(2), gw = g.dim(3);
        return std::vector<Var>{mul_scalar(mean_hw(g), static_cast<double>(gh * gw))};
    });
}

Var bcast_c(const Var& a, i64 n, i64 h, i64 w) {
    if (a.value().ndim() != 1) throw dimension_error("bcast_c expects (C)");
    const i64 c = a.dim(0);
    Tensor out({n, c, h, w});
    const double* pa = a.value().data();
    double* po = out.data();
    for (i64 in = 0; in < n; ++in)
        for (i64 ic = 0; ic < c; ++ic) {
            double v = pa[ic];
            double* row = po + (in * c + ic) * h * w;
            for (i64 j = 0; j < h * w; ++j) row[j] = v;
        }
    return make_op(std::move(out), {a}, [](const Var& g) {
        return std::vector<Var>{sum_to_c(g)};
    });
}

Var sum_to_c(const Var& a) {
    check4(a.value(), "sum_to_c");
    const i64 n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
    Tensor out({c});
    const double* pa = a.value().data();
    double* po = out.data();
    for (i64 ic = 0; ic < c; ++ic) po[ic] = 0.0;
    for (i64 in = 0; in < n; ++in)
        for (i64 ic = 0; ic < c; ++ic) {
            const double* row = pa + (in * c + ic) * h * w;
            double s = 0.0;
            for (i64 j = 0; j < h * w; ++j) s += row[j];
            po[ic] += s;
        }
    return make_op(std::move(out), {a}, [n, h, w](const Var& g) {
        return std::vector<Var>{bcast_c(g, n, h, w)};
    });
}

Var bcast_n(const Var& a, i64 c, i64 h, i64 w) {
    if (a.value().ndim() != 1) throw dimension_error("bcast_n expects (N)");
    const i64 n = a.dim(0);
    Tensor out({n, c, h, w});
    const double* pa = a.value().data();
    double* po = out.data();
    for (i64 in = 0; in < n; ++in) {
        double v = pa[in];
        double* blk = po + in * c * h * w;
        for (i64 j = 0; j < c * h * w; ++j) blk[j] = v;
    }
    return make_op(std::move(out), {a}, [](const Var& g) {
        return std::vector<Var>{sum_to_n(g)};
    });
}

Var sum_to_n(const Var& a) {
    check4(a.value(), "sum_to_n");
    const i64 n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
    Tensor out({n});
    const double* pa = a.value().data();
    double* po = out.data();
    for (i64 in = 0; in < n; ++in) {
        const double* blk = pa + in * c * h * w;
        double s = 0.0;
        for (i64 j = 0; j < c * h * w; ++j) s += blk[j];
        po[in] = s;
    }
    return make_op(std::move(out), {a}, [c, h, w](const Var& g) {
        return std::vector<Var>{bcast_n(g, c, h, w)};
    });
}

Var reshape(const Var& a, std::vector<i64> shape) {
    Tensor out = a.value().clone().reshaped(shape);
    std::vector<i64> orig = a.shape();
    return make_op(std::move(out), {a}, [orig](const Var& g) {
        return std::vector<Var>{reshape(g, orig)};
    });
}

Var concat_c(const std::vector<Var>& xs) {
    if (xs.empty()) throw dimension_error("concat_c: empty input");
    const i64 n = xs[0].dim(0), h = xs[0].dim(2), w = xs[0].dim(3);
    i64 ctot = 0;
    for (const auto& x : xs) {
        check4(x.value(), "concat_c");
        if (x.dim(0) != n || x.dim(2) != h || x.dim(3) != w)
            throw dimension_error("concat_c: incompatible shapes");
        ctot += x.dim(1);
    }
    Tensor out({n, ctot, h, w});
    double* po = out.data();
    i64 coff = 0;
    for (const auto& x : xs) {
        const i64 c = x.dim(1);
        const double* px = x.value().data();
        for (i64 in = 0; in < n; ++in)
            std::copy(px + in * c * h * w, px + (in + 1) * c * h * w,
                      po + (in * ctot + coff) * h * w);
        coff += c;
    }
    std::vector<i64> sizes;
    for (const auto& x : xs) sizes.push_back(x.dim(1));
    return make_op(std::move(out), xs, [sizes](const Var& g) {
        std::vector<Var> gs;
        i64 c0 = 0;
        for (i64 c : sizes) {
            gs.push_back(slice_c(g, c0, c0 + c));
            c0 += c;
        }
        return gs;
    });
}

Var slice_c(const Var& a, i64 c0, i64 c1) {
    check4(a.value(), "slice_c");
    const i64 n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
    if (c0 < 0 || c1 > c || c0 >= c1) throw dimension_error("slice_c: bad channel range");
    Tensor out({n, c1 - c0, h, w});
    const double* pa = a.value().data();
    double* po = out.data();
    for (i64 in = 0; in < n; ++in)
        std::copy(pa + (in * c + c0) * h * w, pa + (in * c + c1) * h * w,
                  po + in * (c1 - c0) * h * w);
    return make_op(std::move(out), {a}, [c0, c](const Var& g) {
        return std::vector<Var>{embed_c(g, c0, c)};
    });
}

Var embed_c(const Var& a, i64 c0, i64 c_total) {
    check4(a.value(), "embed_c");
    const i64 n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
    if (c0 < 0 || c0 + c > c_total) throw dimension_error("embed_c: bad channel range");
    Tensor out({n, c_total, h, w});
    const double* pa = a.value().data();
    double* po = out.data();
    for (i64 in = 0; in < n; ++in)
        std::copy(pa + in * c * h * w, pa + (in + 1) * c * h * w,
                  po + (in * c_total + c0) * h * w);
    return make_op(std::move(out), {a}, [c0, c](const Var& g) {
        return std::vector<Var>{slice_c(g, c0, c0 + c)};
    });
}

// --- matrix products -----------------------------------------------------

namespace {

void dgemm(bool ta, bool tb, i64 m, i64 n, i64 k, const double* a, i64 lda, const double* b,
           i64 ldb, double* c, i64 ldc) {
    cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
                static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), 1.0, a,
                static_cast<int>(lda), b, static_cast<int>(ldb), 0.0, c, static_cast<int>(ldc));
}

void check2(const Tensor& t, const char* where) {
    if (t.ndim() != 2) throw dimension_error(std::string(where) + ": expected 2-D tensor");
}

}  // namespace

Var matmul_nn(const Var& a, const Var& b) {
    check2(a.value(), "matmul_nn");
    check2(b.value(), "matmul_nn");
    const i64 m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) throw dimension_error("matmul_nn: inner dims differ");
    Tensor out({m, n});
    dgemm(false, false, m, n, k, a.value().data(), k, b.value().data(), n, out.data(), n);
    return make_op(std::move(out), {a, b}, [a, b](const Var& g) {
        return std::vector<Var>{matmul_nt(g, b), matmul_tn(a, g)};
    });
}

Var matmul_nt(const Var& a, const Var& b) {
    check2(a.value(), "matmul_nt");
    check2(b.value(), "matmul_nt");
    const i64 m = a.dim(0), k = a.dim(1), n = b.dim(0);
    if (b.dim(1) != k) throw dimension_error("matmul_nt: inner dims differ");
    Tensor out({m, n});
    dgemm(false, true, m, n, k, a.value().data(), k, b.value().data(), k, out.data(), n);
    return make_op(std::move(out), {a, b}, [a, b](const Var& g) {
        return std::vector<Var>{matmul_nn(g, b), matmul_tn(g, a)};
    });
}

Var matmul_tn(const Var& a, const Var& b) {
    check2(a.value(), "matmul_tn");
    check2(b.value(), "matmul_tn");
    const i64 k = a.dim(0), m = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) throw dimension_error("matmul_tn: inner dims differ");
    Tensor out({m, n});
    dgemm(true, false, m, n, k, a.value().data(), m, b.value().data(), n, out.data(), n);
    return make_op(std::move(out), {a, b}, [a, b](const Var& g) {
        return std::vector<Var>{matmul_nt(b, g), matmul_nn(a, g)};
    });
}

// --- convolution ---------------------------------------------------------

namespace {

struct ConvDims {
    i64 n, cin, h, w, cout, kh, kw, ho, wo;
    int stride, pad;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, int stride, int pad) {
    check4(x, "conv2d");
    check4(w, "conv2d weight");
    ConvDims d;
    d.n = x.dim(0);
    d.cin = x.dim(1);
    d.h = x.dim(2);
    d.w = x.dim(3);
    d.cout = w.dim(0);
    d.kh = w.dim(2);
    d.kw = w.dim(3);
    d.stride = stride;
    d.pad = pad;
    if (w.dim(1) != d.cin)
        throw dimension_error("conv2d: weight expects " + std::to_string(w.dim(1)) +
                              " input channels, got " + std::to_string(d.cin));
    d.ho = (d.h + 2 * pad - d.kh) / stride + 1;
    d.wo = (d.w + 2 * pad - d.kw) / stride + 1;
    if (d.ho < 1 || d.wo < 1) throw dimension_error("conv2d: output would be empty");
    return d;
}

// col: (cin*kh*kw) x (ho*wo)
void im2col(const double* x, const ConvDims& d, double* col) {
    const i64 hw = d.ho * d.wo;
    for (i64 c = 0; c < d.cin; ++c)
        for (i64 ki = 0; ki < d.kh; ++ki)
            for (i64 kj = 0; kj < d.kw; ++kj) {
                double* dst = col + ((c * d.kh + ki) * d.kw + kj) * hw;
                for (i64 oi = 0; oi < d.ho; ++oi) {
                    const i64 ii = oi * d.stride + ki - d.pad;
                    if (ii < 0 || ii >= d.h) {
                        std::fill(dst + oi * d.wo, dst + (oi + 1) * d.wo, 0.0);
                        continue;
                    }
                    const double* src = x + (c * d.h + ii) * d.w;
                    for (i64 oj = 0; oj < d.wo; ++oj) {
                        const i64 jj = oj * d.stride + kj - d.pad;
                        dst[oi * d.wo + oj] = (jj < 0 || jj >= d.w) ? 0.0 : src[jj];
                    }
                }
            }
}

// adjoint of im2col (scatter-add)
void col2im(const double* col, const ConvDims& d, double* x) {
    std::fill(x, x + d.cin * d.h * d.w, 0.0);
    for (i64 c = 0; c < d.cin; ++c)
        for (i64 ki = 0; ki < d.kh; ++ki)
            for (i64 kj = 0; kj < d.kw; ++kj) {
                const double* src = col + ((c * d.kh + ki) * d.kw + kj) * d.ho * d.wo;
                for (i64 oi = 0; oi < d.ho; ++oi) {
                    const i64 ii = oi * d.stride + ki - d.pad;
                    if (ii < 0 || ii >= d.h) continue;
                    double* dst = x + (c * d.h + ii) * d.w;
                    for (i64 oj = 0; oj < d.wo; ++oj) {
                        const i64 jj = oj * d.stride + kj - d.pad;
                        if (jj >= 0 && jj < d.w) dst[jj] += src[oi * d.wo + oj];
                    }
                }
            }
}

}  // namespace

Var conv2d_raw(const Var& x, const Var& w, int stride, int pad) {
    ConvDims d = conv_dims(x.value(), w.value(), stride, pad);
    Tensor out({d.n, d.cout, d.ho, d.wo});
    const i64 ck = d.cin * d.kh * d.kw;
    const i64 hw = d.ho * d.wo;
    std::vector<double> col(static_cast<size_t>(ck * hw));
    for (i64 in = 0; in < d.n; ++in) {
        im2col(x.value().data() + in * d.cin * d.h * d.w, d, col.data());
        dgemm(false, false, d.cout, hw, ck, w.value().data(), ck, col.data(), hw,
              out.data() + in * d.cout * hw, hw);
    }
    const i64 xh = d.h, xw = d.w, kh = d.kh, kw = d.kw;
    return make_op(std::move(out), {x, w}, [x, w, stride, pad, xh, xw, kh, kw](const Var& g) {
        return std::vector<Var>{conv_transpose2d_raw(g, w, stride, pad, xh, xw),
                                conv2d_wgrad(x, g, stride, pad, kh, kw)};
    });
}

Var conv_transpose2d_raw(const Var& z, const Var& w, int stride, int pad, i64 out_h, i64 out_w) {
    check4(z.value(), "conv_transpose2d");
    check4(w.value(), "conv_transpose2d weight");
    // The op is the adjoint of conv2d_raw(x, w) where x has spatial size
    // (out_h, out_w); z lives in that conv's output space.
    ConvDims d;
    d.n = z.dim(0);
    d.cout = w.value().dim(0);
    d.cin = w.value().dim(1);
    d.kh = w.value().dim(2);
    d.kw = w.value().dim(3);
    d.h = out_h;
    d.w = out_w;
    d.stride = stride;
    d.pad = pad;
    d.ho = (d.h + 2 * pad - d.kh) / stride + 1;
    d.wo = (d.w + 2 * pad - d.kw) / stride + 1;
    if (z.dim(1) != d.cout || z.dim(2) != d.ho || z.dim(3) != d.wo)
        throw dimension_error("conv_transpose2d: input " + z.value().shape_str() +
                              " inconsistent with requested output " + std::to_string(out_h) +
                              "x" + std::to_string(out_w));
    Tensor out({d.n, d.cin, d.h, d.w});
    const i64 ck = d.cin * d.kh * d.kw;
    const i64 hw = d.ho * d.wo;
    std::vector<double> col(static_cast<size_t>(ck * hw));
    for (i64 in = 0; in < d.n; ++in) {
        // col = W^T (ck x cout) * z_n (cout x hw)
        dgemm(true, false, ck, hw, d.cout, w.value().data(), ck,
              z.value().data() + in * d.cout * hw, hw, col.data(), hw);
        col2im(col.data(), d, out.data() + in * d.cin * d.h * d.w);
    }
    return make_op(std::move(out), {z, w}, [z, w, stride, pad](const Var& g) {
        // y = A_w^T z  =>  dz = A_w g, dw = wgrad(x=g, dy=z)
        return std::vector<Var>{conv2d_raw(g, w, stride, pad),
                                conv2d_wgrad(g, z, stride, pad, w.value().dim(2), w.value().dim(3))};
    });
}

Var conv2d_wgrad(const Var& x, const Var& dy, int stride, int pad, i64 kh, i64 kw) {
    check4(x.value(), "conv2d_wgrad");
    check4(dy.value(), "conv2d_wgrad");
    ConvDims d;
    d.n = x.dim(0);
    d.cin = x.dim(1);
    d.h = x.dim(2);
    d.w = x.dim(3);
    d.cout = dy.dim(1);
    d.kh = kh;
    d.kw = kw;
    d.stride = stride;
    d.pad = pad;
    d.ho = dy.dim(2);
    d.wo = dy.dim(3);
    if (dy.dim(0) != d.n) throw dimension_error("conv2d_wgrad: batch mismatch");
    Tensor out({d.cout, d.cin, kh, kw});
    out.fill(0.0);
    const i64 ck = d.cin * kh * kw;
    const i64 hw = d.ho * d.wo;
    std::vector<double> col(static_cast<size_t>(ck * hw));
    std::vector<double> acc(static_cast<size_t>(d.cout * ck));
    for (i64 in = 0; in < d.n; ++in) {
        im2col(x.value().data() + in * d.cin * d.h * d.w, d, col.data());
        // acc = dy_n (cout x hw) * col^T (hw x ck)
        dgemm(false, true, d.cout, ck, hw, dy.value().data() + in * d.cout * hw, hw, col.data(),
              hw, acc.data(), ck);
        double* po = out.data();
        for (i64 i = 0; i < d.cout * ck; ++i) po[i] += acc[i];
    }
    const i64 xh = d.h, xw = d.w;
    return make_op(std::move(out), {x, dy}, [x, dy, stride, pad, xh, xw](const Var& g) {
        // bilinear: <g, wgrad(x,dy)> = <conv(x,g), dy> = <x, tconv(dy,g)>
        return std::vector<Var>{conv_transpose2d_raw(dy, g, stride, pad, xh, xw),
                                conv2d_raw(x, g, stride, pad)};
    });
}

// --- backward ------------------------------------------------------------

std::vector<Var> grad(const Var& root, const std::vector<Var>& inputs, bool create_graph) {
    if (!root.defined() || !root.requires_grad())
        throw dimension_error("grad: root does not require gradients");

    // Collect reachable grad-requiring nodes, iteratively.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<Node*> stack{root.node().get()};
    seen.insert(root.node().get());
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (const auto& p : n->parents) {
            if (!p.defined() || !p.requires_grad()) continue;
            Node* pn = p.node().get();
            if (seen.insert(pn).second) stack.push_back(pn);
        }
    }
    std::sort(order.begin(), order.end(), [](Node* a, Node* b) { return a->id > b->id; });

    std::unique_ptr<NoGradGuard> guard;
    if (!create_graph) guard = std::make_unique<NoGradGuard>();

    root.node()->grad = constant(Tensor::full(root.shape(), 1.0));
    if (create_graph) root.node()->grad = leaf(Tensor::full(root.shape(), 1.0), false);

    for (Node* n : order) {
        if (!n->grad.defined() || !n->backward) continue;
        std::vector<Var> pgs = n->backward(n->grad);
        if (pgs.size() != n->parents.size())
            throw error("internal: backward returned wrong arity");
        for (size_t i = 0; i < pgs.size(); ++i) {
            const Var& p = n->parents[i];
            if (!p.defined() || !p.requires_grad() || !pgs[i].defined()) continue;
            Node* pn = p.node().get();
            if (!pn->grad.defined())
                pn->grad = pgs[i];
            else
                pn->grad = add(pn->grad, pgs[i]);
        }
    }

    std::vector<Var> result;
    result.reserve(inputs.size());
    for (const auto& in : inputs) {
        if (in.defined() && in.node()->grad.defined())
            result.push_back(in.node()->grad);
        else
            result.push_back(constant(Tensor(in.shape())));
    }
    // Clear transient accumulators (they can otherwise form ownership cycles
    // through the freshly built grad graph).
    for (Node* n : order) n->grad = Var();
    return result;
}

}  // namespace coogan::ad
