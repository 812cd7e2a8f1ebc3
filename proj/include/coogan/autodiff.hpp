#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "coogan/tensor.hpp"

namespace coogan::ad {

class Node;

// Handle to a node of the computation graph. Cheap to copy.
class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> n) : n_(std::move(n)) {}

    bool defined() const { return n_ != nullptr; }
    const std::shared_ptr<Node>& node() const { return n_; }

    Tensor& value();
    const Tensor& value() const;
    bool requires_grad() const;
    const std::vector<i64>& shape() const;
    i64 dim(int i) const;
    i64 numel() const;
    double item() const;  // scalar value, throws if numel != 1

private:
    std::shared_ptr<Node> n_;
};

class Node {
public:
    Tensor value;
    bool requires_grad = false;
    i64 id = 0;
    std::vector<Var> parents;
    // Given the incoming gradient, produce gradients for each parent
    // (undefined entries for parents that need none). Backward functions are
    // built from taped ops so that grad(..., create_graph=true) yields a
    // differentiable graph.
    std::function<std::vector<Var>(const Var&)> backward;
    Var grad;  // transient accumulator used inside grad()
};

// --- tape control ------------------------------------------------------

bool recording();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// --- leaves ------------------------------------------------------------

Var leaf(Tensor value, bool requires_grad = false);
Var constant(Tensor value);
Var scalar(double v);
// Shares the value but cuts the graph.
Var detach(const Var& x);

// --- elementwise -------------------------------------------------------

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var add_scalar(const Var& a, double s);
Var mul_scalar(const Var& a, double s);
Var sigmoid(const Var& a);
Var tanh_op(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var softplus(const Var& a);  // log(1 + exp(a)), numerically stable
Var abs_op(const Var& a);
Var square(const Var& a);
Var sqrt_op(const Var& a);
Var rsqrt(const Var& a, double eps);  // (a + eps)^(-1/2)

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator-(const Var& a) { return neg(a); }

// --- reductions / broadcasts -------------------------------------------

Var sum_all(const Var& a);   // -> shape {1}
Var mean_all(const Var& a);  // -> shape {1}
// (N,C,H,W) -> (N,C,1,1), mean over spatial dims
Var mean_hw(const Var& a);
// (N,C,1,1) -> (N,C,H,W)
Var bcast_hw(const Var& a, i64 h, i64 w);
// (C) -> (N,C,H,W)
Var bcast_c(const Var& a, i64 n, i64 h, i64 w);
// (N,C,H,W) -> (C)
Var sum_to_c(const Var& a);
// (N) -> (N,C,H,W)
Var bcast_n(const Var& a, i64 c, i64 h, i64 w);
// (N,C,H,W) -> (N)
Var sum_to_n(const Var& a);

// --- structure ---------------------------------------------------------

Var reshape(const Var& a, std::vector<i64> shape);
Var concat_c(const std::vector<Var>& xs);              // along channel dim of NCHW
Var slice_c(const Var& a, i64 c0, i64 c1);             // channels [c0, c1)
Var embed_c(const Var& a, i64 c0, i64 c_total);        // zero-pad into c_total channels

// --- linear algebra ----------------------------------------------------

// 2-D matrix products; the three variants are mutually adjoint which keeps
// the tape closed under differentiation.
Var matmul_nn(const Var& a, const Var& b);  // a(m,k) * b(k,n)
Var matmul_nt(const Var& a, const Var& b);  // a(m,k) * b(n,k)^T
Var matmul_tn(const Var& a, const Var& b);  // a(k,m)^T * b(k,n)

// --- convolution (no bias; see nn.hpp wrappers) --------------------------
// x: (N,Cin,H,W), w: (Cout,Cin,kh,kw) -> (N,Cout,Ho,Wo)
Var conv2d_raw(const Var& x, const Var& w, int stride, int pad);
// Adjoint of conv2d_raw: z: (N,Cout,h,w), w: (Cout,Cin,kh,kw) -> (N,Cin,out_h,out_w)
Var conv_transpose2d_raw(const Var& z, const Var& w, int stride, int pad, i64 out_h, i64 out_w);
// Weight gradient of conv2d_raw: x: (N,Cin,H,W), dy: (N,Cout,Ho,Wo) -> (Cout,Cin,kh,kw)
Var conv2d_wgrad(const Var& x, const Var& dy, int stride, int pad, i64 kh, i64 kw);

// --- differentiation ----------------------------------------------------

// Gradients of a scalar root w.r.t. inputs. With create_graph=true the
// returned Vars are part of the tape and can be differentiated again.
std::vector<Var> grad(const Var& root, const std::vector<Var>& inputs, bool create_graph = false);

}  // namespace coogan::ad
