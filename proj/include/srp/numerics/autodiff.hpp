// SPDX-License-Identifier: Apache-2.0
//
// srpsim: subband-to-RB precoder upsampling simulator
// Copyright (C) 2026 The srpsim authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include "../errors.hpp"
#include "tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace srp::nn
{

class Tape;

// Handle to a node recorded on a Tape.
class Var
{
public:
    Var() = default;

    const Tensor &value() const;
    const Shape &shape() const { return value().shape(); }
    std::size_t id() const noexcept { return id_; }
    Tape *tape() const noexcept { return tape_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape *tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape *tape_ = nullptr;
    std::size_t id_ = 0;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so the node list is already
// topologically sorted. With record=false only values are kept and backward() is unavailable.
class Tape
{
public:
    using BackwardFn = std::function<void(Tape &, std::size_t self)>;

    explicit Tape(bool record = true) : record_(record) {}
    Tape(const Tape &) = delete;
    Tape &operator=(const Tape &) = delete;

    bool recording() const noexcept { return record_; }
    std::size_t size() const noexcept { return nodes_.size(); }

    Var constant(Tensor value) { return push("constant", std::move(value), {}, nullptr); }

    Var parameter(std::string name, Tensor value)
    {
        Node n;
        n.op = "parameter";
        n.name = std::move(name);
        n.value = std::move(value);
        n.needs_grad = record_;
        n.is_param = true;
        nodes_.push_back(std::move(n));
        return Var(this, nodes_.size() - 1);
    }

    // Registers every entry of a ParamList, in order.
    std::vector<Var> parameters(const ParamList &params)
    {
        std::vector<Var> out;
        out.reserve(params.size());
        for (const auto &p : params)
            out.push_back(parameter(p.name, p.value));
        return out;
    }

    // Appends the output of a primitive. Inputs must belong to this tape.
    Var push(std::string op, Tensor value, const std::vector<Var> &inputs, BackwardFn fn,
             bool differentiable = true)
    {
        Node n;
        n.op = std::move(op);
        n.value = std::move(value);
        n.differentiable = differentiable;
        for (const auto &v : inputs)
        {
            if (v.tape() != this)
                throw std::invalid_argument(n.op + ": input recorded on a different tape");
            n.inputs.push_back(v.id());
            n.needs_grad = n.needs_grad || nodes_[v.id()].needs_grad;
        }
        if (record_ && n.needs_grad)
            n.backward = std::move(fn);
        nodes_.push_back(std::move(n));
        return Var(this, nodes_.size() - 1);
    }

    const Tensor &value(std::size_t id) const { return nodes_.at(id).value; }
    const std::vector<std::size_t> &inputs(std::size_t id) const { return nodes_.at(id).inputs; }
    bool needs_grad(std::size_t id) const { return nodes_.at(id).needs_grad; }

    const Tensor &grad(std::size_t id) const { return nodes_.at(id).grad; }
    const Tensor &grad(Var v) const { return grad(v.id()); }

    // Gradient accumulator of a node, zero-initialized on first access.
    Tensor &grad_acc(std::size_t id)
    {
        auto &n = nodes_.at(id);
        if (n.grad.empty())
            n.grad = Tensor(n.value.shape(), 0.0);
        return n.grad;
    }

    void backward(Var loss)
    {
        if (!record_)
            throw std::logic_error("backward: tape was created with record=false");
        if (nodes_.empty())
            throw std::logic_error("backward: empty tape");
        if (loss.tape() != this)
            throw std::invalid_argument("backward: loss recorded on a different tape");
        if (loss.value().size() != 1)
            throw ShapeError("backward (loss must be scalar)", {1}, loss.shape());
        for (auto &n : nodes_)
            n.grad = Tensor();
        grad_acc(loss.id())[0] = 1.0;
        for (std::size_t i = loss.id() + 1; i-- > 0;)
        {
            auto &n = nodes_[i];
            if (n.needs_grad && n.backward && !n.grad.empty())
                n.backward(*this, i);
        }
    }

    // Gradients of all registered parameters, in registration order. Unreached parameters get zeros.
    ParamList gradients() const
    {
        ParamList out;
        for (const auto &n : nodes_)
            if (n.is_param)
                out.add(n.name, n.grad.empty() ? Tensor(n.value.shape(), 0.0) : n.grad);
        return out;
    }

    std::vector<std::string> nondifferentiable_ops() const
    {
        std::vector<std::string> out;
        for (const auto &n : nodes_)
            if (!n.differentiable)
                out.push_back(n.op);
        return out;
    }

    // Concatenated on/off pattern of every piecewise-linear unit evaluated so far. Two evaluations
    // with equal signatures lie on the same linear piece.
    const std::vector<std::uint8_t> &activation_signature() const noexcept { return signature_; }
    void append_signature(std::uint8_t bit) { signature_.push_back(bit); }

private:
    struct Node
    {
        std::string op;
        std::string name;
        Tensor value;
        Tensor grad;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        bool needs_grad = false;
        bool differentiable = true;
        bool is_param = false;
    };

    std::vector<Node> nodes_;
    std::vector<std::uint8_t> signature_;
    bool record_;
};

inline const Tensor &Var::value() const { return tape_->value(id_); }

namespace detail
{

inline void require_same_shape(const char *op, const Var &a, const Var &b)
{
    if (a.shape() != b.shape())
        throw ShapeError(op, a.shape(), b.shape());
}

inline void require_rank(const char *op, const Var &a, std::size_t rank)
{
    if (a.shape().size() != rank)
        throw ShapeError(std::string(op) + " (rank " + std::to_string(rank) + " input)",
                         Shape(rank, 0), a.shape());
}

inline void require_complex(const char *op, const Var &a)
{
    if (a.shape().size() < 2 || a.shape()[0] != 2)
    {
        Shape expected = a.shape();
        if (expected.empty())
            expected.push_back(2);
        else
            expected[0] = 2;
        throw ShapeError(std::string(op) + " (leading re/im axis)", expected, a.shape());
    }
}

} // namespace detail

// ---- elementwise ----------------------------------------------------------------------------

inline Var add(Var a, Var b)
{
    detail::require_same_shape("add", a, b);
    Tensor y = a.value();
    const auto &bv = b.value();
    for (std::size_t i = 0; i < y.size(); ++i)
        y[i] += bv[i];
    const auto ia = a.id(), ib = b.id();
    return a.tape()->push("add", std::move(y), {a, b}, [ia, ib](Tape &t, std::size_t self) {
        const auto &g = t.grad(self);
        for (auto id : {ia, ib})
            if (t.needs_grad(id))
            {
                auto &ga = t.grad_acc(id);
                for (std::size_t i = 0; i < g.size(); ++i)
                    ga[i] += g[i];
            }
    });
}

inline Var sub(Var a, Var b)
{
    detail::require_same_shape("sub", a, b);
    Tensor y = a.value();
    const auto &bv = b.value();
    for (std::size_t i = 0; i < y.size(); ++i)
        y[i] -= bv[i];
    const auto ia = a.id(), ib = b.id();
    return a.tape()->push("sub", std::move(y), {a, b}, [ia, ib](Tape &t, std::size_t self) {
        const auto &g = t.grad(self);
        if (t.needs_grad(ia))
        {
            auto &ga = t.grad_acc(ia);
            for (std::size_t i = 0; i < g.size(); ++i)
                ga[i] += g[i];
        }
        if (t.needs_grad(ib))
        {
            auto &gb = t.grad_acc(ib);
            for (std::size_t i = 0; i < g.size(); ++i)
                gb[i] -= g[i];
        }
    });
}

inline Var mul(Var a, Var b)
{
    detail::require_same_shape("mul", a, b);
    Tensor y = a.value();
    const auto &bv = b.value();
    for (std::size_t i = 0; i < y.size(); ++i)
        y[i] *= bv[i];
    const auto ia = a.id(), ib = b.id();
    return a.tape()->push("mul", std::move(y), {a, b}, [ia, ib](Tape &t, std::size_t self) {
        const auto &g = t.grad(self);
        const auto &av = t.value(ia);
        const auto &bv = t.value(ib);
        if (t.needs_grad(ia))
        {
            auto &ga = t.grad_acc(ia);
            for (std::size_t i = 0; i < g.size(); ++i)
                ga[i] += g[i] * bv[i];
        }
        if (t.needs_grad(ib))
        {
            auto &gb = t.grad_acc(ib);
            for (std::size_t i = 0; i < g.size(); ++i)
                gb[i] += g[i] * av[i];
        }
    });
}

inline Var scale(Var a, double c)
{
    Tensor y = a.value();
    for (auto &v : y.data())
        v *= c;
    const auto ia = a.id();
    return a.tape()->push("scale", std::move(y), {a}, [ia, c](Tape &t, std::size_t self) {
        const auto &g = t.grad(self);
        auto &ga = t.grad_acc(ia);
        for (std::size_t i = 0; i < g.size(); ++i)
            ga[i] += c * g[i];
    });
}

// a * s for a one-element tensor s.
inline Var mul_scalar(Var a, Var s)
{
    if (s.value().size() != 1)
        throw ShapeError("mul_scalar", {1}, s.shape());
    const double sv = s.value()[0];
    Tensor y = a.value();
    for (auto &v : y.data())
        v *= sv;
    const auto ia = a.id(), is = s.id();
    return a.tape()->push("mul_scalar", std::move(y), {a, s}, [ia, is](Tape &t, std::size_t self) {
        const auto &g = t.grad(self);
        const auto &av = t.value(ia);
        const double sv = t.value(is)[0];
        if (t.needs_grad(ia))
        {
            auto &ga = t.grad_acc(ia);
            for (std::size_t i = 0; i < g.size(); ++i)
                ga[i] += g[i] * sv;
        }
        if (t.needs_grad(is))
        {
            double acc = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i)
                acc += g[i] * av[i];
            t.grad_acc(is)[0] += acc;
        }
    });
}

inline Var relu(Var a)
{
    Tensor y = a.value();
    auto *tape = a.tape();
    for (auto &v : y.data())
    {
        const bool on = v > 0.0;
        tape->append_signature(on ? 1 : 0);
        if (!on)
            v = 0.0;
    }
    const auto ia = a.id();
    return tape->push("relu", std::move(y), {a}, [ia](Tape &t, std::size_t self) {
        const auto &g = t.grad(self);
        const auto &av = t.value(ia);
        auto &ga = t.grad_acc(ia);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (av[i] > 0.0)
                ga[i] += g[i];
    });
}

inline double sigmoid_scalar(double x)
{
    if (x >= 0.0)
        return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline Var sigmoid(Var a)
{
    Tensor y = a.value();
    for (auto &v : y.data())
        v = sigmoid_scalar(v);
    const auto ia = a.id();
    return a.tape()->push("sigmoid", std::move(y), {a}, [ia](Tape &t, std::size_t self) {
        const auto &g = t.grad(self);
        const auto &yv = t.value(self);
        auto &ga = t.grad_acc(ia);
        for (std::size_t i = 0; i < g.size(); ++i)
            ga[i] += g[i] * yv[i] * (1.0 - yv[i]);
    });
}

// Round to nearest integer. Has no useful derivative; the tape marks it non-differentiable and
// propagates zero gradient.
inline Var round_nd(Var a)
{
    Tensor y = a.value();
    for (auto &v : y.data())
        v = std::round(v);
    return a.tape()->push("round", std::move(y), {a}, nullptr, false);
}

inline Var reshape(Var a, Shape shape)
{
    Tensor y = a.value().reshaped(std::move(shape));
    const auto ia = a.id();
    return a.tape()->push("reshape", std::move(y), {a}, [ia](Tape &t, std::size_t self) {
        const auto &g = t.grad(self);
        auto &ga = t.grad_acc(ia);
        for (std::size_t i = 0; i < g.size(); ++i)
            ga[i] += g[i];
    });
}

// ---- reductions -----------------------------------------------------------------------------

inline Var sum(Var a)
{
    double s = 0.0;
    for (double v : a.value().data())
        s += v;
    const auto ia = a.id();
    return a.tape()->push("sum", Tensor::scalar(s), {a}, [ia](Tape &t, std::size_t self) {
        const double g = t.grad(self)[0];
        for (auto &v : t.grad_acc(ia).data())
            v += g;
    });
}

inline Var mean(Var a)
{
    const double n = static_cast<double>(a.value().size());
    double s = 0.0;
    for (double v : a.value().data())
        s += v;
    const auto ia = a.id();
    return a.tape()->push("mean", Tensor::scalar(s / n), {a}, [ia, n](Tape &t, std::size_t self) {
        const double g = t.grad(self)[0] / n;
        for (auto &v : t.grad_acc(ia).data())
            v += g;
    });
}

// ---- layers ---------------------------------------------------------------------------------

// Affine map y = W x + b. x is [in] or [batch, in]; W is [out, in]; b is [out].
inline Var dense(Var x, Var w, Var b)
{
    detail::require_rank("dense weight", w, 2);
    const std::size_t out = w.shape()[0], in = w.shape()[1];
    if (b.shape() != Shape{out})
        throw ShapeError("dense bias", {out}, b.shape());
    const auto &xs = x.shape();
    std::size_t batch = 0;
    if (xs.size() == 1 && xs[0] == in)
        batch = 1;
    else if (xs.size() == 2 && xs[1] == in)
        batch = xs[0];
    else
        throw ShapeError("dense input", {in}, xs);

    Tensor y(xs.size() == 1 ? Shape{out} : Shape{batch, out});
    const auto &xv = x.value();
    const auto &wv = w.value();
    const auto &bv = b.value();
    for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t o = 0; o < out; ++o)
        {
            double acc = bv[o];
            for (std::size_t i = 0; i < in; ++i)
                acc += wv[o * in + i] * xv[n * in + i];
            y[n * out + o] = acc;
        }
    const auto ix = x.id(), iw = w.id(), ib = b.id();
    return x.tape()->push("dense", std::move(y), {x, w, b},
                          [ix, iw, ib, batch, in, out](Tape &t, std::size_t self) {
                              const auto &g = t.grad(self);
                              const auto &xv = t.value(ix);
                              const auto &wv = t.value(iw);
                              if (t.needs_grad(ix))
                              {
                                  auto &gx = t.grad_acc(ix);
                                  for (std::size_t n = 0; n < batch; ++n)
                                      for (std::size_t o = 0; o < out; ++o)
                                          for (std::size_t i = 0; i < in; ++i)
                                              gx[n * in + i] += wv[o * in + i] * g[n * out + o];
                              }
                              if (t.needs_grad(iw))
                              {
                                  auto &gw = t.grad_acc(iw);
                                  for (std::size_t n = 0; n < batch; ++n)
                                      for (std::size_t o = 0; o < out; ++o)
                                          for (std::size_t i = 0; i < in; ++i)
                                              gw[o * in + i] += g[n * out + o] * xv[n * in + i];
                              }
                              if (t.needs_grad(ib))
                              {
                                  auto &gb = t.grad_acc(ib);
                                  for (std::size_t n = 0; n < batch; ++n)
                                      for (std::size_t o = 0; o < out; ++o)
                                          gb[o] += g[n * out + o];
                              }
                          });
}

// 1-D convolution (cross-correlation) along the last axis with zero "same" padding.
// x: [C_in, N], w: [C_out, C_in, K] with K odd, b: [C_out].
inline Var conv1d(Var x, Var w, Var b)
{
    detail::require_rank("conv1d input", x, 2);
    detail::require_rank("conv1d weight", w, 3);
    const std::size_t cin = x.shape()[0], n = x.shape()[1];
    const std::size_t cout = w.shape()[0], k = w.shape()[2];
    if (w.shape()[1] != cin)
        throw ShapeError("conv1d weight", {cout, cin, k}, w.shape());
    if (k % 2 == 0)
        throw ShapeError("conv1d weight (odd kernel)", {cout, cin, k + 1}, w.shape());
    if (b.shape() != Shape{cout})
        throw ShapeError("conv1d bias", {cout}, b.shape());
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(k / 2);
    const std::ptrdiff_t len = static_cast<std::ptrdiff_t>(n);

    Tensor y({cout, n});
    const double *xv = x.value().data().data();
    const double *wv = w.value().data().data();
    const double *bv = b.value().data().data();
    double *yv = y.data().data();
    for (std::size_t o = 0; o < cout; ++o)
    {
        double *yo = yv + o * n;
        std::fill(yo, yo + n, bv[o]);
        for (std::size_t c = 0; c < cin; ++c)
        {
            const double *xc = xv + c * n;
            for (std::size_t kk = 0; kk < k; ++kk)
            {
                const double wgt = wv[(o * cin + c) * k + kk];
                const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kk) - half;
                const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
                const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(len, len - shift);
                for (std::ptrdiff_t i = lo; i < hi; ++i)
                    yo[i] += wgt * xc[i + shift];
            }
        }
    }
    const auto ix = x.id(), iw = w.id(), ib = b.id();
    return x.tape()->push(
        "conv1d", std::move(y), {x, w, b}, [ix, iw, ib, cin, cout, n, k, half, len](Tape &t, std::size_t self) {
            const double *g = t.grad(self).data().data();
            const double *xv = t.value(ix).data().data();
            const double *wv = t.value(iw).data().data();
            double *gx = t.needs_grad(ix) ? t.grad_acc(ix).data().data() : nullptr;
            double *gw = t.needs_grad(iw) ? t.grad_acc(iw).data().data() : nullptr;
            for (std::size_t o = 0; o < cout; ++o)
            {
                const double *go = g + o * n;
                for (std::size_t c = 0; c < cin; ++c)
                {
                    const double *xc = xv + c * n;
                    for (std::size_t kk = 0; kk < k; ++kk)
                    {
                        const std::size_t widx = (o * cin + c) * k + kk;
                        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kk) - half;
                        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
                        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(len, len - shift);
                        if (gx)
                        {
                            const double wgt = wv[widx];
                            double *gxc = gx + c * n;
                            for (std::ptrdiff_t i = lo; i < hi; ++i)
                                gxc[i + shift] += wgt * go[i];
                        }
                        if (gw)
                        {
                            double acc = 0.0;
                            for (std::ptrdiff_t i = lo; i < hi; ++i)
                                acc += go[i] * xc[i + shift];
                            gw[widx] += acc;
                        }
                    }
                }
            }
            if (t.needs_grad(ib))
            {
                auto &gb = t.grad_acc(ib);
                for (std::size_t o = 0; o < cout; ++o)
                    for (std::size_t i = 0; i < n; ++i)
                        gb[o] += g[o * n + i];
            }
        });
}

// 2-D convolution (cross-correlation) with zero "same" padding.
// x: [C_in, H, W], w: [C_out, C_in, KH, KW] with odd kernel sides, b: [C_out].
inline Var conv2d(Var x, Var w, Var b)
{
    detail::require_rank("conv2d input", x, 3);
    detail::require_rank("conv2d weight", w, 4);
    const std::size_t cin = x.shape()[0], hh = x.shape()[1], ww = x.shape()[2];
    const std::size_t cout = w.shape()[0], kh = w.shape()[2], kw = w.shape()[3];
    if (w.shape()[1] != cin)
        throw ShapeError("conv2d weight", {cout, cin, kh, kw}, w.shape());
    if (kh % 2 == 0 || kw % 2 == 0)
        throw ShapeError("conv2d weight (odd kernel)", {cout, cin, kh | 1, kw | 1}, w.shape());
    if (b.shape() != Shape{cout})
        throw ShapeError("conv2d bias", {cout}, b.shape());

    struct Geometry
    {
        std::size_t cin, cout, h, w, kh, kw;
        std::ptrdiff_t ph, pw;
    };
    const Geometry geo{cin, cout, hh, ww, kh, kw, static_cast<std::ptrdiff_t>(kh / 2),
                       static_cast<std::ptrdiff_t>(kw / 2)};

    // Calls fn(out_row_offset, in_row_offset, lo, hi, shift) for every valid (o, c, kh, kw) row pairing.
    auto for_each_tap = [geo](auto &&fn) {
        const auto H = static_cast<std::ptrdiff_t>(geo.h);
        const auto W = static_cast<std::ptrdiff_t>(geo.w);
        for (std::size_t o = 0; o < geo.cout; ++o)
            for (std::size_t c = 0; c < geo.cin; ++c)
                for (std::size_t a = 0; a < geo.kh; ++a)
                {
                    const std::ptrdiff_t dr = static_cast<std::ptrdiff_t>(a) - geo.ph;
                    for (std::size_t bb = 0; bb < geo.kw; ++bb)
                    {
                        const std::size_t widx = ((o * geo.cin + c) * geo.kh + a) * geo.kw + bb;
                        const std::ptrdiff_t dc = static_cast<std::ptrdiff_t>(bb) - geo.pw;
                        const std::ptrdiff_t clo = std::max<std::ptrdiff_t>(0, -dc);
                        const std::ptrdiff_t chi = std::min<std::ptrdiff_t>(W, W - dc);
                        const std::ptrdiff_t rlo = std::max<std::ptrdiff_t>(0, -dr);
                        const std::ptrdiff_t rhi = std::min<std::ptrdiff_t>(H, H - dr);
                        for (std::ptrdiff_t r = rlo; r < rhi; ++r)
                            fn(o, c, widx, (o * geo.h + static_cast<std::size_t>(r)) * geo.w,
                               (c * geo.h + static_cast<std::size_t>(r + dr)) * geo.w, clo, chi, dc);
                    }
                }
    };

    Tensor y({cout, hh, ww});
    {
        const double *xv = x.value().data().data();
        const double *wv = w.value().data().data();
        const double *bv = b.value().data().data();
        double *yv = y.data().data();
        for (std::size_t o = 0; o < cout; ++o)
            std::fill(yv + o * hh * ww, yv + (o + 1) * hh * ww, bv[o]);
        for_each_tap([&](std::size_t, std::size_t, std::size_t widx, std::size_t yoff, std::size_t xoff,
                         std::ptrdiff_t clo, std::ptrdiff_t chi, std::ptrdiff_t dc) {
            const double wgt = wv[widx];
            double *yr = yv + yoff;
            const double *xr = xv + xoff + dc;
            for (std::ptrdiff_t i = clo; i < chi; ++i)
                yr[i] += wgt * xr[i];
        });
    }
    const auto ix = x.id(), iw = w.id(), ib = b.id();
    return x.tape()->push("conv2d", std::move(y), {x, w, b}, [ix, iw, ib, geo, for_each_tap](Tape &t, std::size_t self) {
        const double *g = t.grad(self).data().data();
        const double *xv = t.value(ix).data().data();
        const double *wv = t.value(iw).data().data();
        double *gx = t.needs_grad(ix) ? t.grad_acc(ix).data().data() : nullptr;
        double *gw = t.needs_grad(iw) ? t.grad_acc(iw).data().data() : nullptr;
        if (gx || gw)
            for_each_tap([&](std::size_t, std::size_t, std::size_t widx, std::size_t yoff, std::size_t xoff,
                             std::ptrdiff_t clo, std::ptrdiff_t chi, std::ptrdiff_t dc) {
                const double *gr = g + yoff;
                if (gx)
                {
                    const double wgt = wv[widx];
                    double *gxr = gx + xoff + dc;
                    for (std::ptrdiff_t i = clo; i < chi; ++i)
                        gxr[i] += wgt * gr[i];
                }
                if (gw)
                {
                    const double *xr = xv + xoff + dc;
                    double acc = 0.0;
                    for (std::ptrdiff_t i = clo; i < chi; ++i)
                        acc += gr[i] * xr[i];
                    gw[widx] += acc;
                }
            });
        if (t.needs_grad(ib))
        {
            auto &gb = t.grad_acc(ib);
            const std::size_t plane = geo.h * geo.w;
            for (std::size_t o = 0; o < geo.cout; ++o)
                for (std::size_t i = 0; i < plane; ++i)
                    gb[o] += g[o * plane + i];
        }
    });
}

// ---- complex-valued helpers (leading axis of size 2 holds re, im) --------------------------

// Elementwise complex product of two [2, ...] tensors.
inline Var cmul(Var a, Var b)
{
    detail::require_complex("cmul", a);
    detail::require_same_shape("cmul", a, b);
    const std::size_t half = a.value().size() / 2;
    const auto &av = a.value();
    const auto &bv = b.value();
    Tensor y(a.shape());
    for (std::size_t i = 0; i < half; ++i)
    {
        const double ar = av[i], ai = av[half + i], br = bv[i], bi = bv[half + i];
        y[i] = ar * br - ai * bi;
        y[half + i] = ar * bi + ai * br;
    }
    const auto ia = a.id(), ib = b.id();
    return a.tape()->push("cmul", std::move(y), {a, b}, [ia, ib, half](Tape &t, std::size_t self) {
        const auto &g = t.grad(self);
        const auto &av = t.value(ia);
        const auto &bv = t.value(ib);
        // d/da = g * conj(b), d/db = g * conj(a) in the (re, im) gradient convention.
        if (t.needs_grad(ia))
        {
            auto &ga = t.grad_acc(ia);
            for (std::size_t i = 0; i < half; ++i)
            {
                ga[i] += g[i] * bv[i] + g[half + i] * bv[half + i];
                ga[half + i] += g[half + i] * bv[i] - g[i] * bv[half + i];
            }
        }
        if (t.needs_grad(ib))
        {
            auto &gb = t.grad_acc(ib);
            for (std::size_t i = 0; i < half; ++i)
            {
                gb[i] += g[i] * av[i] + g[half + i] * av[half + i];
                gb[half + i] += g[half + i] * av[i] - g[i] * av[half + i];
            }
        }
    });
}

// Multiplies x by the 1-D tensor m broadcast along `axis` (m.size() == x.shape()[axis]).
inline Var scale_along(Var x, Var m, std::size_t axis)
{
    const auto &xs = x.shape();
    if (axis >= xs.size())
        throw ShapeError("scale_along (axis out of range)", Shape(axis + 1, 1), xs);
    if (m.shape() != Shape{xs[axis]})
        throw ShapeError("scale_along", {xs[axis]}, m.shape());
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i)
        outer *= xs[i];
    for (std::size_t i = axis + 1; i < xs.size(); ++i)
        inner *= xs[i];
    const std::size_t len = xs[axis];
    Tensor y = x.value();
    const auto &mv = m.value();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t k = 0; k < len; ++k)
            for (std::size_t i = 0; i < inner; ++i)
                y[(o * len + k) * inner + i] *= mv[k];
    const auto ix = x.id(), im = m.id();
    return x.tape()->push("scale_along", std::move(y), {x, m}, [ix, im, outer, len, inner](Tape &t, std::size_t self) {
        const auto &g = t.grad(self);
        const auto &xv = t.value(ix);
        const auto &mv = t.value(im);
        if (t.needs_grad(ix))
        {
            auto &gx = t.grad_acc(ix);
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t k = 0; k < len; ++k)
                    for (std::size_t i = 0; i < inner; ++i)
                    {
                        const std::size_t idx = (o * len + k) * inner + i;
                        gx[idx] += g[idx] * mv[k];
                    }
        }
        if (t.needs_grad(im))
        {
            auto &gm = t.grad_acc(im);
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t k = 0; k < len; ++k)
                    for (std::size_t i = 0; i < inner; ++i)
                    {
                        const std::size_t idx = (o * len + k) * inner + i;
                        gm[k] += g[idx] * xv[idx];
                    }
        }
    });
}

// Applies the constant complex matrix A (P x Q) along `axis` (>= 1) of a complex [2, ...] tensor
// whose extent on that axis is Q. The output has extent P there.
inline Var complex_linear(Var x, const Eigen::MatrixXcd &a, std::size_t axis)
{
    detail::require_complex("complex_linear", x);
    const auto &xs = x.shape();
    if (axis == 0 || axis >= xs.size())
        throw ShapeError("complex_linear (axis out of range)", Shape(axis + 1, 2), xs);
    const auto q = static_cast<std::size_t>(a.cols());
    const auto p = static_cast<std::size_t>(a.rows());
    if (xs[axis] != q)
    {
        Shape expected = xs;
        expected[axis] = q;
        throw ShapeError("complex_linear", expected, xs);
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 1; i < axis; ++i)
        outer *= xs[i];
    for (std::size_t i = axis + 1; i < xs.size(); ++i)
        inner *= xs[i];
    Shape ys = xs;
    ys[axis] = p;
    Tensor y(ys);
    const auto &xv = x.value();
    const std::size_t xhalf = xv.size() / 2, yhalf = y.size() / 2;
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t r = 0; r < p; ++r)
            for (std::size_t c = 0; c < q; ++c)
            {
                const double ar = a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)).real();
                const double ai = a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)).imag();
                const double *xr = &xv[(o * q + c) * inner];
                const double *xi = xr + xhalf;
                double *yr = &y[(o * p + r) * inner];
                double *yi = yr + yhalf;
                for (std::size_t i = 0; i < inner; ++i)
                {
                    yr[i] += ar * xr[i] - ai * xi[i];
                    yi[i] += ar * xi[i] + ai * xr[i];
                }
            }
    const auto ix = x.id();
    return x.tape()->push("complex_linear", std::move(y), {x},
                          [ix, a, outer, inner, p, q, xhalf, yhalf](Tape &t, std::size_t self) {
                              // grad_x = A^H grad_y
                              const auto &g = t.grad(self);
                              auto &gx = t.grad_acc(ix);
                              for (std::size_t o = 0; o < outer; ++o)
                                  for (std::size_t r = 0; r < p; ++r)
                                      for (std::size_t c = 0; c < q; ++c)
                                      {
                                          const auto e = a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
                                          const double ar = e.real(), ai = -e.imag();
                                          const double *gr = &g[(o * p + r) * inner];
                                          const double *gi = gr + yhalf;
                                          double *xr = &gx[(o * q + c) * inner];
                                          double *xi = xr + xhalf;
                                          for (std::size_t i = 0; i < inner; ++i)
                                          {
                                              xr[i] += ar * gr[i] - ai * gi[i];
                                              xi[i] += ar * gi[i] + ai * gr[i];
                                          }
                                      }
                          });
}

// Normalizes every column n of a complex [2, A, N] tensor to unit L2 norm over (re/im, A).
inline Var unit_norm_columns(Var x, double min_norm = 1e-300)
{
    detail::require_complex("unit_norm_columns", x);
    detail::require_rank("unit_norm_columns", x, 3);
    const std::size_t rows = x.shape()[1], cols = x.shape()[2];
    const std::size_t half = rows * cols;
    const auto &xv = x.value();
    std::vector<double> norms(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t n = 0; n < cols; ++n)
        {
            const double re = xv[r * cols + n], im = xv[half + r * cols + n];
            norms[n] += re * re + im * im;
        }
    for (std::size_t n = 0; n < cols; ++n)
    {
        norms[n] = std::sqrt(norms[n]);
        if (!(norms[n] > min_norm))
            throw srp::NumericalError("unit_norm_columns: column " + std::to_string(n) + " has zero norm");
    }
    Tensor y = xv;
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t n = 0; n < cols; ++n)
                y[c * half + r * cols + n] /= norms[n];
    const auto ix = x.id();
    return x.tape()->push("unit_norm_columns", std::move(y), {x},
                          [ix, rows, cols, half, norms](Tape &t, std::size_t self) {
                              // d(x/|x|) = (I - y y^T) / |x|
                              const auto &g = t.grad(self);
                              const auto &yv = t.value(self);
                              auto &gx = t.grad_acc(ix);
                              std::vector<double> dots(cols, 0.0);
                              for (std::size_t i = 0; i < 2 * half; ++i)
                                  dots[i % cols] += yv[i] * g[i];
                              for (std::size_t i = 0; i < 2 * half; ++i)
                              {
                                  const std::size_t n = i % cols;
                                  gx[i] += (g[i] - yv[i] * dots[n]) / norms[n];
                              }
                              (void)rows;
                          });
}

// Loss 1 - (1/N) sum_f |h_f^H w_f| / (|h_f| |w_f|) for precoders w as a complex [2, A, N] tensor
// (antenna x RB) and the constant channel h (N x A).
inline Var neg_gain_loss(Var w, const Eigen::MatrixXcd &h)
{
    detail::require_complex("neg_gain_loss", w);
    detail::require_rank("neg_gain_loss", w, 3);
    const std::size_t ant = w.shape()[1], nrb = w.shape()[2];
    if (static_cast<std::size_t>(h.rows()) != nrb || static_cast<std::size_t>(h.cols()) != ant)
        throw ShapeError("neg_gain_loss (channel N x A)", {nrb, ant},
                         {static_cast<std::size_t>(h.rows()), static_cast<std::size_t>(h.cols())});
    const std::size_t half = ant * nrb;
    const auto &wv = w.value();

    struct PerRb
    {
        std::complex<double> z; // h^H w
        double hn, wn;
    };
    std::vector<PerRb> per(nrb);
    double acc = 0.0;
    for (std::size_t f = 0; f < nrb; ++f)
    {
        std::complex<double> z{0.0, 0.0};
        double hn = 0.0, wn = 0.0;
        for (std::size_t a = 0; a < ant; ++a)
        {
            const std::complex<double> wa{wv[a * nrb + f], wv[half + a * nrb + f]};
            const auto ha = h(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(a));
            z += std::conj(ha) * wa;
            hn += std::norm(ha);
            wn += std::norm(wa);
        }
        hn = std::sqrt(hn);
        wn = std::sqrt(wn);
        if (!(hn > 0.0))
            throw srp::NumericalError("neg_gain_loss: zero channel row " + std::to_string(f));
        if (!(wn > 0.0))
            throw srp::NumericalError("neg_gain_loss: zero precoder row " + std::to_string(f));
        per[f] = {z, hn, wn};
        acc += std::abs(z) / (hn * wn);
    }
    const double loss = 1.0 - acc / static_cast<double>(nrb);
    const auto iw = w.id();
    return w.tape()->push("neg_gain_loss", Tensor::scalar(loss), {w},
                          [iw, h, per, ant, nrb, half](Tape &t, std::size_t self) {
                              const double g = t.grad(self)[0];
                              const auto &wv = t.value(iw);
                              auto &gw = t.grad_acc(iw);
                              const double c = -g / static_cast<double>(nrb);
                              for (std::size_t f = 0; f < nrb; ++f)
                              {
                                  const auto &pr = per[f];
                                  const double az = std::abs(pr.z);
                                  const std::complex<double> phase = az > 0.0 ? pr.z / az : std::complex<double>{0.0, 0.0};
                                  const double inv = 1.0 / (pr.hn * pr.wn);
                                  const double wterm = az / (pr.hn * pr.wn * pr.wn * pr.wn);
                                  for (std::size_t a = 0; a < ant; ++a)
                                  {
                                      const auto ha = h(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(a));
                                      const std::complex<double> wa{wv[a * nrb + f], wv[half + a * nrb + f]};
                                      const std::complex<double> grad = ha * phase * inv - wterm * wa;
                                      gw[a * nrb + f] += c * grad.real();
                                      gw[half + a * nrb + f] += c * grad.imag();
                                  }
                              }
                          });
}

} // namespace srp::nn
