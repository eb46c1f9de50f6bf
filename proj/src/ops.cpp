// Copyright 2026 The f0vc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "f0vc/ops.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "f0vc/error.hpp"

namespace f0vc::ad {
namespace {

Array* grad_of(Node& n, std::size_t i) {
  Node& p = *n.parents[i];
  return p.requires_grad ? &p.grad : nullptr;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape " +
                         shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
}

void require_rank(const Tensor& a, std::size_t rank, const char* op) {
  if (a.rank() != rank)
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + ", got " +
                         shape_string(a.shape()));
}

Index ceil_div(Index a, Index b) { return (a + b - 1) / b; }

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
}

// Full linear convolution, length na + nb - 1.
std::vector<double> linear_convolve(const double* a, Index na, const double* b,
                                    Index nb) {
  const Index n_out = na + nb - 1;
  std::vector<double> out(static_cast<std::size_t>(n_out), 0.0);
  if (std::min(na, nb) <= 48) {
    for (Index i = 0; i < na; ++i) {
      const double ai = a[i];
      if (ai == 0.0) continue;
      for (Index j = 0; j < nb; ++j) out[i + j] += ai * b[j];
    }
    return out;
  }
  Index n_fft = 1;
  while (n_fft < n_out) n_fft <<= 1;
  thread_local Eigen::FFT<double> fft;
  std::vector<double> pa(n_fft, 0.0), pb(n_fft, 0.0);
  std::copy(a, a + na, pa.begin());
  std::copy(b, b + nb, pb.begin());
  std::vector<std::complex<double>> fa, fb;
  fft.fwd(fa, pa);
  fft.fwd(fb, pb);
  for (std::size_t i = 0; i < fa.size(); ++i) fa[i] *= fb[i];
  std::vector<double> full;
  fft.inv(full, fa);
  std::copy(full.begin(), full.begin() + n_out, out.begin());
  return out;
}

// cols[(c * K + k), t] = x[c, t * stride + k - pad], zero outside.
RowMatrix im2col_1d(const double* x, Index cin, Index len, Index k,
                    Index stride, Index pad, Index len_out) {
  RowMatrix cols = RowMatrix::Zero(cin * k, len_out);
  for (Index c = 0; c < cin; ++c) {
    const double* xc = x + c * len;
    for (Index kk = 0; kk < k; ++kk) {
      double* row = cols.row(c * k + kk).data();
      for (Index t = 0; t < len_out; ++t) {
        const Index src = t * stride + kk - pad;
        if (src >= 0 && src < len) row[t] = xc[src];
      }
    }
  }
  return cols;
}

void col2im_1d(const RowMatrix& cols, double* gx, Index cin, Index len,
               Index k, Index stride, Index pad, Index len_out) {
  for (Index c = 0; c < cin; ++c) {
    double* gc = gx + c * len;
    for (Index kk = 0; kk < k; ++kk) {
      const double* row = cols.row(c * k + kk).data();
      for (Index t = 0; t < len_out; ++t) {
        const Index src = t * stride + kk - pad;
        if (src >= 0 && src < len) gc[src] += row[t];
      }
    }
  }
}

struct Geometry2d {
  Index cin, h, w, kh, kw, sh, sw, ph, pw, ho, wo;
};

RowMatrix im2col_2d(const double* x, const Geometry2d& g) {
  RowMatrix cols = RowMatrix::Zero(g.cin * g.kh * g.kw, g.ho * g.wo);
  for (Index c = 0; c < g.cin; ++c) {
    for (Index a = 0; a < g.kh; ++a) {
      for (Index b = 0; b < g.kw; ++b) {
        double* row = cols.row((c * g.kh + a) * g.kw + b).data();
        for (Index i = 0; i < g.ho; ++i) {
          const Index y = i * g.sh + a - g.ph;
          if (y < 0 || y >= g.h) continue;
          const double* xr = x + (c * g.h + y) * g.w;
          double* out = row + i * g.wo;
          for (Index j = 0; j < g.wo; ++j) {
            const Index xx = j * g.sw + b - g.pw;
            if (xx >= 0 && xx < g.w) out[j] = xr[xx];
          }
        }
      }
    }
  }
  return cols;
}

void col2im_2d(const RowMatrix& cols, double* gx, const Geometry2d& g) {
  for (Index c = 0; c < g.cin; ++c) {
    for (Index a = 0; a < g.kh; ++a) {
      for (Index b = 0; b < g.kw; ++b) {
        const double* row = cols.row((c * g.kh + a) * g.kw + b).data();
        for (Index i = 0; i < g.ho; ++i) {
          const Index y = i * g.sh + a - g.ph;
          if (y < 0 || y >= g.h) continue;
          double* gr = gx + (c * g.h + y) * g.w;
          const double* in = row + i * g.wo;
          for (Index j = 0; j < g.wo; ++j) {
            const Index xx = j * g.sw + b - g.pw;
            if (xx >= 0 && xx < g.w) gr[xx] += in[j];
          }
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Element-wise

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  return make_result(a.value() + b.value(), a.shape(), {a, b}, [](Node& n) {
    if (Array* g = grad_of(n, 0)) *g += n.grad;
    if (Array* g = grad_of(n, 1)) *g += n.grad;
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  return make_result(a.value() - b.value(), a.shape(), {a, b}, [](Node& n) {
    if (Array* g = grad_of(n, 0)) *g += n.grad;
    if (Array* g = grad_of(n, 1)) *g -= n.grad;
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  return make_result(a.value() * b.value(), a.shape(), {a, b}, [](Node& n) {
    const Array& av = n.parents[0]->value;
    const Array& bv = n.parents[1]->value;
    if (Array* g = grad_of(n, 0)) *g += n.grad * bv;
    if (Array* g = grad_of(n, 1)) *g += n.grad * av;
  });
}

Tensor scale(const Tensor& a, double factor) {
  return make_result(a.value() * factor, a.shape(), {a}, [factor](Node& n) {
    if (Array* g = grad_of(n, 0)) *g += n.grad * factor;
  });
}

Tensor add_scalar(const Tensor& a, double offset) {
  return make_result(a.value() + offset, a.shape(), {a}, [](Node& n) {
    if (Array* g = grad_of(n, 0)) *g += n.grad;
  });
}

Tensor mul_const(const Tensor& a, const Array& factors) {
  if (factors.size() != a.size())
    throw DimensionError("mul_const: factor count mismatch");
  return make_result(a.value() * factors, a.shape(), {a},
                     [factors](Node& n) {
                       if (Array* g = grad_of(n, 0)) *g += n.grad * factors;
                     });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor exp(const Tensor& a) {
  Array v = a.value().exp();
  return make_result(v, a.shape(), {a}, [](Node& n) {
    if (Array* g = grad_of(n, 0)) *g += n.grad * n.value;
  });
}

Tensor log(const Tensor& a) {
  if ((a.value() <= 0.0).any())
    throw DomainError("log of a non-positive value");
  return make_result(a.value().log(), a.shape(), {a}, [](Node& n) {
    if (Array* g = grad_of(n, 0)) *g += n.grad / n.parents[0]->value;
  });
}

Tensor abs(const Tensor& a) {
  return make_result(a.value().abs(), a.shape(), {a}, [](Node& n) {
    if (Array* g = grad_of(n, 0)) *g += n.grad * n.parents[0]->value.sign();
  });
}

Tensor square(const Tensor& a) {
  return make_result(a.value().square(), a.shape(), {a}, [](Node& n) {
    if (Array* g = grad_of(n, 0)) *g += 2.0 * n.grad * n.parents[0]->value;
  });
}

Tensor relu(const Tensor& a) {
  return make_result(a.value().max(0.0), a.shape(), {a}, [](Node& n) {
    if (Array* g = grad_of(n, 0))
      *g += (n.parents[0]->value > 0.0).select(n.grad, 0.0);
  });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  const Array& x = a.value();
  Array v = (x > 0.0).select(x, slope * x);
  return make_result(std::move(v), a.shape(), {a}, [slope](Node& n) {
    if (Array* g = grad_of(n, 0))
      *g += (n.parents[0]->value > 0.0).select(n.grad, slope * n.grad);
  });
}

Tensor sigmoid(const Tensor& a) {
  Array v = a.value().unaryExpr(&stable_sigmoid);
  return make_result(std::move(v), a.shape(), {a}, [](Node& n) {
    if (Array* g = grad_of(n, 0)) *g += n.grad * n.value * (1.0 - n.value);
  });
}

Tensor softplus(const Tensor& a) {
  Array v = a.value().unaryExpr(&stable_softplus);
  return make_result(std::move(v), a.shape(), {a}, [](Node& n) {
    if (Array* g = grad_of(n, 0))
      *g += n.grad * n.parents[0]->value.unaryExpr(&stable_sigmoid);
  });
}

Tensor log_sigmoid(const Tensor& a) {
  Array v = -(-a.value()).unaryExpr(&stable_softplus);
  return make_result(std::move(v), a.shape(), {a}, [](Node& n) {
    if (Array* g = grad_of(n, 0))
      *g += n.grad * (-n.parents[0]->value).unaryExpr(&stable_sigmoid);
  });
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& a) {
  return make_result(Array::Constant(1, a.value().sum()), Shape{1}, {a},
                     [](Node& n) {
                       if (Array* g = grad_of(n, 0)) *g += n.grad[0];
                     });
}

Tensor mean(const Tensor& a) {
  const double inv = 1.0 / static_cast<double>(a.size());
  return make_result(Array::Constant(1, a.value().sum() * inv), Shape{1}, {a},
                     [inv](Node& n) {
                       if (Array* g = grad_of(n, 0)) *g += n.grad[0] * inv;
                     });
}

Tensor dot_const(const Tensor& a, const Array& weights) {
  if (weights.size() != a.size())
    throw DimensionError("dot_const: weight count mismatch");
  return make_result(Array::Constant(1, (a.value() * weights).sum()),
                     Shape{1}, {a}, [weights](Node& n) {
                       if (Array* g = grad_of(n, 0)) *g += n.grad[0] * weights;
                     });
}

Tensor add_n(const std::vector<Tensor>& terms) {
  if (terms.empty()) throw ContractError("add_n of nothing");
  Array v = terms[0].value();
  for (std::size_t i = 1; i < terms.size(); ++i) {
    require_same_shape(terms[0], terms[i], "add_n");
    v += terms[i].value();
  }
  return make_result(std::move(v), terms[0].shape(), terms, [](Node& n) {
    for (std::size_t i = 0; i < n.parents.size(); ++i)
      if (Array* g = grad_of(n, i)) *g += n.grad;
  });
}

// ---------------------------------------------------------------------------
// Structure

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size())
    throw DimensionError("reshape " + shape_string(a.shape()) + " to " +
                         shape_string(shape));
  return make_result(a.value(), std::move(shape), {a}, [](Node& n) {
    if (Array* g = grad_of(n, 0)) *g += n.grad;
  });
}

Tensor select(const Tensor& a, Index i) {
  if (i < 0 || i >= a.size()) throw DimensionError("select out of range");
  return make_result(Array::Constant(1, a.value()[i]), Shape{1}, {a},
                     [i](Node& n) {
                       if (Array* g = grad_of(n, 0)) (*g)[i] += n.grad[0];
                     });
}

Tensor stack(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("stack of nothing");
  const Index m = parts[0].size();
  Array v(m * static_cast<Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    require_same_shape(parts[0], parts[i], "stack");
    v.segment(static_cast<Index>(i) * m, m) = parts[i].value();
  }
  Shape shape{static_cast<Index>(parts.size())};
  if (parts[0].shape() != Shape{1})
    shape.insert(shape.end(), parts[0].shape().begin(), parts[0].shape().end());
  return make_result(std::move(v), std::move(shape), parts, [m](Node& n) {
    for (std::size_t i = 0; i < n.parents.size(); ++i)
      if (Array* g = grad_of(n, i))
        *g += n.grad.segment(static_cast<Index>(i) * m, m);
  });
}

Tensor cumsum(const Tensor& a) {
  require_rank(a, 1, "cumsum");
  Array v(a.size());
  double acc = 0.0;
  for (Index i = 0; i < a.size(); ++i) v[i] = (acc += a.value()[i]);
  return make_result(std::move(v), a.shape(), {a}, [](Node& n) {
    if (Array* g = grad_of(n, 0)) {
      double acc = 0.0;
      for (Index i = n.grad.size() - 1; i >= 0; --i) (*g)[i] += (acc += n.grad[i]);
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_rows of nothing");
  const Index cols = parts[0].dim(1);
  Index rows = 0;
  for (const Tensor& p : parts) {
    require_rank(p, 2, "concat_rows");
    if (p.dim(1) != cols) throw DimensionError("concat_rows: column mismatch");
    rows += p.dim(0);
  }
  Array v(rows * cols);
  Index off = 0;
  for (const Tensor& p : parts) {
    v.segment(off, p.size()) = p.value();
    off += p.size();
  }
  return make_result(std::move(v), Shape{rows, cols}, parts, [](Node& n) {
    Index off = 0;
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      const Index len = n.parents[i]->value.size();
      if (Array* g = grad_of(n, i)) *g += n.grad.segment(off, len);
      off += len;
    }
  });
}

Tensor slice_cols(const Tensor& a, Index start, Index len) {
  require_rank(a, 2, "slice_cols");
  const Index rows = a.dim(0), cols = a.dim(1);
  if (start < 0 || start >= cols || len <= 0)
    throw DimensionError("slice_cols: bad range");
  const Index avail = std::min(len, cols - start);
  RowMatrix out = RowMatrix::Zero(rows, len);
  out.leftCols(avail) = a.matrix().middleCols(start, avail);
  Array v = Eigen::Map<Array>(out.data(), out.size());
  return make_result(std::move(v), Shape{rows, len}, {a},
                     [rows, cols, start, len, avail](Node& n) {
                       if (Array* g = grad_of(n, 0)) {
                         MatrixMap gm(g->data(), rows, cols);
                         ConstMatrixMap up(n.grad.data(), rows, len);
                         gm.middleCols(start, avail) += up.leftCols(avail);
                       }
                     });
}

Tensor concat_cols(const std::vector<Tensor>& parts,
                   const std::vector<Index>& widths) {
  if (parts.empty() || parts.size() != widths.size())
    throw ContractError("concat_cols: parts/widths mismatch");
  const Index rows = parts[0].dim(0);
  Index total = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    require_rank(parts[i], 2, "concat_cols");
    if (parts[i].dim(0) != rows || widths[i] <= 0 || widths[i] > parts[i].dim(1))
      throw DimensionError("concat_cols: bad block");
    total += widths[i];
  }
  RowMatrix out(rows, total);
  Index off = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    out.middleCols(off, widths[i]) = parts[i].matrix().leftCols(widths[i]);
    off += widths[i];
  }
  Array v = Eigen::Map<Array>(out.data(), out.size());
  return make_result(std::move(v), Shape{rows, total}, parts,
                     [rows, total, widths](Node& n) {
                       ConstMatrixMap up(n.grad.data(), rows, total);
                       Index off = 0;
                       for (std::size_t i = 0; i < n.parents.size(); ++i) {
                         if (Array* g = grad_of(n, i)) {
                           const Index c = n.parents[i]->shape[1];
                           MatrixMap gm(g->data(), rows, c);
                           gm.leftCols(widths[i]) += up.middleCols(off, widths[i]);
                         }
                         off += widths[i];
                       }
                     });
}

Tensor sum_rows(const Tensor& a) {
  require_rank(a, 2, "sum_rows");
  const Index rows = a.dim(0), cols = a.dim(1);
  Eigen::RowVectorXd v = a.matrix().colwise().sum();
  return make_result(v.transpose().array(), Shape{cols}, {a},
                     [rows, cols](Node& n) {
                       if (Array* g = grad_of(n, 0)) {
                         MatrixMap gm(g->data(), rows, cols);
                         gm.rowwise() += n.grad.matrix().transpose();
                       }
                     });
}

Tensor scale_rows(const Tensor& a, const Tensor& factors) {
  require_rank(a, 2, "scale_rows");
  const Index rows = a.dim(0), cols = a.dim(1);
  if (factors.size() != rows)
    throw DimensionError("scale_rows: factor count mismatch");
  RowMatrix out =
      factors.value().matrix().asDiagonal() * a.matrix();
  Array v = Eigen::Map<Array>(out.data(), out.size());
  return make_result(std::move(v), a.shape(), {a, factors},
                     [rows, cols](Node& n) {
                       ConstMatrixMap up(n.grad.data(), rows, cols);
                       const Array& f = n.parents[1]->value;
                       if (Array* g = grad_of(n, 0)) {
                         MatrixMap gm(g->data(), rows, cols);
                         gm += f.matrix().asDiagonal() * up;
                       }
                       if (Array* g = grad_of(n, 1)) {
                         ConstMatrixMap av(n.parents[0]->value.data(), rows, cols);
                         *g += (up.array() * av.array()).rowwise().sum();
                       }
                     });
}

// ---------------------------------------------------------------------------
// Layers

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank(weight, 2, "dense");
  const Index units = weight.dim(0), features = weight.dim(1);
  if (input.size() != features)
    throw DimensionError("dense: input has " + std::to_string(input.size()) +
                         " features, weight expects " +
                         std::to_string(features));
  if (bias.defined() && bias.size() != units)
    throw DimensionError("dense: bias size mismatch");
  Eigen::VectorXd out = weight.matrix() * input.value().matrix();
  if (bias.defined()) out += bias.value().matrix();
  std::vector<Tensor> inputs{input, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result(out.array(), Shape{units}, inputs,
                     [units, features](Node& n) {
                       const auto up = n.grad.matrix();
                       ConstMatrixMap w(n.parents[1]->value.data(), units, features);
                       if (Array* g = grad_of(n, 0))
                         g->matrix() += w.transpose() * up;
                       if (Array* g = grad_of(n, 1)) {
                         MatrixMap gw(g->data(), units, features);
                         gw.noalias() += up * n.parents[0]->value.matrix().transpose();
                       }
                       if (n.parents.size() > 2)
                         if (Array* g = grad_of(n, 2)) *g += n.grad;
                     });
}

Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              Index stride, Padding padding) {
  require_rank(input, 2, "conv1d input");
  require_rank(kernels, 3, "conv1d kernels");
  if (stride <= 0) throw ContractError("conv1d: stride must be positive");
  const Index cin = input.dim(0), len = input.dim(1);
  const Index cout = kernels.dim(0), k = kernels.dim(2);
  if (kernels.dim(1) != cin)
    throw DimensionError("conv1d: input has " + std::to_string(cin) +
                         " channels, kernels expect " +
                         std::to_string(kernels.dim(1)));
  if (bias.defined() && bias.size() != cout)
    throw DimensionError("conv1d: bias size mismatch");
  const Index pad = padding == Padding::kSame ? k / 2 : 0;
  if (padding == Padding::kValid && k > len)
    throw DimensionError("conv1d: kernel longer than input");
  const Index len_out =
      padding == Padding::kSame ? ceil_div(len, stride) : (len - k) / stride + 1;

  auto cols = std::make_shared<RowMatrix>(
      im2col_1d(input.value().data(), cin, len, k, stride, pad, len_out));
  ConstMatrixMap w(kernels.value().data(), cout, cin * k);
  RowMatrix out(cout, len_out);
  out.noalias() = w * (*cols);
  if (bias.defined()) out.colwise() += bias.value().matrix();
  Array v = Eigen::Map<Array>(out.data(), out.size());

  std::vector<Tensor> inputs{input, kernels};
  if (bias.defined()) inputs.push_back(bias);
  return make_result(
      std::move(v), Shape{cout, len_out}, inputs,
      [cols, cin, len, cout, k, stride, pad, len_out](Node& n) {
        ConstMatrixMap up(n.grad.data(), cout, len_out);
        if (Array* g = grad_of(n, 1)) {
          MatrixMap gw(g->data(), cout, cin * k);
          gw.noalias() += up * cols->transpose();
        }
        if (n.parents.size() > 2)
          if (Array* g = grad_of(n, 2)) g->matrix() += up.rowwise().sum();
        if (Array* g = grad_of(n, 0)) {
          ConstMatrixMap w(n.parents[1]->value.data(), cout, cin * k);
          RowMatrix gcols(cin * k, len_out);
          gcols.noalias() = w.transpose() * up;
          col2im_1d(gcols, g->data(), cin, len, k, stride, pad, len_out);
        }
      });
}

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              Index stride_h, Index stride_w) {
  require_rank(input, 3, "conv2d input");
  require_rank(kernels, 4, "conv2d kernels");
  if (stride_h <= 0 || stride_w <= 0)
    throw ContractError("conv2d: stride must be positive");
  Geometry2d geo{};
  geo.cin = input.dim(0);
  geo.h = input.dim(1);
  geo.w = input.dim(2);
  const Index cout = kernels.dim(0);
  if (kernels.dim(1) != geo.cin)
    throw DimensionError("conv2d: channel mismatch");
  if (bias.defined() && bias.size() != cout)
    throw DimensionError("conv2d: bias size mismatch");
  geo.kh = kernels.dim(2);
  geo.kw = kernels.dim(3);
  geo.sh = stride_h;
  geo.sw = stride_w;
  geo.ph = geo.kh / 2;
  geo.pw = geo.kw / 2;
  geo.ho = ceil_div(geo.h, stride_h);
  geo.wo = ceil_div(geo.w, stride_w);
  const Index patch = geo.cin * geo.kh * geo.kw;

  auto cols = std::make_shared<RowMatrix>(im2col_2d(input.value().data(), geo));
  ConstMatrixMap w(kernels.value().data(), cout, patch);
  RowMatrix out(cout, geo.ho * geo.wo);
  out.noalias() = w * (*cols);
  if (bias.defined()) out.colwise() += bias.value().matrix();
  Array v = Eigen::Map<Array>(out.data(), out.size());

  std::vector<Tensor> inputs{input, kernels};
  if (bias.defined()) inputs.push_back(bias);
  return make_result(
      std::move(v), Shape{cout, geo.ho, geo.wo}, inputs,
      [cols, geo, cout, patch](Node& n) {
        ConstMatrixMap up(n.grad.data(), cout, geo.ho * geo.wo);
        if (Array* g = grad_of(n, 1)) {
          MatrixMap gw(g->data(), cout, patch);
          gw.noalias() += up * cols->transpose();
        }
        if (n.parents.size() > 2)
          if (Array* g = grad_of(n, 2)) g->matrix() += up.rowwise().sum();
        if (Array* g = grad_of(n, 0)) {
          ConstMatrixMap w(n.parents[1]->value.data(), cout, patch);
          RowMatrix gcols(patch, geo.ho * geo.wo);
          gcols.noalias() = w.transpose() * up;
          col2im_2d(gcols, g->data(), geo);
        }
      });
}

Tensor max_pool_last(const Tensor& input, Index window) {
  if (input.rank() < 2) throw DimensionError("max_pool_last: rank < 2");
  if (window <= 0) throw ContractError("max_pool_last: window must be positive");
  const Index w = input.shape().back();
  const Index rows = input.size() / w;
  const Index wo = ceil_div(w, window);
  Array v(rows * wo);
  auto arg = std::make_shared<std::vector<Index>>(rows * wo);
  const double* x = input.value().data();
  for (Index r = 0; r < rows; ++r) {
    for (Index j = 0; j < wo; ++j) {
      const Index begin = r * w + j * window;
      const Index end = r * w + std::min(w, (j + 1) * window);
      Index best = begin;
      for (Index i = begin + 1; i < end; ++i)
        if (x[i] > x[best]) best = i;
      v[r * wo + j] = x[best];
      (*arg)[r * wo + j] = best;
    }
  }
  Shape shape = input.shape();
  shape.back() = wo;
  return make_result(std::move(v), std::move(shape), {input}, [arg](Node& n) {
    if (Array* g = grad_of(n, 0))
      for (Index i = 0; i < n.grad.size(); ++i) (*g)[(*arg)[i]] += n.grad[i];
  });
}

Tensor upsample2(const Tensor& input) {
  require_rank(input, 2, "upsample2");
  const Index c = input.dim(0), t = input.dim(1);
  Array v(c * 2 * t);
  const double* x = input.value().data();
  for (Index i = 0; i < c * t; ++i) v[2 * i] = v[2 * i + 1] = x[i];
  return make_result(std::move(v), Shape{c, 2 * t}, {input}, [](Node& n) {
    if (Array* g = grad_of(n, 0))
      for (Index i = 0; i < g->size(); ++i)
        (*g)[i] += n.grad[2 * i] + n.grad[2 * i + 1];
  });
}

Tensor softmax(const Tensor& logits) {
  require_rank(logits, 1, "softmax");
  Array e = (logits.value() - logits.value().maxCoeff()).exp();
  Array p = e / e.sum();
  return make_result(std::move(p), logits.shape(), {logits}, [](Node& n) {
    if (Array* g = grad_of(n, 0)) {
      const double dotp = (n.grad * n.value).sum();
      *g += n.value * (n.grad - dotp);
    }
  });
}

Tensor dropout(const Tensor& input, double rate, std::mt19937_64& rng,
               bool training) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw ContractError("dropout rate must lie in [0, 1)");
  if (!training || rate == 0.0) return input;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Array mask(input.size());
  const double keep = 1.0 / (1.0 - rate);
  for (Index i = 0; i < mask.size(); ++i) mask[i] = uni(rng) < rate ? 0.0 : keep;
  return mul_const(input, mask);
}

Tensor dropout(const Tensor& input, double rate, std::uint64_t seed,
               bool training) {
  std::mt19937_64 rng(seed);
  return dropout(input, rate, rng, training);
}

// ---------------------------------------------------------------------------
// Losses

Tensor l1_mean(const Tensor& a, const Tensor& b) { return mean(abs(sub(a, b))); }

Tensor l1_masked_mean(const Tensor& a, const Tensor& b, const Array& mask) {
  const double total = mask.sum();
  if (!(total > 0.0)) throw ContractError("masked L1 over an empty mask");
  return dot_const(abs(sub(a, b)), mask / total);
}

Tensor cross_entropy(const Tensor& probs, const Array& target) {
  if (target.size() != probs.size())
    throw DimensionError("cross_entropy: label size mismatch");
  double loss = 0.0;
  for (Index i = 0; i < target.size(); ++i) {
    if (target[i] == 0.0) continue;
    if (!(probs.value()[i] > 0.0))
      throw DomainError("cross_entropy: zero probability on a labelled class");
    loss -= target[i] * std::log(probs.value()[i]);
  }
  return make_result(Array::Constant(1, loss), Shape{1}, {probs},
                     [target](Node& n) {
                       if (Array* g = grad_of(n, 0)) {
                         const Array& p = n.parents[0]->value;
                         for (Index i = 0; i < target.size(); ++i)
                           if (target[i] != 0.0)
                             (*g)[i] -= n.grad[0] * target[i] / p[i];
                       }
                     });
}

// ---------------------------------------------------------------------------
// Wavelet support

Tensor ricker_taps(const Tensor& scale, Index support) {
  if (scale.size() != 1) throw DimensionError("ricker_taps: scale must be scalar");
  const double s = scale.item();
  if (!(s > 0.0)) throw DomainError("ricker_taps: scale must be positive");
  if (support < 1 || support % 2 == 0)
    throw ContractError("ricker_taps: support must be odd");
  const double c = 2.0 / std::sqrt(3.0) * std::pow(std::numbers::pi, -0.25);
  const double center = static_cast<double>(support - 1) / 2.0;
  Array v(support), dv(support);
  for (Index k = 0; k < support; ++k) {
    const double u = (static_cast<double>(k) - center) / s;
    const double u2 = u * u;
    const double e = std::exp(-0.5 * u2);
    v[k] = c * (1.0 - u2) * e;
    dv[k] = c * u2 * (3.0 - u2) * e / s;  // d taps / d scale
  }
  return make_result(std::move(v), Shape{support}, {scale}, [dv](Node& n) {
    if (Array* g = grad_of(n, 0)) (*g)[0] += (n.grad * dv).sum();
  });
}

Tensor correlate_same(const Tensor& signal, const Tensor& taps) {
  require_rank(signal, 1, "correlate_same signal");
  require_rank(taps, 1, "correlate_same taps");
  const Index len = signal.size(), k = taps.size();
  if (k > len) throw DimensionError("correlate_same: kernel longer than signal");
  const Index pad = k / 2;
  Array wr = taps.value().reverse();
  std::vector<double> z =
      linear_convolve(signal.value().data(), len, wr.data(), k);
  Array v = Eigen::Map<const Array>(z.data() + (k - 1 - pad), len);
  return make_result(std::move(v), Shape{len}, {signal, taps},
                     [len, k, pad](Node& n) {
                       const Array& x = n.parents[0]->value;
                       const Array& w = n.parents[1]->value;
                       if (Array* g = grad_of(n, 1)) {
                         Array gr = n.grad.reverse();
                         std::vector<double> u =
                             linear_convolve(x.data(), len, gr.data(), len);
                         for (Index i = 0; i < k; ++i) (*g)[i] += u[i - pad + len - 1];
                       }
                       if (Array* g = grad_of(n, 0)) {
                         std::vector<double> u =
                             linear_convolve(n.grad.data(), len, w.data(), k);
                         for (Index j = 0; j < len; ++j) (*g)[j] += u[j + pad];
                       }
                     });
}

}  // namespace f0vc::ad
