#include "roar/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace roar::ops {

namespace {

Tape& tape_of(Var v) {
  if (!v.tape) throw std::logic_error("op on an unbound Var");
  return *v.tape;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                      shape_str(b.shape()));
}

void axpy(std::span<double> dst, std::span<const double> src, double alpha = 1.0) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += alpha * src[i];
}

Shape with_last(const Shape& s, std::size_t last) {
  Shape out = s;
  if (out.empty()) out.push_back(last);
  else out.back() = last;
  return out;
}

}  // namespace

namespace kernel {

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += aip * bi[j];
    }
  }
}

Tensor transpose(const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  Tensor t({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) t[j * r + i] = a[i * c + j];
  return t;
}

}  // namespace kernel

Var matmul(Var a, Var b) {
  Tape& tape = tape_of(a);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.rank() == 2 && bv.rank() == 2, "matmul: operands must be 2-D");
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  require(bv.dim(0) == k, "matmul: inner dimensions " + shape_str(av.shape()) + " x " + shape_str(bv.shape()));
  Tensor out({m, n});
  kernel::gemm_nn(av.ptr(), bv.ptr(), out.ptr(), m, k, n);
  return tape.record(std::move(out), {a, b}, [a, b, m, k, n](const Tensor& g) {
    Tape& t = *a.tape;
    if (t.requires_grad(a)) {
      const Tensor bt = kernel::transpose(t.value(b));
      kernel::gemm_nn(g.ptr(), bt.ptr(), t.accumulate(a).ptr(), m, n, k);
    }
    if (t.requires_grad(b)) kernel::gemm_tn(t.value(a).ptr(), g.ptr(), t.accumulate(b).ptr(), m, k, n);
  });
}

Var linear(Var x, Var weight, Var bias) {
  Tape& tape = tape_of(x);
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  require(wv.rank() == 2, "linear: weight must be 2-D");
  const std::size_t in = wv.dim(1), outd = wv.dim(0), m = xv.rows();
  require(xv.cols() == in, "linear: input width " + std::to_string(xv.cols()) + " != weight " + shape_str(wv.shape()));
  const bool has_bias = bias.tape != nullptr;
  if (has_bias) require(bias.value().size() == outd, "linear: bias length mismatch");
  Tensor out(with_last(xv.shape(), outd));
  const Tensor wt = kernel::transpose(wv);
  kernel::gemm_nn(xv.ptr(), wt.ptr(), out.ptr(), m, in, outd);
  if (has_bias) {
    const Tensor& bv = bias.value();
    for (std::size_t i = 0; i < m; ++i) axpy(out.row(i), bv.data());
  }
  auto backward = [x, weight, bias, has_bias, m, in, outd](const Tensor& g) {
    Tape& t = *x.tape;
    if (t.requires_grad(x)) kernel::gemm_nn(g.ptr(), t.value(weight).ptr(), t.accumulate(x).ptr(), m, outd, in);
    if (t.requires_grad(weight)) kernel::gemm_tn(g.ptr(), t.value(x).ptr(), t.accumulate(weight).ptr(), m, outd, in);
    if (has_bias && t.requires_grad(bias)) {
      Tensor& gb = t.accumulate(bias);
      for (std::size_t i = 0; i < m; ++i) axpy(gb.data(), g.row(i));
    }
  };
  if (has_bias) return tape.record(std::move(out), {x, weight, bias}, backward);
  return tape.record(std::move(out), {x, weight}, backward);
}

Var linear(Var x, Var weight) { return linear(x, weight, Var{}); }

Var add(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same(av, bv, "add");
  Tensor out = av;
  axpy(out.data(), bv.data());
  return tape_of(a).record(std::move(out), {a, b}, [a, b](const Tensor& g) {
    Tape& t = *a.tape;
    if (t.requires_grad(a)) axpy(t.accumulate(a).data(), g.data());
    if (t.requires_grad(b)) axpy(t.accumulate(b).data(), g.data());
  });
}

Var sub(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same(av, bv, "sub");
  Tensor out = av;
  axpy(out.data(), bv.data(), -1.0);
  return tape_of(a).record(std::move(out), {a, b}, [a, b](const Tensor& g) {
    Tape& t = *a.tape;
    if (t.requires_grad(a)) axpy(t.accumulate(a).data(), g.data());
    if (t.requires_grad(b)) axpy(t.accumulate(b).data(), g.data(), -1.0);
  });
}

Var mul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same(av, bv, "mul");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return tape_of(a).record(std::move(out), {a, b}, [a, b](const Tensor& g) {
    Tape& t = *a.tape;
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (t.requires_grad(a)) {
      Tensor& ga = t.accumulate(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.accumulate(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  return tape_of(a).record(std::move(out), {a}, [a, factor](const Tensor& g) {
    axpy(a.tape->accumulate(a).data(), g.data(), factor);
  });
}

Var add_scalar(Var a, double value) {
  Tensor out = a.value();
  for (double& v : out.data()) v += value;
  return tape_of(a).record(std::move(out), {a}, [a](const Tensor& g) { axpy(a.tape->accumulate(a).data(), g.data()); });
}

Var add_row(Var x, Var row) {
  const Tensor& xv = x.value();
  const Tensor& rv = row.value();
  require(rv.size() == xv.cols(), "add_row: row length " + std::to_string(rv.size()) + " != cols " +
                                      std::to_string(xv.cols()));
  Tensor out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i) axpy(out.row(i), rv.data());
  return tape_of(x).record(std::move(out), {x, row}, [x, row](const Tensor& g) {
    Tape& t = *x.tape;
    if (t.requires_grad(x)) axpy(t.accumulate(x).data(), g.data());
    if (t.requires_grad(row)) {
      Tensor& gr = t.accumulate(row);
      for (std::size_t i = 0; i < g.rows(); ++i) axpy(gr.data(), g.row(i));
    }
  });
}

Var mul_row(Var x, Var row) {
  const Tensor& xv = x.value();
  const Tensor& rv = row.value();
  require(rv.size() == xv.cols(), "mul_row: row length mismatch");
  Tensor out = xv;
  const std::size_t c = xv.cols();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) *= rv[j];
  return tape_of(x).record(std::move(out), {x, row}, [x, row, c](const Tensor& g) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x);
    const Tensor& rv = t.value(row);
    if (t.requires_grad(x)) {
      Tensor& gx = t.accumulate(x);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < c; ++j) gx(i, j) += g(i, j) * rv[j];
    }
    if (t.requires_grad(row)) {
      Tensor& gr = t.accumulate(row);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < c; ++j) gr[j] += g(i, j) * xv(i, j);
    }
  });
}

Var mul_col(Var x, Var col) {
  const Tensor& xv = x.value();
  const Tensor& cv = col.value();
  require(cv.size() == xv.rows(), "mul_col: column length mismatch");
  Tensor out = xv;
  const std::size_t c = xv.cols();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) *= cv[i];
  return tape_of(x).record(std::move(out), {x, col}, [x, col, c](const Tensor& g) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x);
    const Tensor& cv = t.value(col);
    if (t.requires_grad(x)) {
      Tensor& gx = t.accumulate(x);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < c; ++j) gx(i, j) += g(i, j) * cv[i];
    }
    if (t.requires_grad(col)) {
      Tensor& gc = t.accumulate(col);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += g(i, j) * xv(i, j);
        gc[i] += s;
      }
    }
  });
}

Var softmax(Var x) {
  const Tensor& xv = x.value();
  Tensor out = xv;
  const std::size_t c = xv.cols();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (double& v : r) {
      v = std::exp(v - mx);
      z += v;
    }
    for (double& v : r) v /= z;
  }
  return tape_of(x).record(std::move(out), {x}, [x, c](const Tensor& g) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x);
    Tensor& gx = t.accumulate(x);
    std::vector<double> y(c);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      auto xr = xv.row(i);
      const double mx = *std::max_element(xr.begin(), xr.end());
      double z = 0.0;
      for (std::size_t j = 0; j < c; ++j) z += (y[j] = std::exp(xr[j] - mx));
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        y[j] /= z;
        dot += y[j] * g(i, j);
      }
      for (std::size_t j = 0; j < c; ++j) gx(i, j) += y[j] * (g(i, j) - dot);
    }
  });
}

Var layer_norm(Var x, double eps) {
  const Tensor& xv = x.value();
  const std::size_t c = xv.cols();
  require(c >= 2, "layer_norm: need at least 2 features");
  Tensor out = xv;
  std::vector<double> inv_std(xv.rows());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    double mu = 0.0;
    for (double v : r) mu += v;
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (double v : r) var += (v - mu) * (v - mu);
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (double& v : r) v = (v - mu) * inv_std[i];
  }
  Tensor normed = out;
  return tape_of(x).record(std::move(out), {x}, [x, c, inv_std = std::move(inv_std), normed = std::move(normed)](const Tensor& g) {
    Tensor& gx = x.tape->accumulate(x);
    const double inv_c = 1.0 / static_cast<double>(c);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      double sg = 0.0, sgy = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        sg += g(i, j);
        sgy += g(i, j) * normed(i, j);
      }
      for (std::size_t j = 0; j < c; ++j)
        gx(i, j) += inv_std[i] * (g(i, j) - inv_c * sg - normed(i, j) * inv_c * sgy);
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) { return add_row(mul_row(layer_norm(x, eps), gain), bias); }

Var rms_norm(Var x, Var gain, double eps) {
  const Tensor& xv = x.value();
  const std::size_t c = xv.cols();
  require(gain.value().size() == c, "rms_norm: gain length mismatch");
  const Tensor& gv = gain.value();
  Tensor out = xv;
  std::vector<double> inv_rms(xv.rows());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    double ms = 0.0;
    for (double v : r) ms += v * v;
    ms /= static_cast<double>(c);
    inv_rms[i] = 1.0 / std::sqrt(ms + eps);
    for (std::size_t j = 0; j < c; ++j) r[j] = r[j] * inv_rms[i] * gv[j];
  }
  return tape_of(x).record(std::move(out), {x, gain}, [x, gain, c, inv_rms = std::move(inv_rms)](const Tensor& g) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x);
    const Tensor& gv = t.value(gain);
    const double inv_c = 1.0 / static_cast<double>(c);
    if (t.requires_grad(x)) {
      Tensor& gx = t.accumulate(x);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        const double s = inv_rms[i];
        double dot = 0.0;  // sum_j g_j * gain_j * x_j
        for (std::size_t j = 0; j < c; ++j) dot += g(i, j) * gv[j] * xv(i, j);
        for (std::size_t j = 0; j < c; ++j)
          gx(i, j) += s * g(i, j) * gv[j] - s * s * s * inv_c * dot * xv(i, j);
      }
    }
    if (t.requires_grad(gain)) {
      Tensor& gg = t.accumulate(gain);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < c; ++j) gg[j] += g(i, j) * xv(i, j) * inv_rms[i];
    }
  });
}

Var silu(Var x) {
  Tensor out = x.value();
  for (double& v : out.data()) v = v / (1.0 + std::exp(-v));
  return tape_of(x).record(std::move(out), {x}, [x](const Tensor& g) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x);
    Tensor& gx = t.accumulate(x);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = 1.0 / (1.0 + std::exp(-xv[i]));
      gx[i] += g[i] * s * (1.0 + xv[i] * (1.0 - s));
    }
  });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return tape_of(x).record(std::move(out), {x}, [x](const Tensor& g) { axpy(x.tape->accumulate(x).data(), g.data()); });
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  const Tensor& xv = x.value();
  const std::size_t c = xv.cols();
  require(begin + count <= c, "slice_cols: range out of bounds");
  Tensor out(with_last(xv.shape(), count));
  for (std::size_t i = 0; i < xv.rows(); ++i)
    std::copy_n(xv.row(i).begin() + static_cast<std::ptrdiff_t>(begin), count, out.row(i).begin());
  return tape_of(x).record(std::move(out), {x}, [x, begin, count](const Tensor& g) {
    Tensor& gx = x.tape->accumulate(x);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < count; ++j) gx(i, begin + j) += g(i, j);
  });
}

Var gather_rows(Var x, std::span<const std::size_t> rows) {
  const Tensor& xv = x.value();
  const std::size_t c = xv.cols();
  Tensor out({rows.size(), c});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r] < xv.rows(), "gather_rows: index out of range");
    std::copy_n(xv.row(rows[r]).begin(), c, out.row(r).begin());
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return tape_of(x).record(std::move(out), {x}, [x, idx = std::move(idx)](const Tensor& g) {
    Tensor& gx = x.tape->accumulate(x);
    for (std::size_t r = 0; r < idx.size(); ++r) axpy(gx.row(idx[r]), g.row(r));
  });
}

Var scatter_rows(Var x, std::span<const std::size_t> rows, std::size_t total_rows) {
  const Tensor& xv = x.value();
  require(rows.size() == xv.rows(), "scatter_rows: index count != rows");
  const std::size_t c = xv.cols();
  Tensor out({total_rows, c});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r] < total_rows, "scatter_rows: index out of range");
    axpy(out.row(rows[r]), xv.row(r));
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return tape_of(x).record(std::move(out), {x}, [x, idx = std::move(idx)](const Tensor& g) {
    Tensor& gx = x.tape->accumulate(x);
    for (std::size_t r = 0; r < idx.size(); ++r) axpy(gx.row(r), g.row(idx[r]));
  });
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  Tape& tape = tape_of(parts[0]);
  const std::size_t c = parts[0].value().cols();
  std::size_t total = 0;
  for (const Var& p : parts) {
    require(p.value().cols() == c, "concat_rows: column mismatch");
    total += p.value().rows();
  }
  Tensor out({total, c});
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    std::copy(pv.data().begin(), pv.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(off * c));
    off += pv.rows();
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  return tape.record(std::move(out), parts, [ins, c](const Tensor& g) {
    std::size_t off = 0;
    for (const Var& p : ins) {
      Tape& t = *p.tape;
      const std::size_t n = t.value(p).size();
      if (t.requires_grad(p)) axpy(t.accumulate(p).data(), g.data().subspan(off, n));
      off += n;
    }
  });
}

Var segment_mean(Var x, std::size_t group) {
  const Tensor& xv = x.value();
  require(group > 0 && xv.rows() % group == 0, "segment_mean: rows not divisible by group");
  const std::size_t groups = xv.rows() / group, c = xv.cols();
  Tensor out({groups, c});
  const double inv = 1.0 / static_cast<double>(group);
  for (std::size_t s = 0; s < groups; ++s) {
    for (std::size_t r = 0; r < group; ++r) axpy(out.row(s), xv.row(s * group + r));
    for (double& v : out.row(s)) v *= inv;
  }
  return tape_of(x).record(std::move(out), {x}, [x, group, inv](const Tensor& g) {
    Tensor& gx = x.tape->accumulate(x);
    for (std::size_t r = 0; r < gx.rows(); ++r) axpy(gx.row(r), g.row(r / group), inv);
  });
}

Var pick(Var x, std::span<const std::size_t> index) {
  const Tensor& xv = x.value();
  require(xv.rank() == 2 && index.size() == xv.rows(), "pick: need one index per row of a 2-D tensor");
  Tensor out({index.size()});
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] < xv.cols(), "pick: index out of range");
    out[i] = xv(i, index[i]);
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return tape_of(x).record(std::move(out), {x}, [x, idx = std::move(idx)](const Tensor& g) {
    Tensor& gx = x.tape->accumulate(x);
    for (std::size_t i = 0; i < idx.size(); ++i) gx(i, idx[i]) += g[i];
  });
}

Var head_dots(Var q, Var k, std::size_t heads) {
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  require(qv.cols() == kv.cols() && heads > 0 && qv.cols() % heads == 0, "head_dots: width/head mismatch");
  const std::size_t n = qv.rows(), m = kv.rows(), d = qv.cols() / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(d));
  Tensor out({n * m, heads});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t h = 0; h < heads; ++h) {
        double s = 0.0;
        for (std::size_t e = 0; e < d; ++e) s += qv(i, h * d + e) * kv(j, h * d + e);
        out(i * m + j, h) = s * sc;
      }
  return tape_of(q).record(std::move(out), {q, k}, [q, k, n, m, d, heads, sc](const Tensor& g) {
    Tape& t = *q.tape;
    const Tensor& qv = t.value(q);
    const Tensor& kv = t.value(k);
    const bool gq = t.requires_grad(q), gk = t.requires_grad(k);
    Tensor* dq = gq ? &t.accumulate(q) : nullptr;
    Tensor* dk = gk ? &t.accumulate(k) : nullptr;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t h = 0; h < heads; ++h) {
          const double gij = g(i * m + j, h) * sc;
          for (std::size_t e = 0; e < d; ++e) {
            if (dq) (*dq)(i, h * d + e) += gij * kv(j, h * d + e);
            if (dk) (*dk)(j, h * d + e) += gij * qv(i, h * d + e);
          }
        }
  });
}

void AttentionProbe::record(std::size_t keys) {
  ++queries;
  min_keys = std::min(min_keys, keys);
  max_keys = std::max(max_keys, keys);
  total_keys += keys;
}

Var attention(Var q, Var k, Var v, std::size_t heads, std::span<const std::size_t> segments, std::size_t segment_len,
              AttentionProbe* probe) {
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  const std::size_t width = qv.cols();
  require(kv.cols() == width && vv.cols() == width, "attention: q/k/v width mismatch");
  require(kv.rows() == vv.rows(), "attention: key/value row mismatch");
  require(heads > 0 && width % heads == 0, "attention: width not divisible by heads");
  const std::size_t n = qv.rows(), m = kv.rows(), d = width / heads;
  const bool segmented = !segments.empty();
  if (segmented) {
    require(segments.size() == n, "attention: need one segment per query");
    require(segment_len > 0 && m % segment_len == 0, "attention: keys not divisible into segments");
  }
  const std::size_t len = segmented ? segment_len : m;
  std::vector<std::size_t> start(n, 0);
  for (std::size_t i = 0; i < n && segmented; ++i) {
    require((segments[i] + 1) * segment_len <= m, "attention: segment out of range");
    start[i] = segments[i] * segment_len;
  }
  const double sc = 1.0 / std::sqrt(static_cast<double>(d));
  Tensor probs({n, heads, len});
  Tensor out({n, width});
  std::vector<double> s(len);
  for (std::size_t i = 0; i < n; ++i) {
    if (probe) probe->record(len);
    for (std::size_t h = 0; h < heads; ++h) {
      const double* qi = qv.ptr() + i * width + h * d;
      double mx = -INFINITY;
      for (std::size_t j = 0; j < len; ++j) {
        const double* kj = kv.ptr() + (start[i] + j) * width + h * d;
        double acc = 0.0;
        for (std::size_t e = 0; e < d; ++e) acc += qi[e] * kj[e];
        s[j] = acc * sc;
        mx = std::max(mx, s[j]);
      }
      double z = 0.0;
      for (std::size_t j = 0; j < len; ++j) z += (s[j] = std::exp(s[j] - mx));
      double* p = probs.ptr() + (i * heads + h) * len;
      double* oi = out.ptr() + i * width + h * d;
      for (std::size_t j = 0; j < len; ++j) {
        p[j] = s[j] / z;
        const double* vj = vv.ptr() + (start[i] + j) * width + h * d;
        for (std::size_t e = 0; e < d; ++e) oi[e] += p[j] * vj[e];
      }
    }
  }
  return tape_of(q).record(
      std::move(out), {q, k, v},
      [q, k, v, heads, n, d, width, len, sc, start = std::move(start), probs = std::move(probs)](const Tensor& g) {
        Tape& t = *q.tape;
        const Tensor& qv = t.value(q);
        const Tensor& kv = t.value(k);
        const Tensor& vv = t.value(v);
        Tensor* dq = t.requires_grad(q) ? &t.accumulate(q) : nullptr;
        Tensor* dk = t.requires_grad(k) ? &t.accumulate(k) : nullptr;
        Tensor* dv = t.requires_grad(v) ? &t.accumulate(v) : nullptr;
        std::vector<double> dp(len);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t h = 0; h < heads; ++h) {
            const double* p = probs.ptr() + (i * heads + h) * len;
            const double* gi = g.ptr() + i * width + h * d;
            double dot = 0.0;
            for (std::size_t j = 0; j < len; ++j) {
              const std::size_t row = start[i] + j;
              const double* vj = vv.ptr() + row * width + h * d;
              double acc = 0.0;
              for (std::size_t e = 0; e < d; ++e) acc += gi[e] * vj[e];
              dp[j] = acc;
              dot += p[j] * acc;
              if (dv) {
                double* dvj = dv->ptr() + row * width + h * d;
                for (std::size_t e = 0; e < d; ++e) dvj[e] += p[j] * gi[e];
              }
            }
            const double* qi = qv.ptr() + i * width + h * d;
            for (std::size_t j = 0; j < len; ++j) {
              const double ds = p[j] * (dp[j] - dot) * sc;
              const std::size_t row = start[i] + j;
              if (dq) {
                const double* kj = kv.ptr() + row * width + h * d;
                double* dqi = dq->ptr() + i * width + h * d;
                for (std::size_t e = 0; e < d; ++e) dqi[e] += ds * kj[e];
              }
              if (dk) {
                double* dkj = dk->ptr() + row * width + h * d;
                for (std::size_t e = 0; e < d; ++e) dkj[e] += ds * qi[e];
              }
            }
          }
        }
      });
}

Var straight_through(Var soft, Tensor forward_value) {
  require(forward_value.shape() == soft.value().shape(), "straight_through: shape mismatch");
  return tape_of(soft).record(std::move(forward_value), {soft},
                              [soft](const Tensor& g) { axpy(soft.tape->accumulate(soft).data(), g.data()); });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return tape_of(x).record(Tensor::scalar(s), {x}, [x](const Tensor& g) {
    for (double& v : x.tape->accumulate(x).data()) v += g[0];
  });
}

Var mean(Var x) {
  const double n = static_cast<double>(x.value().size());
  return scale(sum(x), 1.0 / n);
}

Var mse(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same(av, bv, "mse");
  const double n = static_cast<double>(av.size());
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += (av[i] - bv[i]) * (av[i] - bv[i]);
  return tape_of(a).record(Tensor::scalar(s / n), {a, b}, [a, b, n](const Tensor& g) {
    Tape& t = *a.tape;
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    const double f = 2.0 * g[0] / n;
    if (t.requires_grad(a)) {
      Tensor& ga = t.accumulate(a);
      for (std::size_t i = 0; i < av.size(); ++i) ga[i] += f * (av[i] - bv[i]);
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.accumulate(b);
      for (std::size_t i = 0; i < av.size(); ++i) gb[i] -= f * (av[i] - bv[i]);
    }
  });
}

}  // namespace roar::ops
