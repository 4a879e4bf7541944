#include "casd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "casd/error.hpp"

namespace casd {

namespace {

constexpr double kKlFloor = 1e-12;

void require_rank(Var v, std::size_t rank, const char* op) {
  if (v.value().rank() != rank) {
    fail(ErrorKind::kDimension, std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                                    shape_str(v.shape()));
  }
}

// Element-wise binary op with optional single-element broadcast on either side.
// da/db return ∂out/∂a and ∂out/∂b given (a, b, out).
template <class F, class DA, class DB>
Var binary(const char* op, Var a, Var b, F f, DA da, DB db) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  bool a_scalar = av.size() == 1;
  bool b_scalar = bv.size() == 1;
  if (av.shape() != bv.shape() && !a_scalar && !b_scalar) {
    fail(ErrorKind::kDimension,
         std::string(op) + ": shape mismatch " + shape_str(av.shape()) + " vs " + shape_str(bv.shape()));
  }
  const Shape& out_shape = (a_scalar && !b_scalar) ? bv.shape() : av.shape();
  Tensor out(out_shape);
  std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) out[i] = f(av[a_scalar ? 0 : i], bv[b_scalar ? 0 : i]);
  return a.tape().record(op, std::move(out), {a, b},
                         [a, b, a_scalar, b_scalar, da, db, n](const Tensor& g, std::span<Tensor* const> gi) {
                           const Tensor& av = a.value();
                           const Tensor& bv = b.value();
                           for (std::size_t i = 0; i < n; ++i) {
                             double x = av[a_scalar ? 0 : i];
                             double y = bv[b_scalar ? 0 : i];
                             if (gi[0]) (*gi[0])[a_scalar ? 0 : i] += g[i] * da(x, y);
                             if (gi[1]) (*gi[1])[b_scalar ? 0 : i] += g[i] * db(x, y);
                           }
                         });
}

template <class F, class D>
Var unary(const char* op, Var a, F f, D d) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  return a.tape().record(op, std::move(out), {a}, [a, d](const Tensor& g, std::span<Tensor* const> gi) {
    const Tensor& av = a.value();
    Tensor& ga = *gi[0];
    for (std::size_t i = 0; i < av.size(); ++i) ga[i] += g[i] * d(av[i]);
  });
}

double softplus_value(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

void softmax_row(std::span<const double> x, std::span<double> y, double temperature) {
  double mx = *std::max_element(x.begin(), x.end());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = std::exp((x[i] - mx) / temperature);
    total += y[i];
  }
  for (double& v : y) v /= total;
}

std::size_t row_count(const Tensor& t) { return t.size() / t.shape().back(); }

}  // namespace

namespace tensor_ops {

Tensor softmax(const Tensor& x, double temperature) {
  if (!(temperature > 0.0)) fail(ErrorKind::kConfig, "softmax temperature must be positive");
  Tensor y(x.shape());
  for (std::size_t r = 0; r < row_count(x); ++r) softmax_row(x.row(r), y.row(r), temperature);
  return y;
}

double softplus(double x) { return softplus_value(x); }

}  // namespace tensor_ops

Var matmul(Var a, Var b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
  if (B.dim(0) != k) {
    fail(ErrorKind::kDimension,
         "matmul: inner extents differ " + shape_str(A.shape()) + " · " + shape_str(B.shape()));
  }
  Tensor C({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      double aip = A[i * k + p];
      const double* brow = &B[p * n];
      double* crow = &C[i * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  return a.tape().record("matmul", std::move(C), {a, b}, [a, b, m, k, n](const Tensor& g, std::span<Tensor* const> gi) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (gi[0]) {
      Tensor& gA = *gi[0];
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * B[p * n + j];
          gA[i * k + p] += acc;
        }
    }
    if (gi[1]) {
      Tensor& gB = *gi[1];
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double aip = A[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gB[p * n + j] += aip * g[i * n + j];
        }
    }
  });
}

Var transpose(Var a) {
  require_rank(a, 2, "transpose");
  const Tensor& A = a.value();
  std::size_t m = A.dim(0), n = A.dim(1);
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = A[i * n + j];
  return a.tape().record("transpose", std::move(out), {a}, [m, n](const Tensor& g, std::span<Tensor* const> gi) {
    Tensor& ga = *gi[0];
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
  });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.tape().record("reshape", std::move(out), {a}, [](const Tensor& g, std::span<Tensor* const> gi) {
    Tensor& ga = *gi[0];
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var add(Var a, Var b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var div(Var a, Var b) {
  return binary(
      "div", a, b, [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Var add_bias(Var x, Var bias) {
  const Tensor& X = x.value();
  const Tensor& B = bias.value();
  require_rank(bias, 1, "add_bias");
  std::size_t n = X.shape().back();
  if (B.size() != n) {
    fail(ErrorKind::kDimension, "add_bias: bias " + shape_str(B.shape()) + " vs input " + shape_str(X.shape()));
  }
  Tensor out = X;
  std::size_t rows = row_count(X);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] += B[j];
  return x.tape().record("add_bias", std::move(out), {x, bias},
                         [rows, n](const Tensor& g, std::span<Tensor* const> gi) {
                           if (gi[0]) *gi[0] += g;
                           if (gi[1]) {
                             Tensor& gb = *gi[1];
                             for (std::size_t r = 0; r < rows; ++r)
                               for (std::size_t j = 0; j < n; ++j) gb[j] += g[r * n + j];
                           }
                         });
}

Var scale(Var a, double factor) {
  return unary(
      "scale", a, [factor](double x) { return x * factor; }, [factor](double) { return factor; });
}

Var add_scalar(Var a, double offset) {
  return unary(
      "add_scalar", a, [offset](double x) { return x + offset; }, [](double) { return 1.0; });
}

Var neg(Var a) {
  return unary(
      "neg", a, [](double x) { return -x; }, [](double) { return -1.0; });
}

Var exp(Var a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Var log(Var a) {
  for (double x : a.value().data()) {
    if (!(x > 0.0)) fail(ErrorKind::kDomain, "log of non-positive value");
  }
  return unary(
      "log", a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Var sqrt(Var a) {
  for (double x : a.value().data()) {
    if (x < 0.0) fail(ErrorKind::kDomain, "sqrt of negative value");
  }
  // d/dx √x is unbounded at 0; the gradient there is taken as 0.
  return unary(
      "sqrt", a, [](double x) { return std::sqrt(x); },
      [](double x) { return x > 0.0 ? 0.5 / std::sqrt(x) : 0.0; });
}

Var square(Var a) {
  return unary(
      "square", a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Var softplus(Var a) { return unary("softplus", a, softplus_value, sigmoid); }

Var clamp_min(Var a, double floor) {
  return unary(
      "clamp_min", a, [floor](double x) { return std::max(x, floor); },
      [floor](double x) { return x >= floor ? 1.0 : 0.0; });
}

Var minimum(std::span<const Var> scalars) {
  if (scalars.empty()) fail(ErrorKind::kDimension, "minimum of no values");
  std::size_t best = 0;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    if (scalars[i].size() != 1) fail(ErrorKind::kDimension, "minimum expects single-element inputs");
    if (scalars[i].value()[0] < scalars[best].value()[0]) best = i;
  }
  std::vector<Var> inputs(scalars.begin(), scalars.end());
  return scalars[0].tape().record("minimum", scalars[best].value(), inputs,
                                  [best](const Tensor& g, std::span<Tensor* const> gi) {
                                    if (gi[best]) (*gi[best])[0] += g[0];
                                  });
}

Var sum(Var a) {
  double total = 0.0;
  for (double x : a.value().data()) total += x;
  return a.tape().record("sum", Tensor::scalar(total), {a}, [](const Tensor& g, std::span<Tensor* const> gi) {
    for (double& x : gi[0]->data()) x += g[0];
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Var mean_pool(Var x) {
  require_rank(x, 2, "mean_pool");
  const Tensor& X = x.value();
  std::size_t T = X.dim(0), d = X.dim(1);
  Tensor out({d});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < d; ++j) out[j] += X[t * d + j];
  out *= 1.0 / static_cast<double>(T);
  return x.tape().record("mean_pool", std::move(out), {x}, [T, d](const Tensor& g, std::span<Tensor* const> gi) {
    Tensor& gx = *gi[0];
    double inv = 1.0 / static_cast<double>(T);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < d; ++j) gx[t * d + j] += g[j] * inv;
  });
}

Var conv1d_same(Var x, Var w, Var b) {
  require_rank(x, 2, "conv1d_same");
  require_rank(w, 3, "conv1d_same");
  require_rank(b, 1, "conv1d_same");
  const Tensor& X = x.value();
  const Tensor& W = w.value();
  const Tensor& B = b.value();
  std::size_t T = X.dim(0), din = X.dim(1), dout = W.dim(2);
  if (W.dim(0) != 3 || W.dim(1) != din || B.size() != dout) {
    fail(ErrorKind::kDimension, "conv1d_same: input " + shape_str(X.shape()) + ", kernel " + shape_str(W.shape()) +
                                    ", bias " + shape_str(B.shape()));
  }
  Tensor Y({T, dout});
  for (std::size_t t = 0; t < T; ++t) {
    double* y = &Y[t * dout];
    for (std::size_t o = 0; o < dout; ++o) y[o] = B[o];
    for (std::size_t k = 0; k < 3; ++k) {
      if ((t == 0 && k == 0) || t + k - 1 >= T) continue;
      const double* xr = &X[(t + k - 1) * din];
      for (std::size_t i = 0; i < din; ++i) {
        const double* wr = &W[(k * din + i) * dout];
        for (std::size_t o = 0; o < dout; ++o) y[o] += xr[i] * wr[o];
      }
    }
  }
  return x.tape().record(
      "conv1d_same", std::move(Y), {x, w, b}, [x, w, T, din, dout](const Tensor& g, std::span<Tensor* const> gi) {
        const Tensor& X = x.value();
        const Tensor& W = w.value();
        for (std::size_t t = 0; t < T; ++t) {
          const double* gy = &g[t * dout];
          if (gi[2]) {
            for (std::size_t o = 0; o < dout; ++o) (*gi[2])[o] += gy[o];
          }
          for (std::size_t k = 0; k < 3; ++k) {
            if ((t == 0 && k == 0) || t + k - 1 >= T) continue;
            std::size_t src = t + k - 1;
            for (std::size_t i = 0; i < din; ++i) {
              std::size_t wbase = (k * din + i) * dout;
              if (gi[0]) {
                double acc = 0.0;
                for (std::size_t o = 0; o < dout; ++o) acc += gy[o] * W[wbase + o];
                (*gi[0])[src * din + i] += acc;
              }
              if (gi[1]) {
                double xv = X[src * din + i];
                for (std::size_t o = 0; o < dout; ++o) (*gi[1])[wbase + o] += xv * gy[o];
              }
            }
          }
        }
      });
}

Var softmax(Var x, double temperature) {
  Tensor y = tensor_ops::softmax(x.value(), temperature);
  std::size_t rows = row_count(y);
  std::size_t n = y.shape().back();
  Tensor y_copy = y;
  return x.tape().record(
      "softmax", std::move(y), {x},
      [y = std::move(y_copy), rows, n, temperature](const Tensor& g, std::span<Tensor* const> gi) {
        Tensor& gx = *gi[0];
        for (std::size_t r = 0; r < rows; ++r) {
          double dot = 0.0;
          for (std::size_t j = 0; j < n; ++j) dot += g[r * n + j] * y[r * n + j];
          for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += y[r * n + j] * (g[r * n + j] - dot) / temperature;
        }
      });
}

Var log_softmax(Var x) {
  const Tensor& X = x.value();
  std::size_t rows = row_count(X);
  std::size_t n = X.shape().back();
  Tensor out(X.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    auto xr = X.row(r);
    double mx = *std::max_element(xr.begin(), xr.end());
    double total = 0.0;
    for (double v : xr) total += std::exp(v - mx);
    double lse = mx + std::log(total);
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = xr[j] - lse;
  }
  Tensor out_copy = out;
  return x.tape().record("log_softmax", std::move(out), {x},
                         [y = std::move(out_copy), rows, n](const Tensor& g, std::span<Tensor* const> gi) {
                           Tensor& gx = *gi[0];
                           for (std::size_t r = 0; r < rows; ++r) {
                             double gsum = 0.0;
                             for (std::size_t j = 0; j < n; ++j) gsum += g[r * n + j];
                             for (std::size_t j = 0; j < n; ++j)
                               gx[r * n + j] += g[r * n + j] - std::exp(y[r * n + j]) * gsum;
                           }
                         });
}

Var pick(Var x, std::size_t index) {
  if (index >= x.size()) {
    fail(ErrorKind::kDimension, "pick: index " + std::to_string(index) + " out of " + shape_str(x.shape()));
  }
  return x.tape().record("pick", Tensor::scalar(x.value()[index]), {x},
                         [index](const Tensor& g, std::span<Tensor* const> gi) { (*gi[0])[index] += g[0]; });
}

Var kl_div(Var p, Var q) {
  const Tensor& P = p.value();
  const Tensor& Q = q.value();
  require_same_shape(P, Q, "kl_div");
  for (const Tensor* t : {&P, &Q}) {
    double total = 0.0;
    for (double v : t->data()) {
      if (v < 0.0) fail(ErrorKind::kDomain, "kl_div: negative probability");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) fail(ErrorKind::kDomain, "kl_div: distribution does not sum to 1");
  }
  double value = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    if (P[i] > 0.0) value += P[i] * (std::log(P[i]) - std::log(std::max(Q[i], kKlFloor)));
  }
  return p.tape().record("kl_div", Tensor::scalar(value), {p, q}, [p, q](const Tensor& g, std::span<Tensor* const> gi) {
    const Tensor& P = p.value();
    const Tensor& Q = q.value();
    for (std::size_t i = 0; i < P.size(); ++i) {
      double qf = std::max(Q[i], kKlFloor);
      if (gi[0] && P[i] > 0.0) (*gi[0])[i] += g[0] * (std::log(P[i]) - std::log(qf) + 1.0);
      if (gi[1] && Q[i] >= kKlFloor) (*gi[1])[i] += g[0] * (-P[i] / qf);
    }
  });
}

Var stop_gradient(Var a) { return a.tape().constant(a.value()); }

}  // namespace casd
