#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "arena/core/tape.hpp"
#include "arena/core/tensor.hpp"

namespace arena {

// Normalization guard shared by every denominator in the substrate.
inline constexpr float kEps = 1e-6f;

namespace detail {

using EMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<EMat>;
using CMapM = Eigen::Map<const EMat>;

inline CMapM emap(const Tensor& t, std::int64_t r, std::int64_t c) {
  return CMapM(t.data(), r, c);
}
inline MapM emap(Tensor& t, std::int64_t r, std::int64_t c) { return MapM(t.data(), r, c); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and scalar ops
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
  return record(std::move(out), {a, b},
                [](const Tensor& g) { return std::vector<Tensor>{g, g}; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
  return record(std::move(out), {a, b}, [](const Tensor& g) {
    Tensor ng = Tensor::zeros(g.shape());
    for (std::int64_t i = 0; i < g.numel(); ++i) ng.data()[i] = -g.data()[i];
    return std::vector<Tensor>{g, ng};
  });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  return record(std::move(out), {a, b}, [a, b](const Tensor& g) {
    Tensor ga = Tensor::zeros(g.shape());
    Tensor gb = Tensor::zeros(g.shape());
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      ga.data()[i] = g.data()[i] * b.data()[i];
      gb.data()[i] = g.data()[i] * a.data()[i];
    }
    return std::vector<Tensor>{ga, gb};
  });
}

inline Tensor scale(const Tensor& a, float c) {
  Tensor out = Tensor::zeros(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] * c;
  return record(std::move(out), {a}, [c](const Tensor& g) {
    Tensor ga = Tensor::zeros(g.shape());
    for (std::int64_t i = 0; i < g.numel(); ++i) ga.data()[i] = g.data()[i] * c;
    return std::vector<Tensor>{ga};
  });
}

inline Tensor add_scalar(const Tensor& a, float c) {
  Tensor out = Tensor::zeros(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] + c;
  return record(std::move(out), {a}, [](const Tensor& g) { return std::vector<Tensor>{g}; });
}

inline Tensor relu(const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] > 0 ? a.data()[i] : 0.0f;
  return record(std::move(out), {a}, [a](const Tensor& g) {
    Tensor ga = Tensor::zeros(g.shape());
    for (std::int64_t i = 0; i < g.numel(); ++i) ga.data()[i] = a.data()[i] > 0 ? g.data()[i] : 0.0f;
    return std::vector<Tensor>{ga};
  });
}

// elu(x) + 1, with elu(x) = x for x > 0 else e^x - 1. Strictly positive.
inline float elu1_scalar(float x) { return x > 0 ? x + 1.0f : std::exp(x); }
inline float elu1_grad_scalar(float x) { return x > 0 ? 1.0f : std::exp(x); }

inline Tensor elu1(const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) out.data()[i] = elu1_scalar(a.data()[i]);
  return record(std::move(out), {a}, [a](const Tensor& g) {
    Tensor ga = Tensor::zeros(g.shape());
    for (std::int64_t i = 0; i < g.numel(); ++i)
      ga.data()[i] = g.data()[i] * elu1_grad_scalar(a.data()[i]);
    return std::vector<Tensor>{ga};
  });
}

inline Tensor exp_t(const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) out.data()[i] = std::exp(a.data()[i]);
  Tensor saved = out;
  return record(std::move(out), {a}, [saved](const Tensor& g) {
    Tensor ga = Tensor::zeros(g.shape());
    for (std::int64_t i = 0; i < g.numel(); ++i) ga.data()[i] = g.data()[i] * saved.data()[i];
    return std::vector<Tensor>{ga};
  });
}

// ---------------------------------------------------------------------------
// Matmul / transpose / reshape
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  Tensor out = Tensor::zeros({a.rows(), b.cols()});
  detail::emap(out, a.rows(), b.cols()).noalias() =
      detail::emap(a, a.rows(), a.cols()) * detail::emap(b, b.rows(), b.cols());
  return record(std::move(out), {a, b}, [a, b](const Tensor& g) {
    Tensor ga = Tensor::zeros(a.shape());
    Tensor gb = Tensor::zeros(b.shape());
    auto G = detail::emap(g, a.rows(), b.cols());
    detail::emap(ga, a.rows(), a.cols()).noalias() =
        G * detail::emap(b, b.rows(), b.cols()).transpose();
    detail::emap(gb, b.rows(), b.cols()).noalias() =
        detail::emap(a, a.rows(), a.cols()).transpose() * G;
    return std::vector<Tensor>{ga, gb};
  });
}

inline Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose: rank-2 required, got " + shape_str(a.shape()));
  Tensor out = Tensor::zeros({a.cols(), a.rows()});
  for (std::int64_t i = 0; i < a.rows(); ++i)
    for (std::int64_t j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
  return record(std::move(out), {a}, [](const Tensor& g) {
    Tensor ga = Tensor::zeros({g.cols(), g.rows()});
    for (std::int64_t i = 0; i < g.rows(); ++i)
      for (std::int64_t j = 0; j < g.cols(); ++j) ga.at(j, i) = g.at(i, j);
    return std::vector<Tensor>{ga};
  });
}

// Copying reshape: autodiff accumulators are keyed by storage identity, so
// views are not shared.
inline Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw ShapeError("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape));
  Tensor out = Tensor::zeros(shape);
  std::copy(a.data(), a.data() + a.numel(), out.data());
  Shape orig = a.shape();
  return record(std::move(out), {a}, [orig](const Tensor& g) {
    Tensor ga = Tensor::zeros(orig);
    std::copy(g.data(), g.data() + g.numel(), ga.data());
    return std::vector<Tensor>{ga};
  });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

inline Tensor sum_all(const Tensor& a) {
  double acc = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i) acc += a.data()[i];
  Tensor out = Tensor::scalar(static_cast<float>(acc));
  return record(std::move(out), {a}, [shape = a.shape()](const Tensor& g) {
    return std::vector<Tensor>{Tensor::full(shape, g.data()[0])};
  });
}

inline Tensor mean_all(const Tensor& a) { return scale(sum_all(a), 1.0f / static_cast<float>(a.numel())); }

// Row sums of a 2D tensor -> [N, 1].
inline Tensor row_sum(const Tensor& a) {
  Tensor out = Tensor::zeros({a.rows(), 1});
  for (std::int64_t i = 0; i < a.rows(); ++i) {
    double acc = 0;
    for (std::int64_t j = 0; j < a.cols(); ++j) acc += a.at(i, j);
    out.at(i, 0) = static_cast<float>(acc);
  }
  return record(std::move(out), {a}, [r = a.rows(), c = a.cols()](const Tensor& g) {
    Tensor ga = Tensor::zeros({r, c});
    for (std::int64_t i = 0; i < r; ++i)
      for (std::int64_t j = 0; j < c; ++j) ga.at(i, j) = g.at(i, 0);
    return std::vector<Tensor>{ga};
  });
}

// Row-wise logsumexp with max subtraction -> [N, 1].
inline Tensor row_logsumexp(const Tensor& a) {
  Tensor out = Tensor::zeros({a.rows(), 1});
  for (std::int64_t i = 0; i < a.rows(); ++i) {
    float mx = a.at(i, 0);
    for (std::int64_t j = 1; j < a.cols(); ++j) mx = std::max(mx, a.at(i, j));
    double acc = 0;
    for (std::int64_t j = 0; j < a.cols(); ++j) acc += std::exp(static_cast<double>(a.at(i, j) - mx));
    out.at(i, 0) = mx + static_cast<float>(std::log(acc));
  }
  Tensor saved = out;
  return record(std::move(out), {a}, [a, saved](const Tensor& g) {
    Tensor ga = Tensor::zeros(a.shape());
    for (std::int64_t i = 0; i < a.rows(); ++i)
      for (std::int64_t j = 0; j < a.cols(); ++j)
        ga.at(i, j) = g.at(i, 0) * std::exp(a.at(i, j) - saved.at(i, 0));
    return std::vector<Tensor>{ga};
  });
}

// ---------------------------------------------------------------------------
// Broadcast helpers over rows/columns
// ---------------------------------------------------------------------------

// X[i, j] + b[j]
inline Tensor add_rowvec(const Tensor& x, const Tensor& b) {
  if (x.rank() != 2 || b.numel() != x.cols())
    throw ShapeError("add_rowvec: " + shape_str(x.shape()) + " + " + shape_str(b.shape()));
  Tensor out = Tensor::zeros(x.shape());
  for (std::int64_t i = 0; i < x.rows(); ++i)
    for (std::int64_t j = 0; j < x.cols(); ++j) out.at(i, j) = x.at(i, j) + b.at(j);
  return record(std::move(out), {x, b}, [r = x.rows(), c = x.cols(), bs = b.shape()](const Tensor& g) {
    Tensor gb = Tensor::zeros(bs);
    for (std::int64_t i = 0; i < r; ++i)
      for (std::int64_t j = 0; j < c; ++j) gb.at(j) += g.at(i, j);
    return std::vector<Tensor>{g, gb};
  });
}

// X[i, j] * v[i]  (v is [N] or [N,1])
inline Tensor mul_colvec(const Tensor& x, const Tensor& v) {
  if (x.rank() != 2 || v.numel() != x.rows())
    throw ShapeError("mul_colvec: " + shape_str(x.shape()) + " * " + shape_str(v.shape()));
  Tensor out = Tensor::zeros(x.shape());
  for (std::int64_t i = 0; i < x.rows(); ++i)
    for (std::int64_t j = 0; j < x.cols(); ++j) out.at(i, j) = x.at(i, j) * v.at(i);
  return record(std::move(out), {x, v}, [x, v](const Tensor& g) {
    Tensor gx = Tensor::zeros(x.shape());
    Tensor gv = Tensor::zeros(v.shape());
    for (std::int64_t i = 0; i < x.rows(); ++i) {
      double acc = 0;
      for (std::int64_t j = 0; j < x.cols(); ++j) {
        gx.at(i, j) = g.at(i, j) * v.at(i);
        acc += static_cast<double>(g.at(i, j)) * x.at(i, j);
      }
      gv.at(i) = static_cast<float>(acc);
    }
    return std::vector<Tensor>{gx, gv};
  });
}

// X[i, j] / d[i], guarded by kEps.
inline Tensor div_colvec(const Tensor& x, const Tensor& d) {
  if (x.rank() != 2 || d.numel() != x.rows())
    throw ShapeError("div_colvec: " + shape_str(x.shape()) + " / " + shape_str(d.shape()));
  for (std::int64_t i = 0; i < d.numel(); ++i)
    if (std::fabs(d.at(i)) < kEps)
      throw NumericError("div_colvec: denominator " + std::to_string(d.at(i)) + " below epsilon at row " +
                         std::to_string(i));
  Tensor out = Tensor::zeros(x.shape());
  for (std::int64_t i = 0; i < x.rows(); ++i)
    for (std::int64_t j = 0; j < x.cols(); ++j) out.at(i, j) = x.at(i, j) / d.at(i);
  return record(std::move(out), {x, d}, [x, d](const Tensor& g) {
    Tensor gx = Tensor::zeros(x.shape());
    Tensor gd = Tensor::zeros(d.shape());
    for (std::int64_t i = 0; i < x.rows(); ++i) {
      double acc = 0;
      float di = d.at(i);
      for (std::int64_t j = 0; j < x.cols(); ++j) {
        gx.at(i, j) = g.at(i, j) / di;
        acc += static_cast<double>(g.at(i, j)) * x.at(i, j);
      }
      gd.at(i) = static_cast<float>(-acc / (static_cast<double>(di) * di));
    }
    return std::vector<Tensor>{gx, gd};
  });
}

// X[i, j] - v[i]  (log-space normalizations)
inline Tensor sub_colvec(const Tensor& x, const Tensor& v) {
  if (x.rank() != 2 || v.numel() != x.rows())
    throw ShapeError("sub_colvec: " + shape_str(x.shape()) + " - " + shape_str(v.shape()));
  Tensor out = Tensor::zeros(x.shape());
  for (std::int64_t i = 0; i < x.rows(); ++i)
    for (std::int64_t j = 0; j < x.cols(); ++j) out.at(i, j) = x.at(i, j) - v.at(i);
  return record(std::move(out), {x, v}, [r = x.rows(), c = x.cols(), vs = v.shape()](const Tensor& g) {
    Tensor gv = Tensor::zeros(vs);
    for (std::int64_t i = 0; i < r; ++i) {
      double acc = 0;
      for (std::int64_t j = 0; j < c; ++j) acc += g.at(i, j);
      gv.at(i) = static_cast<float>(-acc);
    }
    return std::vector<Tensor>{g, gv};
  });
}

// ---------------------------------------------------------------------------
// Structural ops: gather / slice / concat
// ---------------------------------------------------------------------------

inline Tensor gather_rows(const Tensor& x, const std::vector<std::int64_t>& idx) {
  if (x.rank() != 2) throw ShapeError("gather_rows: rank-2 required");
  Tensor out = Tensor::zeros({static_cast<std::int64_t>(idx.size()), x.cols()});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= x.rows())
      throw ShapeError("gather_rows: index " + std::to_string(idx[i]) + " out of range for " +
                       shape_str(x.shape()));
    std::copy(x.data() + idx[i] * x.cols(), x.data() + (idx[i] + 1) * x.cols(),
              out.data() + static_cast<std::int64_t>(i) * x.cols());
  }
  return record(std::move(out), {x}, [idx, r = x.rows(), c = x.cols()](const Tensor& g) {
    Tensor gx = Tensor::zeros({r, c});  // scatter-add
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::int64_t j = 0; j < c; ++j)
        gx.at(idx[i], j) += g.at(static_cast<std::int64_t>(i), j);
    return std::vector<Tensor>{gx};
  });
}

inline Tensor slice_rows(const Tensor& x, std::int64_t r0, std::int64_t r1) {
  if (x.rank() != 2 || r0 < 0 || r1 > x.rows() || r0 >= r1)
    throw ShapeError("slice_rows: [" + std::to_string(r0) + "," + std::to_string(r1) + ") of " +
                     shape_str(x.shape()));
  Tensor out = Tensor::zeros({r1 - r0, x.cols()});
  std::copy(x.data() + r0 * x.cols(), x.data() + r1 * x.cols(), out.data());
  return record(std::move(out), {x}, [r0, r = x.rows(), c = x.cols()](const Tensor& g) {
    Tensor gx = Tensor::zeros({r, c});
    std::copy(g.data(), g.data() + g.numel(), gx.data() + r0 * c);
    return std::vector<Tensor>{gx};
  });
}

inline Tensor slice_cols(const Tensor& x, std::int64_t c0, std::int64_t c1) {
  if (x.rank() != 2 || c0 < 0 || c1 > x.cols() || c0 >= c1)
    throw ShapeError("slice_cols: [" + std::to_string(c0) + "," + std::to_string(c1) + ") of " +
                     shape_str(x.shape()));
  Tensor out = Tensor::zeros({x.rows(), c1 - c0});
  for (std::int64_t i = 0; i < x.rows(); ++i)
    std::copy(x.data() + i * x.cols() + c0, x.data() + i * x.cols() + c1, out.data() + i * (c1 - c0));
  return record(std::move(out), {x}, [c0, r = x.rows(), c = x.cols()](const Tensor& g) {
    Tensor gx = Tensor::zeros({r, c});
    for (std::int64_t i = 0; i < r; ++i)
      std::copy(g.data() + i * g.cols(), g.data() + (i + 1) * g.cols(), gx.data() + i * c + c0);
    return std::vector<Tensor>{gx};
  });
}

inline Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: empty input");
  std::int64_t c = parts[0].cols(), r = 0;
  for (const auto& p : parts) {
    if (p.rank() != 2 || p.cols() != c) throw ShapeError("concat_rows: column mismatch");
    r += p.rows();
  }
  Tensor out = Tensor::zeros({r, c});
  std::int64_t off = 0;
  std::vector<std::int64_t> row_counts;
  for (const auto& p : parts) {
    std::copy(p.data(), p.data() + p.numel(), out.data() + off * c);
    off += p.rows();
    row_counts.push_back(p.rows());
  }
  return record(std::move(out), parts, [row_counts, c](const Tensor& g) {
    std::vector<Tensor> gs;
    std::int64_t off = 0;
    for (auto rc : row_counts) {
      Tensor gp = Tensor::zeros({rc, c});
      std::copy(g.data() + off * c, g.data() + (off + rc) * c, gp.data());
      gs.push_back(std::move(gp));
      off += rc;
    }
    return gs;
  });
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: empty input");
  std::int64_t r = parts[0].rows(), c = 0;
  for (const auto& p : parts) {
    if (p.rank() != 2 || p.rows() != r) throw ShapeError("concat_cols: row mismatch");
    c += p.cols();
  }
  Tensor out = Tensor::zeros({r, c});
  std::int64_t off = 0;
  std::vector<std::int64_t> col_counts;
  for (const auto& p : parts) {
    for (std::int64_t i = 0; i < r; ++i)
      std::copy(p.data() + i * p.cols(), p.data() + (i + 1) * p.cols(), out.data() + i * c + off);
    off += p.cols();
    col_counts.push_back(p.cols());
  }
  return record(std::move(out), parts, [col_counts, r, c](const Tensor& g) {
    std::vector<Tensor> gs;
    std::int64_t off = 0;
    for (auto cc : col_counts) {
      Tensor gp = Tensor::zeros({r, cc});
      for (std::int64_t i = 0; i < r; ++i)
        std::copy(g.data() + i * c + off, g.data() + i * c + off + cc, gp.data() + i * cc);
      gs.push_back(std::move(gp));
      off += cc;
    }
    return gs;
  });
}

// Pads a 2D tensor with zero rows up to total_rows.
inline Tensor pad_rows(const Tensor& x, std::int64_t total_rows) {
  if (total_rows == x.rows()) return x;
  if (total_rows < x.rows()) throw ShapeError("pad_rows: target smaller than input");
  return concat_rows({x, Tensor::zeros({total_rows - x.rows(), x.cols()})});
}

// ---------------------------------------------------------------------------
// Softmax / layer norm / cross entropy
// ---------------------------------------------------------------------------

// Row softmax with optional 0/1 mask (same shape). Masked-out entries are
// exactly zero; a fully masked row is an error. Max-subtracted.
inline Tensor softmax_rows(const Tensor& x, const std::optional<Tensor>& mask = std::nullopt) {
  if (x.rank() != 2) throw ShapeError("softmax_rows: rank-2 required, got " + shape_str(x.shape()));
  if (mask && mask->shape() != x.shape())
    throw ShapeError("softmax_rows: mask shape " + shape_str(mask->shape()) + " vs " +
                     shape_str(x.shape()));
  Tensor out = Tensor::zeros(x.shape());
  const float* mk = mask ? mask->data() : nullptr;
  for (std::int64_t i = 0; i < x.rows(); ++i) {
    float mx = -std::numeric_limits<float>::infinity();
    for (std::int64_t j = 0; j < x.cols(); ++j)
      if (!mk || mk[i * x.cols() + j] != 0.0f) mx = std::max(mx, x.at(i, j));
    if (mx == -std::numeric_limits<float>::infinity())
      throw NumericError("softmax_rows: fully masked row " + std::to_string(i));
    double denom = 0;
    for (std::int64_t j = 0; j < x.cols(); ++j) {
      if (!mk || mk[i * x.cols() + j] != 0.0f) denom += std::exp(static_cast<double>(x.at(i, j) - mx));
    }
    for (std::int64_t j = 0; j < x.cols(); ++j) {
      if (!mk || mk[i * x.cols() + j] != 0.0f)
        out.at(i, j) = static_cast<float>(std::exp(static_cast<double>(x.at(i, j) - mx)) / denom);
    }
  }
  Tensor w = out;
  std::vector<Tensor> ins = {x};
  if (mask) ins.push_back(*mask);  // non-differentiable input, kept alive only
  return record(std::move(out), std::move(ins), [w](const Tensor& g) {
    // dx = w * (g - sum_j g_j w_j), zero on masked entries since w there is 0.
    Tensor gx = Tensor::zeros(w.shape());
    for (std::int64_t i = 0; i < w.rows(); ++i) {
      double dot = 0;
      for (std::int64_t j = 0; j < w.cols(); ++j) dot += static_cast<double>(g.at(i, j)) * w.at(i, j);
      for (std::int64_t j = 0; j < w.cols(); ++j)
        gx.at(i, j) = w.at(i, j) * (g.at(i, j) - static_cast<float>(dot));
    }
    return std::vector<Tensor>{gx};
  });
}

// Per-row layer norm: y = (x - mu) / sqrt(var + eps) * gamma + beta.
inline Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                              float eps = 1e-5f) {
  if (x.rank() != 2 || gamma.numel() != x.cols() || beta.numel() != x.cols())
    throw ShapeError("layer_norm_rows: " + shape_str(x.shape()) + " with gamma " +
                     shape_str(gamma.shape()));
  std::int64_t n = x.rows(), d = x.cols();
  Tensor out = Tensor::zeros(x.shape());
  Tensor xhat = Tensor::zeros(x.shape());
  Tensor inv_std = Tensor::zeros({n, 1});
  for (std::int64_t i = 0; i < n; ++i) {
    double mu = 0;
    for (std::int64_t j = 0; j < d; ++j) mu += x.at(i, j);
    mu /= d;
    double var = 0;
    for (std::int64_t j = 0; j < d; ++j) {
      double c = x.at(i, j) - mu;
      var += c * c;
    }
    var /= d;
    float istd = static_cast<float>(1.0 / std::sqrt(var + eps));
    inv_std.at(i, 0) = istd;
    for (std::int64_t j = 0; j < d; ++j) {
      xhat.at(i, j) = (x.at(i, j) - static_cast<float>(mu)) * istd;
      out.at(i, j) = xhat.at(i, j) * gamma.at(j) + beta.at(j);
    }
  }
  return record(std::move(out), {x, gamma, beta}, [xhat, inv_std, gamma](const Tensor& g) {
    std::int64_t n = xhat.rows(), d = xhat.cols();
    Tensor gx = Tensor::zeros(xhat.shape());
    Tensor gg = Tensor::zeros(gamma.shape());
    Tensor gb = Tensor::zeros(gamma.shape());
    for (std::int64_t i = 0; i < n; ++i) {
      double m1 = 0, m2 = 0;
      for (std::int64_t j = 0; j < d; ++j) {
        double gy = static_cast<double>(g.at(i, j)) * gamma.at(j);
        m1 += gy;
        m2 += gy * xhat.at(i, j);
        gg.at(j) += g.at(i, j) * xhat.at(i, j);
        gb.at(j) += g.at(i, j);
      }
      m1 /= d;
      m2 /= d;
      for (std::int64_t j = 0; j < d; ++j) {
        double gy = static_cast<double>(g.at(i, j)) * gamma.at(j);
        gx.at(i, j) = static_cast<float>((gy - m1 - xhat.at(i, j) * m2) * inv_std.at(i, 0));
      }
    }
    return std::vector<Tensor>{gx, gg, gb};
  });
}

// Mean softmax cross entropy over rows of logits [N, C] against integer labels.
inline Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2 || static_cast<std::int64_t>(labels.size()) != logits.rows())
    throw ShapeError("cross_entropy: logits " + shape_str(logits.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  std::int64_t n = logits.rows(), c = logits.cols();
  Tensor probs = Tensor::zeros(logits.shape());
  double loss = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    if (labels[static_cast<std::size_t>(i)] < 0 || labels[static_cast<std::size_t>(i)] >= c)
      throw ParamError("cross_entropy: label out of range at row " + std::to_string(i));
    float mx = logits.at(i, 0);
    for (std::int64_t j = 1; j < c; ++j) mx = std::max(mx, logits.at(i, j));
    double denom = 0;
    for (std::int64_t j = 0; j < c; ++j) denom += std::exp(static_cast<double>(logits.at(i, j) - mx));
    for (std::int64_t j = 0; j < c; ++j)
      probs.at(i, j) = static_cast<float>(std::exp(static_cast<double>(logits.at(i, j) - mx)) / denom);
    loss -= logits.at(i, labels[static_cast<std::size_t>(i)]) - mx - std::log(denom);
  }
  Tensor out = Tensor::scalar(static_cast<float>(loss / n));
  return record(std::move(out), {logits}, [probs, labels](const Tensor& g) {
    std::int64_t n = probs.rows(), c = probs.cols();
    Tensor gl = Tensor::zeros(probs.shape());
    float s = g.data()[0] / static_cast<float>(n);
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < c; ++j)
        gl.at(i, j) = s * (probs.at(i, j) - (j == labels[static_cast<std::size_t>(i)] ? 1.0f : 0.0f));
    return std::vector<Tensor>{gl};
  });
}

}  // namespace arena
