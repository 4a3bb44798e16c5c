#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "arena/attention.hpp"
#include "testutil.hpp"

using namespace arena;
using namespace arena::attn;
using arena::test::gradient_check;
using arena::test::max_abs_diff;

namespace {

Tensor randn2(std::int64_t r, std::int64_t c, Rng& rng) { return Tensor::randn({r, c}, rng); }

// 64-bit brute force of softmax(QK^T/sqrt(d))V with optional boolean mask.
Tensor brute_force(const Tensor& q, const Tensor& k, const Tensor& v,
                   const std::vector<std::uint8_t>* mask = nullptr) {
  std::int64_t n = q.rows(), nk = k.rows(), d = q.cols(), dv = v.cols();
  Tensor out = Tensor::zeros({n, dv});
  double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::int64_t i = 0; i < n; ++i) {
    std::vector<double> logits(nk, -1e300);
    double mx = -1e300;
    for (std::int64_t j = 0; j < nk; ++j) {
      if (mask && !(*mask)[static_cast<std::size_t>(i * nk + j)]) continue;
      double s = 0;
      for (std::int64_t c = 0; c < d; ++c) s += static_cast<double>(q.at(i, c)) * k.at(j, c);
      logits[j] = s * inv_sqrt_d;
      mx = std::max(mx, logits[j]);
    }
    double den = 0;
    for (std::int64_t j = 0; j < nk; ++j)
      if (logits[j] > -1e299) den += std::exp(logits[j] - mx);
    for (std::int64_t j = 0; j < nk; ++j) {
      if (logits[j] <= -1e299) continue;
      double w = std::exp(logits[j] - mx) / den;
      for (std::int64_t c = 0; c < dv; ++c)
        out.at(i, c) += static_cast<float>(w * v.at(j, c));
    }
  }
  return out;
}

void check_weight_contract(const AttentionOutput& ao, const Tensor& v) {
  ASSERT_TRUE(ao.weights.has_value());
  const Tensor& w = *ao.weights;
  for (std::int64_t i = 0; i < w.rows(); ++i) {
    double s = 0;
    for (std::int64_t j = 0; j < w.cols(); ++j) {
      EXPECT_GE(w.at(i, j), 0.0f);
      s += w.at(i, j);
    }
    EXPECT_NEAR(s, 1.0, 1e-5);
  }
  EXPECT_LT(max_abs_diff(ao.output.detached(), matmul(w.detached(), v.detached())), 1e-5);
}

}  // namespace

// ---------------------------------------------------------------- full

TEST(Full, SingleToken) {
  Rng rng(1);
  Tensor q = randn2(1, 4, rng), k = randn2(1, 4, rng), v = randn2(1, 4, rng);
  auto ao = full_attention(q, k, v);
  EXPECT_LT(max_abs_diff(ao.output, v), 1e-6);
}

TEST(Full, ZeroQueriesUniform) {
  Rng rng(2);
  Tensor q = Tensor::zeros({5, 4}), k = randn2(5, 4, rng), v = randn2(5, 3, rng);
  auto ao = full_attention(q, k, v);
  for (std::int64_t c = 0; c < 3; ++c) {
    double mean = 0;
    for (std::int64_t j = 0; j < 5; ++j) mean += v.at(j, c);
    mean /= 5;
    for (std::int64_t i = 0; i < 5; ++i) EXPECT_NEAR(ao.output.at(i, c), mean, 1e-6);
  }
}

TEST(Full, BruteForceOracle) {
  Rng rng(3);
  for (int t = 0; t < 10; ++t) {
    Tensor q = randn2(8, 4, rng), k = randn2(8, 4, rng), v = randn2(8, 4, rng);
    auto ao = full_attention(q, k, v);
    EXPECT_LT(max_abs_diff(ao.output, brute_force(q, k, v)), 1e-5);
    check_weight_contract(ao, v);
  }
}

TEST(Full, AllPaddedThrows) {
  Rng rng(4);
  Tensor q = randn2(4, 4, rng), k = randn2(4, 4, rng), v = randn2(4, 4, rng);
  EXPECT_THROW(full_attention(q, k, v, 0), NumericError);
}

TEST(Full, PermutationEquivariance) {
  Rng rng(5);
  for (int t = 0; t < 5; ++t) {
    Tensor q = randn2(12, 6, rng), k = randn2(12, 6, rng), v = randn2(12, 6, rng);
    std::vector<std::int64_t> perm(12);
    for (std::int64_t i = 0; i < 12; ++i) perm[i] = i;
    rng.shuffle(perm);
    Tensor base = gather_rows(full_attention(q, k, v).output, perm);
    Tensor permuted =
        full_attention(gather_rows(q, perm), gather_rows(k, perm), gather_rows(v, perm)).output;
    EXPECT_LT(max_abs_diff(base, permuted), 1e-5);
  }
}

TEST(Full, Gradient) {
  Rng rng(6);
  std::vector<Tensor> in = {randn2(16, 8, rng), randn2(16, 8, rng), randn2(16, 8, rng)};
  auto f = [](const std::vector<Tensor>& x) {
    return sum_all(mul(full_attention(x[0], x[1], x[2]).output, x[2]));
  };
  EXPECT_LT(gradient_check(f, in), 1e-3);
}

// ---------------------------------------------------------------- patterns

TEST(Pattern, LocalWideIsAllTrue) {
  auto p = build_sparsity_pattern(PatternKind::local, {.window = 7}, 8);
  for (std::int64_t i = 0; i < 8; ++i)
    for (std::int64_t j = 0; j < 8; ++j) EXPECT_TRUE(p.at(i, j));
}

TEST(Pattern, LongformerGlobalRowColumn) {
  auto p = build_sparsity_pattern(PatternKind::longformer, {.window = 1, .global_tokens = 1}, 16);
  for (std::int64_t i = 0; i < 16; ++i) {
    EXPECT_TRUE(p.at(0, i));
    EXPECT_TRUE(p.at(i, 0));
  }
  EXPECT_FALSE(p.at(5, 10));
}

TEST(Pattern, StridedEnumeration) {
  auto p = build_sparsity_pattern(PatternKind::strided, {.window = 1, .stride = 2}, 4);
  for (std::int64_t i = 0; i < 4; ++i)
    for (std::int64_t j = 0; j < 4; ++j) {
      bool want = std::llabs(i - j) <= 1 || (i - j) % 2 == 0;
      EXPECT_EQ(p.at(i, j), want) << i << "," << j;
    }
}

TEST(Pattern, InvariantsEveryKind) {
  Rng rng(7);
  PatternParams params{.window = 2, .stride = 3, .global_tokens = 2, .random_per_row = 2};
  for (auto kind : {PatternKind::local, PatternKind::strided, PatternKind::fixed,
                    PatternKind::longformer, PatternKind::bigbird}) {
    auto p = build_sparsity_pattern(kind, params, 20, &rng);
    for (std::int64_t i = 0; i < 20; ++i) {
      EXPECT_TRUE(p.at(i, i));
      std::int64_t row = 0;
      for (std::int64_t j = 0; j < 20; ++j) row += p.at(i, j);
      EXPECT_GE(row, 1);
    }
  }
}

TEST(Pattern, ParamErrors) {
  EXPECT_THROW(build_sparsity_pattern(PatternKind::local, {.window = 0}, 8), ParamError);
  EXPECT_THROW(build_sparsity_pattern(PatternKind::strided, {.window = 1, .stride = 0}, 8),
               ParamError);
  EXPECT_THROW(build_sparsity_pattern(PatternKind::local, {.window = 1}, 0), ParamError);
  EXPECT_THROW(build_sparsity_pattern(PatternKind::bigbird, {}, 8, nullptr), ParamError);
}

TEST(Pattern, AllTrueEqualsFullBitwise) {
  Rng rng(8);
  Tensor q = randn2(10, 4, rng), k = randn2(10, 4, rng), v = randn2(10, 4, rng);
  auto p = build_sparsity_pattern(PatternKind::local, {.window = 16}, 10);
  Tensor a = pattern_attention(q, k, v, p).output;
  Tensor b = full_attention(q, k, v).output;
  for (std::int64_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a.data()[i], b.data()[i]);
}

TEST(Pattern, SingleEntryRows) {
  Rng rng(9);
  Tensor q = randn2(6, 4, rng), k = randn2(6, 4, rng), v = randn2(6, 4, rng);
  SparsityPattern p;
  p.n = 6;
  p.allowed.assign(36, 0);
  for (std::int64_t i = 0; i < 6; ++i) p.set(i, (i + 2) % 6);
  Tensor out = pattern_attention(q, k, v, p).output;
  for (std::int64_t i = 0; i < 6; ++i)
    for (std::int64_t c = 0; c < 4; ++c) EXPECT_NEAR(out.at(i, c), v.at((i + 2) % 6, c), 1e-6);
}

TEST(Pattern, MaskedBruteForceOracle) {
  Rng rng(10);
  for (int t = 0; t < 5; ++t) {
    Tensor q = randn2(12, 4, rng), k = randn2(12, 4, rng), v = randn2(12, 4, rng);
    SparsityPattern p;
    p.n = 12;
    p.allowed.assign(144, 0);
    for (std::int64_t i = 0; i < 12; ++i) {
      p.set(i, i);
      for (std::int64_t j = 0; j < 12; ++j)
        if (rng.bernoulli(0.3)) p.set(i, j);
    }
    auto ao = pattern_attention(q, k, v, p);
    EXPECT_LT(max_abs_diff(ao.output, brute_force(q, k, v, &p.allowed)), 1e-5);
    check_weight_contract(ao, v);
  }
}

TEST(Pattern, Gradient) {
  Rng rng(11);
  std::vector<Tensor> in = {randn2(16, 8, rng), randn2(16, 8, rng), randn2(16, 8, rng)};
  auto p = build_sparsity_pattern(PatternKind::local, {.window = 3}, 16);
  auto f = [p](const std::vector<Tensor>& x) {
    return sum_all(mul(pattern_attention(x[0], x[1], x[2], p).output, x[2]));
  };
  EXPECT_LT(gradient_check(f, in), 1e-3);
}

// ---------------------------------------------------------------- linformer

TEST(Linformer, IdentityProjectionReducesToFull) {
  Rng rng(12);
  for (int t = 0; t < 10; ++t) {
    std::int64_t n = 8 + 8 * t;
    Tensor q = randn2(n, 8, rng), k = randn2(n, 8, rng), v = randn2(n, 8, rng);
    Tensor eye = Tensor::zeros({n, n});
    for (std::int64_t i = 0; i < n; ++i) eye.at(i, i) = 1.0f;
    Tensor a = linformer_attention(q, k, v, eye, eye).output;
    Tensor b = full_attention(q, k, v).output;
    EXPECT_LT(max_abs_diff(a, b), 1e-5);
  }
}

TEST(Linformer, SingleSummaryKeyIsMean) {
  Rng rng(13);
  Tensor q = randn2(6, 4, rng), k = randn2(6, 4, rng), v = randn2(6, 4, rng);
  Tensor ones = Tensor::full({1, 6}, 1.0f / 6.0f);
  Tensor out = linformer_attention(q, k, v, ones, ones).output;
  for (std::int64_t i = 0; i < 6; ++i)
    for (std::int64_t c = 0; c < 4; ++c) {
      double mean = 0;
      for (std::int64_t j = 0; j < 6; ++j) mean += v.at(j, c);
      EXPECT_NEAR(out.at(i, c), mean / 6, 1e-6);
    }
}

TEST(Linformer, FormulaOracle) {
  Rng rng(14);
  Tensor q = randn2(16, 4, rng), k = randn2(16, 4, rng), v = randn2(16, 4, rng);
  Tensor e = randn2(4, 16, rng), f = randn2(4, 16, rng);
  Tensor out = linformer_attention(q, k, v, e, f).output;
  // 64-bit re-derivation of softmax(Q (EK)^T / sqrt(d)) (FV).
  Tensor ek = matmul(e, k), fv = matmul(f, v);
  EXPECT_LT(max_abs_diff(out, brute_force(q, ek, fv)), 1e-5);
}

TEST(Linformer, RankZeroThrows) {
  Rng rng(15);
  Tensor q = randn2(4, 4, rng);
  Tensor empty = Tensor::zeros({0, 4});
  EXPECT_THROW(linformer_attention(q, q, q, empty, empty), arena::Error);
}

TEST(Linformer, Gradient) {
  Rng rng(16);
  std::vector<Tensor> in = {randn2(16, 8, rng), randn2(16, 8, rng), randn2(16, 8, rng),
                            randn2(4, 16, rng), randn2(4, 16, rng)};
  auto f = [](const std::vector<Tensor>& x) {
    return sum_all(mul(linformer_attention(x[0], x[1], x[2], x[3], x[4]).output, x[2]));
  };
  EXPECT_LT(gradient_check(f, in), 1e-3);
}

TEST(Linformer, GradientSharedProjection) {
  Rng rng(17);
  std::vector<Tensor> in = {randn2(12, 6, rng), randn2(12, 6, rng), randn2(12, 6, rng),
                            randn2(3, 12, rng)};
  auto f = [](const std::vector<Tensor>& x) {
    return sum_all(mul(linformer_attention(x[0], x[1], x[2], x[3], x[3]).output, x[2]));
  };
  EXPECT_LT(gradient_check(f, in), 1e-3);
}

// ---------------------------------------------------------------- kernel

TEST(Kernel, SingleToken) {
  Rng rng(18);
  Tensor q = randn2(1, 4, rng), k = randn2(1, 4, rng), v = randn2(1, 4, rng);
  EXPECT_LT(max_abs_diff(kernel_attention(q, k, v, FeatureMap::elu1).output, v), 1e-6);
  Tensor w = favor_projection(4, 16, rng);
  EXPECT_LT(max_abs_diff(kernel_attention(q, k, v, FeatureMap::favor_plus, w).output, v), 1e-5);
}

TEST(Kernel, IdenticalKeysGiveMean) {
  Rng rng(19);
  Tensor q = randn2(6, 4, rng);
  Tensor k = Tensor::zeros({6, 4}), v = Tensor::zeros({6, 3});
  Tensor krow = randn2(1, 4, rng), vrow = randn2(1, 3, rng);
  for (std::int64_t i = 0; i < 6; ++i)
    for (std::int64_t c = 0; c < 4; ++c) k.at(i, c) = krow.at(0, c);
  for (std::int64_t i = 0; i < 6; ++i)
    for (std::int64_t c = 0; c < 3; ++c) v.at(i, c) = vrow.at(0, c);
  Tensor out = kernel_attention(q, k, v, FeatureMap::elu1).output;
  for (std::int64_t i = 0; i < 6; ++i)
    for (std::int64_t c = 0; c < 3; ++c) EXPECT_NEAR(out.at(i, c), vrow.at(0, c), 1e-5);
}

TEST(Kernel, Elu1QuadraticOracle) {
  Rng rng(20);
  for (int t = 0; t < 10; ++t) {
    Tensor q = randn2(8, 4, rng), k = randn2(8, 4, rng), v = randn2(8, 4, rng);
    Tensor out = kernel_attention(q, k, v, FeatureMap::elu1).output;
    // Quadratic brute force of the same phi-weighted average in 64-bit.
    Tensor want = Tensor::zeros({8, 4});
    for (std::int64_t i = 0; i < 8; ++i) {
      double den = 0;
      std::vector<double> w(8);
      for (std::int64_t j = 0; j < 8; ++j) {
        double s = 0;
        for (std::int64_t c = 0; c < 4; ++c)
          s += static_cast<double>(elu1_scalar(q.at(i, c))) * elu1_scalar(k.at(j, c));
        w[j] = s;
        den += s;
      }
      for (std::int64_t j = 0; j < 8; ++j)
        for (std::int64_t c = 0; c < 4; ++c)
          want.at(i, c) += static_cast<float>(w[j] / den * v.at(j, c));
    }
    EXPECT_LT(max_abs_diff(out, want), 1e-5);
  }
}

TEST(Kernel, GradientElu1) {
  Rng rng(21);
  std::vector<Tensor> in = {randn2(16, 8, rng), randn2(16, 8, rng), randn2(16, 8, rng)};
  auto f = [](const std::vector<Tensor>& x) {
    return sum_all(mul(kernel_attention(x[0], x[1], x[2], FeatureMap::elu1).output, x[2]));
  };
  EXPECT_LT(gradient_check(f, in), 1e-3);
}

TEST(Kernel, GradientFavorPlus) {
  Rng rng(22);
  Tensor w = favor_projection(8, 32, rng);
  std::vector<Tensor> in = {randn2(16, 8, rng), randn2(16, 8, rng), randn2(16, 8, rng)};
  auto f = [w](const std::vector<Tensor>& x) {
    return sum_all(mul(kernel_attention(x[0], x[1], x[2], FeatureMap::favor_plus, w).output, x[2]));
  };
  EXPECT_LT(gradient_check(f, in), 1e-3);
}

TEST(FeatureMap, ZeroVectorEstimatesOne) {
  Rng rng(23);
  Tensor x = Tensor::zeros({1, 8});
  Tensor phi = random_feature_map(x, 64, rng);
  double dot = 0;
  for (std::int64_t j = 0; j < 64; ++j) dot += static_cast<double>(phi.at(0, j)) * phi.at(0, j);
  EXPECT_NEAR(dot, 1.0, 1e-6);
}

TEST(FeatureMap, MonteCarloEstimatesExpDot) {
  Rng rng(24);
  Tensor q = randn2(1, 8, rng), k = randn2(1, 8, rng);
  double nq = 0, nk = 0;
  for (std::int64_t c = 0; c < 8; ++c) { nq += q.at(0, c) * q.at(0, c); nk += k.at(0, c) * k.at(0, c); }
  for (std::int64_t c = 0; c < 8; ++c) {
    q.at(0, c) = static_cast<float>(q.at(0, c) / std::sqrt(nq));
    k.at(0, c) = static_cast<float>(k.at(0, c) / std::sqrt(nk));
  }
  double dot = 0;
  for (std::int64_t c = 0; c < 8; ++c) dot += static_cast<double>(q.at(0, c)) * k.at(0, c);
  double accum = 0;
  for (int seed = 0; seed < 50; ++seed) {
    Rng r(100 + seed);
    Tensor w = favor_projection(8, 256, r);
    Tensor pq = random_feature_map(q, w), pk = random_feature_map(k, w);
    double est = 0;
    for (std::int64_t j = 0; j < 256; ++j) est += static_cast<double>(pq.at(0, j)) * pk.at(0, j);
    accum += est;
  }
  accum /= 50;
  double want = std::exp(dot);
  EXPECT_LT(std::fabs(accum - want) / want, 0.05);
}

TEST(FeatureMap, BlockOrthogonality) {
  Rng rng(25);
  Tensor w = favor_projection(16, 48, rng);  // three 16-row blocks
  for (std::int64_t b0 = 0; b0 < 48; b0 += 16)
    for (std::int64_t i = b0; i < b0 + 16; ++i)
      for (std::int64_t j = b0; j < i; ++j) {
        double dot = 0;
        for (std::int64_t c = 0; c < 16; ++c)
          dot += static_cast<double>(w.at(i, c)) * w.at(j, c);
        EXPECT_LT(std::fabs(dot), 1e-4) << i << "," << j;
      }
}

TEST(FeatureMap, AllPositive) {
  Rng rng(26);
  Tensor x = randn2(8, 4, rng);
  Tensor phi = random_feature_map(x, 32, rng);
  for (std::int64_t i = 0; i < phi.numel(); ++i) EXPECT_GT(phi.data()[i], 0.0f);
}

// ---------------------------------------------------------------- lsh

TEST(Lsh, IdenticalTokensShareBucket) {
  Rng rng(27);
  Tensor x = Tensor::zeros({16, 8});
  Tensor row = randn2(1, 8, rng);
  for (std::int64_t i = 0; i < 16; ++i)
    for (std::int64_t c = 0; c < 8; ++c) x.at(i, c) = row.at(0, c);
  for (int round = 0; round < 4; ++round) {
    auto ids = lsh_bucket_ids(x, 8, rng);
    for (std::int64_t i = 1; i < 16; ++i) EXPECT_EQ(ids[i], ids[0]);
  }
}

TEST(Lsh, SingleChunkNoExclusionReducesToFull) {
  for (int t = 0; t < 10; ++t) {
    Rng rng(200 + t);
    std::int64_t n = 8 + 8 * t;
    Tensor qk = randn2(n, 8, rng), v = randn2(n, 8, rng);
    Rng mech(300 + t);
    Tensor a = lsh_attention(qk, v, 1, n, mech, /*exclude_self=*/false).output;
    Tensor b = full_attention(qk, qk, v).output;
    EXPECT_LT(max_abs_diff(a, b), 1e-5);
  }
}

TEST(Lsh, ParamErrors) {
  Rng rng(28);
  Tensor x = randn2(4, 4, rng);
  EXPECT_THROW(lsh_attention(x, x, 0, 4, rng), ParamError);
  EXPECT_THROW(lsh_attention(x, x, 1, 0, rng), ParamError);
}

TEST(Lsh, ClusterMassStaysWithinCluster) {
  Rng rng(29);
  // Two well-separated clusters of tied query/keys.
  std::int64_t n = 32, d = 8;
  Tensor qk = Tensor::zeros({n, d});
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t c = 0; c < d; ++c)
      qk.at(i, c) = static_cast<float>((i < n / 2 ? 4.0 : -4.0) * (c == 0) + 0.05 * rng.normal());
  Tensor v = randn2(n, d, rng);
  Rng mech(30);
  auto ao = lsh_attention(qk, v, 4, 8, mech, true, /*capture_weights=*/true);
  ASSERT_TRUE(ao.weights.has_value());
  double within = 0, total = 0;
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      double w = ao.weights->at(i, j);
      total += w;
      if ((i < n / 2) == (j < n / 2)) within += w;
    }
  EXPECT_GT(within / total, 0.95);
}

TEST(Lsh, CapturedWeightsReproduceOutput) {
  Rng rng(31);
  Tensor qk = randn2(24, 6, rng), v = randn2(24, 6, rng);
  Rng mech(32);
  auto a = lsh_attention(qk, v, 2, 8, mech, true, true);
  ASSERT_TRUE(a.weights.has_value());
  EXPECT_LT(max_abs_diff(a.output.detached(), matmul(a.weights->detached(), v.detached())), 1e-4);
}

TEST(Lsh, Gradient) {
  Rng data(33);
  std::vector<Tensor> in = {randn2(16, 8, data), randn2(16, 8, data)};
  auto f = [](const std::vector<Tensor>& x) {
    Rng mech(34);  // same hashes every evaluation
    return sum_all(mul(lsh_attention(x[0], x[1], 2, 4, mech).output, x[1]));
  };
  EXPECT_LT(gradient_check(f, in), 1e-3);
}

// ---------------------------------------------------------------- sinkhorn

TEST(Sinkhorn, NormalizeDoublyStochastic) {
  Rng rng(35);
  Tensor s = randn2(4, 4, rng);
  Tensor p = sinkhorn_normalize(s, 8);
  for (std::int64_t i = 0; i < 4; ++i) {
    double rs = 0, cs = 0;
    for (std::int64_t j = 0; j < 4; ++j) { rs += p.at(i, j); cs += p.at(j, i); }
    EXPECT_NEAR(rs, 1.0, 1e-3);
    EXPECT_NEAR(cs, 1.0, 1e-3);
  }
}

TEST(Sinkhorn, NormalizeFixedPoint) {
  // log of a doubly stochastic matrix is already a fixed point.
  Tensor s = Tensor::full({4, 4}, std::log(0.25f));
  Tensor p = sinkhorn_normalize(s, 4);
  for (std::int64_t i = 0; i < 16; ++i) EXPECT_NEAR(p.data()[i], 0.25f, 1e-6);
}

TEST(Sinkhorn, SingleBlockReducesToFull) {
  for (int t = 0; t < 10; ++t) {
    Rng rng(400 + t);
    std::int64_t n = 8 + 8 * t;
    Tensor q = randn2(n, 8, rng), k = randn2(n, 8, rng), v = randn2(n, 8, rng);
    Tensor a = sinkhorn_attention(q, k, v, n, 8).output;
    Tensor b = full_attention(q, k, v).output;
    EXPECT_LT(max_abs_diff(a, b), 1e-5);
  }
}

TEST(Sinkhorn, NearIdentityMixingMatchesLocalBlocks) {
  // Block means strongly self-similar and cross-orthogonal: mixing ~ identity,
  // so each block behaves like stand-alone non-overlapping local attention.
  std::int64_t n = 16, d = 8, bs = 4;
  Rng rng(36);
  Tensor q = Tensor::zeros({n, d}), k = Tensor::zeros({n, d});
  Tensor v = randn2(n, d, rng);
  for (std::int64_t i = 0; i < n; ++i) {
    std::int64_t b = i / bs;
    q.at(i, b) = 60.0f;
    k.at(i, b) = 60.0f;
    q.at(i, (b + 4) % d) = static_cast<float>(rng.normal());
    k.at(i, (b + 4) % d) = static_cast<float>(rng.normal());
  }
  Tensor out = sinkhorn_attention(q, k, v, bs, 16).output;
  for (std::int64_t b = 0; b < n / bs; ++b) {
    Tensor qa = slice_rows(q, b * bs, (b + 1) * bs);
    Tensor ka = slice_rows(k, b * bs, (b + 1) * bs);
    Tensor va = slice_rows(v, b * bs, (b + 1) * bs);
    Tensor local = full_attention(qa, ka, va).output;
    EXPECT_LT(max_abs_diff(slice_rows(out, b * bs, (b + 1) * bs), local), 1e-3);
  }
}

TEST(Sinkhorn, ParamErrors) {
  Rng rng(37);
  Tensor x = randn2(8, 4, rng);
  EXPECT_THROW(sinkhorn_attention(x, x, x, 4, 0), ParamError);
  EXPECT_THROW(sinkhorn_attention(x, x, x, 0, 4), ParamError);
  EXPECT_THROW(sinkhorn_normalize(randn2(3, 4, rng), 2), ShapeError);
}

TEST(Sinkhorn, Gradient) {
  Rng rng(38);
  std::vector<Tensor> in = {randn2(16, 8, rng), randn2(16, 8, rng), randn2(16, 8, rng)};
  auto f = [](const std::vector<Tensor>& x) {
    return sum_all(mul(sinkhorn_attention(x[0], x[1], x[2], 4, 4).output, x[2]));
  };
  EXPECT_LT(gradient_check(f, in), 1e-3);
}

// ---------------------------------------------------------------- synthesizer

TEST(Synthesizer, RandomZeroLogitsUniform) {
  Rng rng(39);
  Tensor v = randn2(6, 4, rng);
  Tensor r = Tensor::zeros({6, 6});
  auto ao = synthesizer_random_attention(v, r);
  for (std::int64_t i = 0; i < 6; ++i)
    for (std::int64_t c = 0; c < 4; ++c) {
      double mean = 0;
      for (std::int64_t j = 0; j < 6; ++j) mean += v.at(j, c);
      EXPECT_NEAR(ao.output.at(i, c), mean / 6, 1e-6);
    }
  check_weight_contract(ao, v);
}

TEST(Synthesizer, SaturatedDiagonalIsIdentity) {
  Rng rng(40);
  Tensor v = randn2(8, 4, rng);
  Tensor r = Tensor::zeros({8, 8});
  for (std::int64_t i = 0; i < 8; ++i) r.at(i, i) = 1e9f;
  Tensor out = synthesizer_random_attention(v, r).output;
  EXPECT_LT(max_abs_diff(out, v), 1e-5);
}

TEST(Synthesizer, DenseFormulaOracle) {
  Rng rng(41);
  Tensor x = randn2(4, 6, rng), v = randn2(4, 6, rng);
  Tensor w1 = randn2(6, 10, rng), w2 = randn2(10, 4, rng);
  auto ao = synthesizer_dense_attention(x, v, w1, w2);
  // Hand-rolled two-layer projection oracle in 64-bit.
  Tensor want = Tensor::zeros({4, 6});
  for (std::int64_t i = 0; i < 4; ++i) {
    std::vector<double> hidden(10), logits(4);
    for (std::int64_t h = 0; h < 10; ++h) {
      double s = 0;
      for (std::int64_t c = 0; c < 6; ++c) s += static_cast<double>(x.at(i, c)) * w1.at(c, h);
      hidden[h] = std::max(0.0, s);
    }
    double mx = -1e300;
    for (std::int64_t j = 0; j < 4; ++j) {
      double s = 0;
      for (std::int64_t h = 0; h < 10; ++h) s += hidden[h] * w2.at(h, j);
      logits[j] = s;
      mx = std::max(mx, s);
    }
    double den = 0;
    for (std::int64_t j = 0; j < 4; ++j) den += std::exp(logits[j] - mx);
    for (std::int64_t j = 0; j < 4; ++j)
      for (std::int64_t c = 0; c < 6; ++c)
        want.at(i, c) += static_cast<float>(std::exp(logits[j] - mx) / den * v.at(j, c));
  }
  EXPECT_LT(max_abs_diff(ao.output, want), 1e-5);
  check_weight_contract(ao, v);
}

TEST(Synthesizer, LengthErrors) {
  Rng rng(42);
  Tensor x = randn2(8, 4, rng), v = randn2(8, 4, rng);
  Tensor w1 = randn2(4, 8, rng), w2 = randn2(8, 4, rng);  // width 4 < N=8
  EXPECT_THROW(synthesizer_dense_attention(x, v, w1, w2), ShapeError);
  EXPECT_THROW(synthesizer_random_attention(v, Tensor::zeros({4, 4})), ShapeError);
}

TEST(Synthesizer, DenseGradientAwayFromKinks) {
  Rng rng(43);
  // Positive inputs and first-layer weights keep relu pre-activations well
  // away from zero, where finite differences are valid.
  auto pos = [&](std::int64_t r, std::int64_t c) {
    Tensor t = Tensor::zeros({r, c});
    for (std::int64_t i = 0; i < t.numel(); ++i)
      t.data()[i] = static_cast<float>(0.2 + 0.5 * rng.uniform());
    return t;
  };
  std::vector<Tensor> in = {pos(6, 4), pos(6, 4), pos(4, 8), pos(8, 6)};
  auto f = [](const std::vector<Tensor>& x) {
    return sum_all(mul(synthesizer_dense_attention(x[0], x[1], x[2], x[3]).output, x[1]));
  };
  EXPECT_LT(gradient_check(f, in), 1e-3);
}

TEST(Synthesizer, RandomGradient) {
  Rng rng(44);
  std::vector<Tensor> in = {randn2(8, 4, rng), randn2(8, 8, rng)};
  auto f = [](const std::vector<Tensor>& x) {
    return sum_all(mul(synthesizer_random_attention(x[0], x[1]).output, x[0]));
  };
  EXPECT_LT(gradient_check(f, in), 1e-3);
}

// ---------------------------------------------------------------- memory scaling

TEST(MemoryScaling, LinearMechanismsStayFlatFullBlowsUp) {
  const std::int64_t d = 32, kproj = 64, m = 64;
  auto run = [&](std::int64_t n, int which) {
    Rng rng(45);
    Tensor q = randn2(n, d, rng), k = randn2(n, d, rng), v = randn2(n, d, rng);
    Tensor e = randn2(kproj, n, rng);
    Tensor w = favor_projection(d, m, rng);
    auto [out, peak] = measure_scope([&]() -> Tensor {
      NoGradGuard ng;
      if (which == 0) return full_attention(q, k, v).output;
      if (which == 1) return linformer_attention(q, k, v, e, e).output;
      return kernel_attention(q, k, v, FeatureMap::favor_plus, w).output;
    });
    (void)out;
    return static_cast<double>(peak);
  };
  double full_ratio = run(2048, 0) / run(1024, 0);
  double lin_ratio = run(2048, 1) / run(1024, 1);
  double ker_ratio = run(2048, 2) / run(1024, 2);
  EXPECT_GE(full_ratio, 3.5);
  EXPECT_LE(lin_ratio, 1.3);
  EXPECT_LE(ker_ratio, 1.3);
}

// ---------------------------------------------------------------- spec config

TEST(Spec, JsonRoundTrip) {
  AttentionSpec s;
  s.kind = Kind::sinkhorn;
  s.block_size = 32;
  s.sinkhorn_iters = 5;
  nlohmann::json j = s;
  AttentionSpec back = j.get<AttentionSpec>();
  EXPECT_EQ(back.kind, Kind::sinkhorn);
  EXPECT_EQ(back.block_size, 32);
  EXPECT_EQ(back.sinkhorn_iters, 5);
}

TEST(Spec, ValidateRejectsBadParams) {
  AttentionSpec s;
  s.kind = Kind::pattern;
  s.window = 0;
  EXPECT_THROW(s.validate(128), ParamError);
  s.window = 256;
  EXPECT_THROW(s.validate(128), ParamError);
  s.window = 8;
  EXPECT_NO_THROW(s.validate(128));
  s.kind = Kind::lsh;
  s.hash_rounds = 0;
  EXPECT_THROW(s.validate(128), ParamError);
}
