#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "aag/error.hpp"
#include "aag/ops.hpp"

namespace aag {

enum class LossKind { GntXent, NtXent };

inline const char* to_string(LossKind kind) {
  return kind == LossKind::GntXent ? "gnt_xent" : "nt_xent";
}

// Three embedding matrices of one batch: core views x, y and auxiliary view z.
// z may be empty (0 rows) when the run uses only two views.
template <class T>
struct BatchEmbeddings {
  MatX<T> x, y, z;
  bool has_aux() const { return z.rows() > 0; }
};

template <class T>
struct ScaledSimilarities {
  T tau = T(0);
  bool has_aux = false;
  MatX<T> s_xy, s_xx, s_yy, s_zx, s_zy;  // entry (i,j) = dot(row_i, row_j) / tau
  std::int64_t n() const { return s_xy.rows(); }
};

template <class T>
struct SimilarityGrads {
  MatX<T> g_xy, g_xx, g_yy, g_zx, g_zy;
};

template <class T>
struct LossReport {
  T total = T(0);
  T l_xy = T(0), l_zx = T(0), l_zy = T(0);  // per-component batch means
  T mean_pos_sim = T(0);   // raw cosine, averaged over positive pairs
  T mean_neg_sim = T(0);   // raw cosine, averaged over negative-term entries
  T grad_pos = T(0);       // mean per-log-term d/d(scaled positive)
  T grad_neg_sum = T(0);   // mean per-log-term sum of negative gradients
};

template <class T>
struct ThreeViewLossResult {
  LossReport<T> report;
  SimilarityGrads<T> grads;  // d(total)/d(each scaled-similarity entry)
  // Per-log-term diagnostics, before the 1/n batch mean: d(term)/d(pos) and
  // the sum of that term's negative gradients. GNT-Xent pins these to -1 and
  // +1; NT-Xent attenuates both by the same sigmoid factor.
  std::vector<T> term_pos_grads;
  std::vector<T> term_neg_grad_sums;
};

template <class T>
struct FullLossResult {
  LossReport<T> report;
  MatX<T> dx, dy, dz;  // gradients of report.total w.r.t. the embedding rows
};

namespace detail {

template <class T>
void check_embeddings(const BatchEmbeddings<T>& emb) {
  const auto n = emb.x.rows(), d = emb.x.cols();
  if (n < 2) throw ValueError("loss needs batch size >= 2, got " + std::to_string(n));
  if (emb.y.rows() != n || emb.y.cols() != d) {
    throw DimensionError("embedding matrices x and y disagree in shape");
  }
  if (emb.has_aux() && (emb.z.rows() != n || emb.z.cols() != d)) {
    throw DimensionError("auxiliary embedding matrix z disagrees in shape");
  }
  auto check_norms = [&](const MatX<T>& m, const char* name) {
    for (std::int64_t i = 0; i < m.rows(); ++i) {
      const T nrm = m.row(i).norm();
      if (std::abs(nrm - T(1)) > T(1e-3)) {
        throw ValueError(std::string("embedding rows of ") + name +
                         " must be unit-norm; row " + std::to_string(i) + " has norm " +
                         std::to_string(static_cast<double>(nrm)));
      }
    }
  };
  check_norms(emb.x, "x");
  check_norms(emb.y, "y");
  if (emb.has_aux()) check_norms(emb.z, "z");
}

// One InfoNCE-style log-term. `each(fn)` must invoke fn(value, grad_ref) for
// every negative of the term. Returns the term value and accumulates
// gradients: grad(pos) -= w, grad(neg_k) += w * softmax_k(negs), where w = 1
// for GNT-Xent and w = sigmoid(lse(negs) - pos) for NT-Xent.
template <class T>
struct TermStats {
  T value, weight, neg_grad_sum;
};

template <class T, class ForEachNeg>
TermStats<T> log_term(LossKind kind, T pos, T& pos_grad, ForEachNeg&& each) {
  T max_neg = -std::numeric_limits<T>::infinity();
  each([&](T v, T&) {
    if (v > max_neg) max_neg = v;
  });
  T denom = T(0);
  each([&](T v, T&) { denom += std::exp(v - max_neg); });
  const T lse = max_neg + std::log(denom);
  const T gap = lse - pos;

  T value, weight;
  if (kind == LossKind::GntXent) {
    value = gap;
    weight = T(1);
  } else {
    // -log(e^pos / (e^pos + sum e^neg)) = softplus(lse - pos), stably.
    value = gap > T(0) ? gap + std::log1p(std::exp(-gap)) : std::log1p(std::exp(gap));
    weight = gap >= T(0) ? T(1) / (T(1) + std::exp(-gap)) : std::exp(gap) / (T(1) + std::exp(gap));
  }

  pos_grad -= weight;
  T neg_grad_sum = T(0);
  each([&](T v, T& g) {
    const T soft = std::exp(v - max_neg) / denom;
    g += weight * soft;
    neg_grad_sum += weight * soft;
  });
  return {value, weight, neg_grad_sum};
}

}  // namespace detail

template <class T>
ScaledSimilarities<T> similarity_matrices(const BatchEmbeddings<T>& emb, T tau) {
  if (!(tau > T(0))) throw ValueError("temperature must be > 0");
  detail::check_embeddings(emb);
  ScaledSimilarities<T> sims;
  sims.tau = tau;
  sims.has_aux = emb.has_aux();
  const T inv = T(1) / tau;
  sims.s_xy = (emb.x * emb.y.transpose()) * inv;
  sims.s_xx = (emb.x * emb.x.transpose()) * inv;
  sims.s_yy = (emb.y * emb.y.transpose()) * inv;
  if (sims.has_aux) {
    sims.s_zx = (emb.z * emb.x.transpose()) * inv;
    sims.s_zy = (emb.z * emb.y.transpose()) * inv;
  }
  return sims;
}

// Loss plus gradients of the total w.r.t. every scaled-similarity entry.
// Per image i the three components are
//   L_xy_i = -S_xy(i,i) + term over the 4(n-1) core-core negatives
//            {S_xy(i,j), S_xy(j,i), S_xx(i,j), S_yy(i,j) : j != i},
//   L_zx_i = two log-terms sharing positive S_zx(i,i): row negatives
//            {S_zx(i,j)} and column negatives {S_zx(j,i)}, j != i,
//   L_zy_i analogous; total = mean_i of the sum. The S_xx/S_yy diagonals
//   never appear. NT-Xent adds e^{pos} into each denominator; the shared
//   log-term kernel covers both.
template <class T>
ThreeViewLossResult<T> three_view_loss_with_grads(const ScaledSimilarities<T>& sims,
                                                  LossKind kind) {
  const std::int64_t n = sims.n();
  if (n < 2) throw ValueError("loss needs batch size >= 2");
  if (!(sims.tau > T(0))) throw ValueError("temperature must be > 0");

  ThreeViewLossResult<T> result;
  SimilarityGrads<T>& grads = result.grads;
  grads.g_xy = MatX<T>::Zero(n, n);
  grads.g_xx = MatX<T>::Zero(n, n);
  grads.g_yy = MatX<T>::Zero(n, n);
  if (sims.has_aux) {
    grads.g_zx = MatX<T>::Zero(n, n);
    grads.g_zy = MatX<T>::Zero(n, n);
  }

  LossReport<T>& report = result.report;
  T pos_sim_acc = T(0), neg_sim_acc = T(0);
  std::int64_t pos_count = 0, neg_count = 0;

  auto note_term = [&](T dpos_contrib, T neg_sum) {
    result.term_pos_grads.push_back(dpos_contrib);
    result.term_neg_grad_sums.push_back(neg_sum);
  };

  for (std::int64_t i = 0; i < n; ++i) {
    {
      auto each = [&](auto&& fn) {
        for (std::int64_t j = 0; j < n; ++j) {
          if (j == i) continue;
          fn(sims.s_xy(i, j), grads.g_xy(i, j));
          fn(sims.s_xy(j, i), grads.g_xy(j, i));
          fn(sims.s_xx(i, j), grads.g_xx(i, j));
          fn(sims.s_yy(i, j), grads.g_yy(i, j));
        }
      };
      auto st = detail::log_term<T>(kind, sims.s_xy(i, i), grads.g_xy(i, i), each);
      report.l_xy += st.value;
      note_term(-st.weight, st.neg_grad_sum);
      pos_sim_acc += sims.s_xy(i, i) * sims.tau;
      ++pos_count;
      for (std::int64_t j = 0; j < n; ++j) {
        if (j == i) continue;
        neg_sim_acc += (sims.s_xy(i, j) + sims.s_xy(j, i) + sims.s_xx(i, j) + sims.s_yy(i, j)) *
                       sims.tau;
        neg_count += 4;
      }
    }
    if (sims.has_aux) {
      auto aux_pair = [&](const MatX<T>& s, MatX<T>& g, T& comp) {
        auto row = [&](auto&& fn) {
          for (std::int64_t j = 0; j < n; ++j) {
            if (j != i) fn(s(i, j), g(i, j));
          }
        };
        auto col = [&](auto&& fn) {
          for (std::int64_t j = 0; j < n; ++j) {
            if (j != i) fn(s(j, i), g(j, i));
          }
        };
        auto st_row = detail::log_term<T>(kind, s(i, i), g(i, i), row);
        auto st_col = detail::log_term<T>(kind, s(i, i), g(i, i), col);
        comp += st_row.value + st_col.value;
        note_term(-st_row.weight, st_row.neg_grad_sum);
        note_term(-st_col.weight, st_col.neg_grad_sum);
        pos_sim_acc += s(i, i) * sims.tau;
        ++pos_count;
        for (std::int64_t j = 0; j < n; ++j) {
          if (j == i) continue;
          neg_sim_acc += (s(i, j) + s(j, i)) * sims.tau;
          neg_count += 2;
        }
      };
      aux_pair(sims.s_zx, grads.g_zx, report.l_zx);
      aux_pair(sims.s_zy, grads.g_zy, report.l_zy);
    }
  }

  const T inv_n = T(1) / static_cast<T>(n);
  report.l_xy *= inv_n;
  report.l_zx *= inv_n;
  report.l_zy *= inv_n;
  report.total = report.l_xy + report.l_zx + report.l_zy;
  report.mean_pos_sim = pos_sim_acc / static_cast<T>(pos_count);
  report.mean_neg_sim = neg_sim_acc / static_cast<T>(neg_count);
  T grad_pos_acc = T(0), grad_neg_acc = T(0);
  for (T v : result.term_pos_grads) grad_pos_acc += v;
  for (T v : result.term_neg_grad_sums) grad_neg_acc += v;
  report.grad_pos = grad_pos_acc / static_cast<T>(result.term_pos_grads.size());
  report.grad_neg_sum = grad_neg_acc / static_cast<T>(result.term_neg_grad_sums.size());

  grads.g_xy *= inv_n;
  grads.g_xx *= inv_n;
  grads.g_yy *= inv_n;
  if (sims.has_aux) {
    grads.g_zx *= inv_n;
    grads.g_zy *= inv_n;
  }
  return result;
}

template <class T>
LossReport<T> gnt_xent(const ScaledSimilarities<T>& sims) {
  return three_view_loss_with_grads(sims, LossKind::GntXent).report;
}

template <class T>
SimilarityGrads<T> gnt_xent_similarity_grads(const ScaledSimilarities<T>& sims) {
  return std::move(three_view_loss_with_grads(sims, LossKind::GntXent).grads);
}

// Scalar NT-Xent term: -log(e^pos / (e^pos + sum_k e^{neg_k})).
template <class T>
struct NtXentResult {
  T loss;
  T dpos;
  std::vector<T> dnegs;
};

template <class T>
NtXentResult<T> nt_xent(T pos, const std::vector<T>& negs) {
  if (negs.empty()) throw ValueError("nt_xent needs at least one negative");
  NtXentResult<T> r;
  r.dnegs.assign(negs.size(), T(0));
  T dummy_pos_grad = T(0);
  std::size_t idx;
  auto each = [&](auto&& fn) {
    idx = 0;
    for (T v : negs) fn(v, r.dnegs[idx++]);
  };
  auto st = detail::log_term<T>(LossKind::NtXent, pos, dummy_pos_grad, each);
  r.loss = st.value;
  r.dpos = dummy_pos_grad;
  return r;
}

// Chains similarity-level gradients through the dot products and the 1/tau
// scaling into gradients over the raw embedding rows.
template <class T>
FullLossResult<T> full_loss_backward(const BatchEmbeddings<T>& emb, T tau, LossKind kind) {
  auto sims = similarity_matrices(emb, tau);
  auto lr = three_view_loss_with_grads(sims, kind);
  const SimilarityGrads<T>& g = lr.grads;
  FullLossResult<T> out;
  out.report = lr.report;
  const T inv = T(1) / tau;
  out.dx = (g.g_xy * emb.y + (g.g_xx + g.g_xx.transpose()) * emb.x) * inv;
  out.dy = (g.g_xy.transpose() * emb.x + (g.g_yy + g.g_yy.transpose()) * emb.y) * inv;
  if (sims.has_aux) {
    out.dx += g.g_zx.transpose() * emb.z * inv;
    out.dy += g.g_zy.transpose() * emb.z * inv;
    out.dz = (g.g_zx * emb.x + g.g_zy * emb.y) * inv;
  } else {
    out.dz.resize(0, emb.x.cols());
  }
  return out;
}

}  // namespace aag
