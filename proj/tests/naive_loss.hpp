#pragma once

// Test-side oracle: the three-component loss written as plain scalar loops,
// no shared code with the library implementation and no log-sum-exp tricks.
// Valid for moderate scaled similarities (|s| small enough that exp is safe).

#include <cmath>
#include <stdexcept>
#include <vector>

#include "aag/loss.hpp"
#include "aag/rng.hpp"

namespace naive {

inline double log_term(aag::LossKind kind, double pos, const std::vector<double>& negs) {
  double denom = kind == aag::LossKind::NtXent ? std::exp(pos) : 0.0;
  for (double s : negs) denom += std::exp(s);
  return std::log(denom) - pos;
}

struct Components {
  double l_xy = 0, l_zx = 0, l_zy = 0;
  double total() const { return l_xy + l_zx + l_zy; }
};

inline Components components(const aag::ScaledSimilarities<double>& s, aag::LossKind kind) {
  const auto n = s.n();
  if (n < 2) throw std::invalid_argument("naive oracle needs n >= 2");
  Components out;
  for (std::int64_t i = 0; i < n; ++i) {
    std::vector<double> xy_negs;
    for (std::int64_t j = 0; j < n; ++j) {
      if (j == i) continue;
      xy_negs.push_back(s.s_xy(i, j));
      xy_negs.push_back(s.s_xy(j, i));
      xy_negs.push_back(s.s_xx(i, j));
      xy_negs.push_back(s.s_yy(i, j));
    }
    out.l_xy += log_term(kind, s.s_xy(i, i), xy_negs);

    if (s.has_aux) {
      std::vector<double> zx_row, zx_col, zy_row, zy_col;
      for (std::int64_t j = 0; j < n; ++j) {
        if (j == i) continue;
        zx_row.push_back(s.s_zx(i, j));
        zx_col.push_back(s.s_zx(j, i));
        zy_row.push_back(s.s_zy(i, j));
        zy_col.push_back(s.s_zy(j, i));
      }
      out.l_zx += log_term(kind, s.s_zx(i, i), zx_row) + log_term(kind, s.s_zx(i, i), zx_col);
      out.l_zy += log_term(kind, s.s_zy(i, i), zy_row) + log_term(kind, s.s_zy(i, i), zy_col);
    }
  }
  out.l_xy /= static_cast<double>(n);
  out.l_zx /= static_cast<double>(n);
  out.l_zy /= static_cast<double>(n);
  return out;
}

inline double total(const aag::ScaledSimilarities<double>& s, aag::LossKind kind) {
  return components(s, kind).total();
}

// Unit-row embeddings for building loss inputs.
inline aag::MatX<double> random_unit_rows(aag::Rng& rng, std::int64_t n, std::int64_t d) {
  aag::MatX<double> m(n, d);
  for (std::int64_t i = 0; i < n; ++i) {
    double norm2 = 0;
    do {
      for (std::int64_t j = 0; j < d; ++j) {
        m(i, j) = rng.normal();
      }
      norm2 = m.row(i).squaredNorm();
    } while (norm2 < 1e-12);
    m.row(i) /= std::sqrt(norm2);
  }
  return m;
}

inline aag::BatchEmbeddings<double> random_embeddings(aag::Rng& rng, std::int64_t n, std::int64_t d,
                                                      bool with_aux = true) {
  aag::BatchEmbeddings<double> emb;
  emb.x = random_unit_rows(rng, n, d);
  emb.y = random_unit_rows(rng, n, d);
  if (with_aux) {
    emb.z = random_unit_rows(rng, n, d);
  } else {
    emb.z.resize(0, d);
  }
  return emb;
}

}  // namespace naive
