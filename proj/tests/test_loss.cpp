#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "aag/loss.hpp"
#include "naive_loss.hpp"

using namespace aag;

namespace {

ScaledSimilarities<double> constant_sims(std::int64_t n, double value, double tau = 0.1,
                                         bool has_aux = true) {
  ScaledSimilarities<double> s;
  s.tau = tau;
  s.has_aux = has_aux;
  s.s_xy = MatX<double>::Constant(n, n, value);
  s.s_xx = MatX<double>::Constant(n, n, value);
  s.s_yy = MatX<double>::Constant(n, n, value);
  if (has_aux) {
    s.s_zx = MatX<double>::Constant(n, n, value);
    s.s_zy = MatX<double>::Constant(n, n, value);
  }
  return s;
}

}  // namespace

TEST_CASE("similarity matrices: identical views give unit diagonal at tau 1") {
  Rng rng(5);
  BatchEmbeddings<double> emb;
  emb.x = naive::random_unit_rows(rng, 4, 8);
  emb.y = emb.x;
  emb.z = naive::random_unit_rows(rng, 4, 8);
  auto sims = similarity_matrices(emb, 1.0);
  for (std::int64_t i = 0; i < 4; ++i) CHECK(sims.s_xy(i, i) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("similarity matrices: orthogonal rows give zero off-diagonal") {
  BatchEmbeddings<double> emb;
  emb.x = MatX<double>::Identity(3, 3);
  emb.y = MatX<double>::Identity(3, 3);
  emb.z = MatX<double>::Identity(3, 3);
  auto sims = similarity_matrices(emb, 0.5);
  for (std::int64_t i = 0; i < 3; ++i) {
    for (std::int64_t j = 0; j < 3; ++j) {
      if (i != j) CHECK(sims.s_xy(i, j) == doctest::Approx(0.0));
    }
  }
}

TEST_CASE("similarity matrices match a scalar double-loop oracle") {
  Rng rng(6);
  auto emb = naive::random_embeddings(rng, 4, 8);
  const double tau = 0.1;
  auto sims = similarity_matrices(emb, tau);
  for (std::int64_t i = 0; i < 4; ++i) {
    for (std::int64_t j = 0; j < 4; ++j) {
      double xy = 0, xx = 0, zx = 0;
      for (std::int64_t k = 0; k < 8; ++k) {
        xy += emb.x(i, k) * emb.y(j, k);
        xx += emb.x(i, k) * emb.x(j, k);
        zx += emb.z(i, k) * emb.x(j, k);
      }
      CHECK(sims.s_xy(i, j) == doctest::Approx(xy / tau).epsilon(1e-6));
      CHECK(sims.s_xx(i, j) == doctest::Approx(xx / tau).epsilon(1e-6));
      CHECK(sims.s_zx(i, j) == doctest::Approx(zx / tau).epsilon(1e-6));
    }
  }
  // scaled entries bounded by 1/tau since raw cosines live in [-1, 1]
  CHECK(sims.s_xy.cwiseAbs().maxCoeff() <= 1.0 / tau + 1e-9);
  // self-similarity diagonals of the core matrices
  for (std::int64_t i = 0; i < 4; ++i) {
    CHECK(sims.s_xx(i, i) == doctest::Approx(1.0 / tau).epsilon(1e-9));
    CHECK(sims.s_yy(i, i) == doctest::Approx(1.0 / tau).epsilon(1e-9));
  }
}

TEST_CASE("similarity matrices reject non-positive temperature") {
  Rng rng(7);
  auto emb = naive::random_embeddings(rng, 2, 4);
  CHECK_THROWS_AS((void)similarity_matrices(emb, 0.0), ValueError);
  CHECK_THROWS_AS((void)similarity_matrices(emb, -0.1), ValueError);
}

TEST_CASE("embedding validation: batch of one and shape mismatches are rejected") {
  Rng rng(8);
  auto one = naive::random_embeddings(rng, 1, 4);
  CHECK_THROWS_AS((void)similarity_matrices(one, 0.1), ValueError);

  auto emb = naive::random_embeddings(rng, 3, 4);
  emb.y = naive::random_unit_rows(rng, 4, 4);  // row count disagrees
  CHECK_THROWS_AS((void)similarity_matrices(emb, 0.1), DimensionError);

  auto scaled = naive::random_embeddings(rng, 3, 4);
  scaled.x.row(0) *= 1.5;  // far outside the unit-norm tolerance
  CHECK_THROWS_AS((void)similarity_matrices(scaled, 0.1), ValueError);
}

TEST_CASE("closed form: n=2 all-equal sims give total log 4") {
  auto report = gnt_xent(constant_sims(2, 0.7));
  CHECK(report.l_xy == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(std::abs(report.l_zx) <= 1e-9);
  CHECK(std::abs(report.l_zy) <= 1e-9);
  CHECK(std::abs(report.total - std::log(4.0)) <= 1e-9);
}

TEST_CASE("closed form: all-equal sims for n in {2,3,5,17}") {
  for (std::int64_t n : {2, 3, 5, 17}) {
    for (double value : {-3.0, 0.0, 2.5}) {
      auto report = gnt_xent(constant_sims(n, value));
      const double nd = static_cast<double>(n);
      CHECK(std::abs(report.l_xy - std::log(4.0 * (nd - 1.0))) <= 1e-9);
      CHECK(std::abs(report.l_zx - 2.0 * std::log(nd - 1.0)) <= 1e-9);
      CHECK(std::abs(report.l_zy - 2.0 * std::log(nd - 1.0)) <= 1e-9);
      CHECK(std::abs(report.total -
                     (std::log(4.0 * (nd - 1.0)) + 4.0 * std::log(nd - 1.0))) <= 1e-9);
    }
  }
}

TEST_CASE("nt_xent scalar examples") {
  auto equal = nt_xent(0.4, std::vector<double>{0.4});
  CHECK(equal.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  auto ex = nt_xent(1.0, std::vector<double>{0.0, 0.0});
  CHECK(ex.loss == doctest::Approx(-std::log(std::exp(1.0) / (std::exp(1.0) + 2.0))).epsilon(1e-12));

  CHECK_THROWS_AS((void)nt_xent(1.0, std::vector<double>{}), ValueError);
}

TEST_CASE("nt_xent attenuation: |d/dpos| strictly decreasing, loss to zero") {
  const std::vector<double> negs{0.3, -0.5, 0.1};
  double prev_mag = 2.0;
  double prev_loss = 1e300;
  for (double pos = -10.0; pos <= 10.0 + 1e-9; pos += 0.5) {
    auto r = nt_xent(pos, negs);
    const double mag = std::abs(r.dpos);
    CHECK(mag < prev_mag);
    CHECK(r.loss < prev_loss);
    prev_mag = mag;
    prev_loss = r.loss;
  }
  CHECK(nt_xent(40.0, negs).loss <= 1e-9);
  CHECK(std::abs(nt_xent(40.0, negs).dpos) <= 1e-9);
}

TEST_CASE("vectorized loss equals the naive double-loop oracle") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const std::int64_t n = 2 + static_cast<std::int64_t>(rng.uniform_int(15));
    const std::int64_t d = 4 + static_cast<std::int64_t>(rng.uniform_int(29));
    auto emb = naive::random_embeddings(rng, n, d);
    const double tau = 0.1 + rng.uniform() * 0.9;
    auto sims = similarity_matrices(emb, tau);

    auto gnt = gnt_xent(sims);
    auto want = naive::components(sims, LossKind::GntXent);
    CHECK(std::abs(gnt.total - want.total()) <= 1e-6);
    CHECK(std::abs(gnt.l_xy - want.l_xy) <= 1e-6);
    CHECK(std::abs(gnt.l_zx - want.l_zx) <= 1e-6);
    CHECK(std::abs(gnt.l_zy - want.l_zy) <= 1e-6);

    auto nt = three_view_loss_with_grads(sims, LossKind::NtXent);
    auto want_nt = naive::components(sims, LossKind::NtXent);
    CHECK(std::abs(nt.report.total - want_nt.total()) <= 1e-6);
  }
}

TEST_CASE("report total is the sum of the three component means") {
  Rng rng(19);
  auto sims = similarity_matrices(naive::random_embeddings(rng, 6, 12), 0.2);
  auto report = gnt_xent(sims);
  CHECK(report.total == doctest::Approx(report.l_xy + report.l_zx + report.l_zy).epsilon(1e-12));
}

TEST_CASE("two-view batches zero the aux components") {
  Rng rng(21);
  auto emb = naive::random_embeddings(rng, 5, 8, /*with_aux=*/false);
  auto sims = similarity_matrices(emb, 0.1);
  auto report = gnt_xent(sims);
  CHECK(report.l_zx == 0.0);
  CHECK(report.l_zy == 0.0);
  CHECK(std::abs(report.total - naive::total(sims, LossKind::GntXent)) <= 1e-6);
  CHECK(report.total == doctest::Approx(report.l_xy).epsilon(1e-12));
}

TEST_CASE("batch permutation leaves the loss invariant and permutes gradients") {
  Rng rng(23);
  const std::int64_t n = 6, d = 10;
  auto emb = naive::random_embeddings(rng, n, d);
  auto base = full_loss_backward(emb, 0.1, LossKind::GntXent);

  std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  BatchEmbeddings<double> permuted;
  permuted.x.resize(n, d);
  permuted.y.resize(n, d);
  permuted.z.resize(n, d);
  for (std::int64_t i = 0; i < n; ++i) {
    permuted.x.row(i) = emb.x.row(perm[static_cast<std::size_t>(i)]);
    permuted.y.row(i) = emb.y.row(perm[static_cast<std::size_t>(i)]);
    permuted.z.row(i) = emb.z.row(perm[static_cast<std::size_t>(i)]);
  }
  auto shuffled = full_loss_backward(permuted, 0.1, LossKind::GntXent);
  CHECK(std::abs(shuffled.report.total - base.report.total) <= 1e-9);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < d; ++j) {
      CHECK(shuffled.dx(i, j) ==
            doctest::Approx(base.dx(perm[static_cast<std::size_t>(i)], j)).epsilon(1e-9));
      CHECK(shuffled.dz(i, j) ==
            doctest::Approx(base.dz(perm[static_cast<std::size_t>(i)], j)).epsilon(1e-9));
    }
  }
}

TEST_CASE("doubling tau halves every scaled similarity") {
  Rng rng(29);
  auto emb = naive::random_embeddings(rng, 4, 8);
  auto sims1 = similarity_matrices(emb, 0.1);
  auto sims2 = similarity_matrices(emb, 0.2);
  CHECK((sims2.s_xy - 0.5 * sims1.s_xy).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((sims2.s_zx - 0.5 * sims1.s_zx).cwiseAbs().maxCoeff() <= 1e-12);
  // and the loss at the doubled tau still matches the oracle on its own sims
  CHECK(std::abs(gnt_xent(sims2).total - naive::total(sims2, LossKind::GntXent)) <= 1e-6);
}

TEST_CASE("GNT-Xent is unbounded below along an increasing positive gap") {
  const std::int64_t n = 4;
  double prev_gnt = 1e300;
  for (double gap : {0.0, 2.0, 4.0, 8.0, 16.0, 32.0}) {
    auto sims = constant_sims(n, -1.0);
    for (std::int64_t i = 0; i < n; ++i) {
      sims.s_xy(i, i) = -1.0 + gap;
      sims.s_zx(i, i) = -1.0 + gap;
      sims.s_zy(i, i) = -1.0 + gap;
    }
    const double gnt = gnt_xent(sims).total;
    CHECK(gnt < prev_gnt);
    prev_gnt = gnt;

    // NT-Xent keeps its zero floor on the same inputs
    CHECK(three_view_loss_with_grads(sims, LossKind::NtXent).report.total >= 0.0);
  }
  CHECK(prev_gnt < -100.0);  // no zero floor
}

TEST_CASE("log-sum-exp stability at tau 0.01") {
  Rng rng(31);
  auto emb = naive::random_embeddings(rng, 8, 16);
  // force a +-1/tau extreme: identical x/y rows put +100 on the diagonal
  emb.y.row(0) = emb.x.row(0);
  emb.y.row(1) = -emb.x.row(1);
  auto res = full_loss_backward(emb, 0.01, LossKind::GntXent);
  CHECK(std::isfinite(res.report.total));
  CHECK(res.dx.allFinite());
  CHECK(res.dy.allFinite());
  CHECK(res.dz.allFinite());

  auto nt = full_loss_backward(emb, 0.01, LossKind::NtXent);
  CHECK(std::isfinite(nt.report.total));
  CHECK(nt.dx.allFinite());

  // same property in 32-bit, where naive exponentials would overflow
  BatchEmbeddings<float> fem;
  fem.x = emb.x.cast<float>();
  fem.y = emb.y.cast<float>();
  fem.z = emb.z.cast<float>();
  auto fres = full_loss_backward(fem, 0.01f, LossKind::GntXent);
  CHECK(std::isfinite(fres.report.total));
  CHECK(fres.dx.allFinite());
}

TEST_CASE("positive-pair gradients are exactly -1 per log-term") {
  Rng rng(37);
  for (std::int64_t n : {2, 3, 6}) {
    auto sims = similarity_matrices(naive::random_embeddings(rng, n, 8), 0.1);
    auto res = three_view_loss_with_grads(sims, LossKind::GntXent);
    CHECK(res.term_pos_grads.size() == static_cast<std::size_t>(5 * n));
    for (double g : res.term_pos_grads) CHECK(g == -1.0);
    for (double s : res.term_neg_grad_sums) CHECK(std::abs(s - 1.0) <= 1e-9);

    // per image, the two zx log-terms stack to exactly -2 on the diagonal
    for (std::int64_t i = 0; i < n; ++i) {
      CHECK(res.grads.g_zx(i, i) * static_cast<double>(n) == doctest::Approx(-2.0).epsilon(1e-12));
      CHECK(res.grads.g_zy(i, i) * static_cast<double>(n) == doctest::Approx(-2.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("n=2 zx log-terms have a single negative with softmax weight 1") {
  Rng rng(41);
  auto sims = similarity_matrices(naive::random_embeddings(rng, 2, 8), 0.1);
  auto res = three_view_loss_with_grads(sims, LossKind::GntXent);
  // each zx off-diagonal is the lone negative of one row term and one column
  // term: two weight-1 contributions, scaled by 1/n = 1/2
  CHECK(res.grads.g_zx(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(res.grads.g_zx(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("diagnostics average raw cosines over positives and negative entries") {
  Rng rng(43);
  const std::int64_t n = 5, d = 8;
  auto emb = naive::random_embeddings(rng, n, d);
  const double tau = 0.25;
  auto res = three_view_loss_with_grads(similarity_matrices(emb, tau), LossKind::GntXent);

  double pos_sum = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    pos_sum += emb.x.row(i).dot(emb.y.row(i));
    pos_sum += emb.z.row(i).dot(emb.x.row(i));
    pos_sum += emb.z.row(i).dot(emb.y.row(i));
  }
  CHECK(res.report.mean_pos_sim == doctest::Approx(pos_sum / (3.0 * n)).epsilon(1e-9));

  double neg_sum = 0;
  std::int64_t neg_count = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      if (j == i) continue;
      neg_sum += emb.x.row(i).dot(emb.y.row(j));
      neg_sum += emb.x.row(j).dot(emb.y.row(i));
      neg_sum += emb.x.row(i).dot(emb.x.row(j));
      neg_sum += emb.y.row(i).dot(emb.y.row(j));
      neg_sum += emb.z.row(i).dot(emb.x.row(j));
      neg_sum += emb.z.row(j).dot(emb.x.row(i));
      neg_sum += emb.z.row(i).dot(emb.y.row(j));
      neg_sum += emb.z.row(j).dot(emb.y.row(i));
      neg_count += 8;
    }
  }
  CHECK(res.report.mean_neg_sim ==
        doctest::Approx(neg_sum / static_cast<double>(neg_count)).epsilon(1e-9));

  // identical views pin the positive diagnostic at exactly 1
  BatchEmbeddings<double> same;
  same.x = emb.x;
  same.y = emb.x;
  same.z = emb.x;
  auto same_res = three_view_loss_with_grads(similarity_matrices(same, tau), LossKind::GntXent);
  CHECK(same_res.report.mean_pos_sim == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("full_loss_backward gradients match finite differences over embeddings") {
  Rng rng(47);
  auto emb = naive::random_embeddings(rng, 3, 6);
  const double tau = 0.1;
  auto res = full_loss_backward(emb, tau, LossKind::GntXent);

  const double h = 1e-6;
  for (auto* mat : {&emb.x, &emb.z}) {
    MatX<double>* grad = mat == &emb.x ? &res.dx : &res.dz;
    for (std::int64_t i = 0; i < mat->rows(); ++i) {
      for (std::int64_t j = 0; j < mat->cols(); ++j) {
        const double saved = (*mat)(i, j);
        (*mat)(i, j) = saved + h;
        const double up = gnt_xent(similarity_matrices(emb, tau)).total;
        (*mat)(i, j) = saved - h;
        const double down = gnt_xent(similarity_matrices(emb, tau)).total;
        (*mat)(i, j) = saved;
        const double fd = (up - down) / (2 * h);
        CHECK(std::abs((*grad)(i, j) - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}
