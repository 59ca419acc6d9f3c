#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "aag/loss.hpp"
#include "aag/model.hpp"
#include "aag/ops.hpp"
#include "aag/rng.hpp"
#include "aag/tensor.hpp"

namespace aag {

struct CheckResult {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct GradcheckOptions {
  std::uint64_t seed = 42;
  std::string corrupt_op;  // bias this check's analytic grads (negative control)
};

// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h, perturbing x in place.
template <class T, class F>
std::vector<T> finite_difference_gradient(F&& f, Tensor<T> x, T h) {
  if (!(h > T(0))) throw ValueError("finite_difference_gradient needs h > 0");
  std::vector<T> g(static_cast<std::size_t>(x.size()));
  T* p = x.data_ptr();
  for (std::int64_t i = 0; i < x.size(); ++i) {
    const T orig = p[i];
    p[i] = orig + h;
    const T fp = f(x);
    p[i] = orig - h;
    const T fm = f(x);
    p[i] = orig;
    g[static_cast<std::size_t>(i)] = (fp - fm) / (T(2) * h);
  }
  return g;
}

// max|a-f| / max(max|a|, max|f|, tiny).
template <class T>
double grad_rel_err(std::span<const T> analytic, std::span<const T> fd) {
  double num = 0, a_max = 0, f_max = 0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    num = std::max(num, std::abs(static_cast<double>(analytic[i]) - static_cast<double>(fd[i])));
    a_max = std::max(a_max, std::abs(static_cast<double>(analytic[i])));
    f_max = std::max(f_max, std::abs(static_cast<double>(fd[i])));
  }
  return num / std::max({a_max, f_max, 1e-12});
}

namespace detail {

// One instance: analytic grads via the tape vs central differences over every
// input tensor. `build` must read the inputs' current buffers on every call
// and return a scalar tensor. `corrupt` biases the analytic side, emulating a
// buggy backward rule for the negative-control path.
template <class T, class Builder>
double gradcheck_instance(Builder&& build, std::vector<Tensor<T>> inputs, T h,
                          bool corrupt = false) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  Tape<T> tape;
  {
    TapeScope<T> scope(tape);
    Tensor<T> out = build();
    tape.backward(out);
  }
  double worst = 0;
  for (auto& t : inputs) {
    std::vector<T> analytic(t.grad().begin(), t.grad().end());
    if (analytic.empty()) analytic.assign(static_cast<std::size_t>(t.size()), T(0));
    if (corrupt) {
      for (auto& v : analytic) v = v * T(1.01) + T(0.01);
    }
    auto fd = finite_difference_gradient<T>([&](const Tensor<T>&) { return build().scalar(); }, t, h);
    worst = std::max(worst, grad_rel_err<T>(analytic, fd));
  }
  return worst;
}

template <class T>
Tensor<T> random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t = Tensor<T>::zeros(shape);
  for (std::int64_t i = 0; i < t.size(); ++i) {
    t.data_ptr()[i] = static_cast<T>(rng.uniform(lo, hi));
  }
  return t;
}

// Push values away from 0 so relu kinks stay out of the FD window.
template <class T>
void avoid_kinks(Tensor<T>& t, T margin) {
  for (std::int64_t i = 0; i < t.size(); ++i) {
    T& v = t.data_ptr()[i];
    if (std::abs(v) < margin) v = v < T(0) ? v - margin : v + margin;
  }
}

// Separate 2x2 pool window competitors so FD never crosses an argmax flip.
template <class T>
void separate_pool_windows(Tensor<T>& t, T gap) {
  const auto n = t.dim(0), c = t.dim(1), h = t.dim(2), w = t.dim(3);
  T* p = t.data_ptr();
  for (std::int64_t i = 0; i < n * c; ++i) {
    T* plane = p + i * h * w;
    for (std::int64_t oy = 0; oy + 1 < h; oy += 2) {
      for (std::int64_t ox = 0; ox + 1 < w; ox += 2) {
        T* cells[4] = {&plane[oy * w + ox], &plane[oy * w + ox + 1], &plane[(oy + 1) * w + ox],
                       &plane[(oy + 1) * w + ox + 1]};
        std::sort(cells, cells + 4, [](T* a, T* b) { return *a < *b; });
        for (int k = 1; k < 4; ++k) {
          if (*cells[k] - *cells[k - 1] < gap) *cells[k] = *cells[k - 1] + gap;
        }
      }
    }
  }
}

template <class T>
std::vector<T> random_coeffs(Rng& rng, std::int64_t count) {
  std::vector<T> c(static_cast<std::size_t>(count));
  for (auto& v : c) v = static_cast<T>(rng.uniform(-1.0, 1.0));
  return c;
}

template <class T>
MatX<T> random_unit_rows(Rng& rng, std::int64_t n, std::int64_t d) {
  MatX<T> m(n, d);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < d; ++j) m(i, j) = static_cast<T>(rng.normal());
    m.row(i).normalize();
  }
  return m;
}

}  // namespace detail

// Per-op finite-difference checks, >= 10 random instances each. Templated so
// unit tests can rerun them in 32-bit mode with looser tolerance.
template <class T>
std::vector<CheckResult> run_op_checks(std::uint64_t seed, T h, double tol,
                                       const std::string& corrupt_op = "") {
  std::vector<CheckResult> results;
  Rng rng(mix_seed(seed, 0x6f70636865636bULL));
  const int instances = 10;

  // Probes built from products and sums are linear in each perturbed input,
  // so central differences carry no truncation error and a large step simply
  // drowns 32-bit rounding noise. Curved or kinked probes keep the caller's
  // step; kink margins scale with it so the FD window never crosses one.
  const T h_linear = sizeof(T) == 4 ? T(1) : h;
  const T kink_margin = std::max(T(8) * h, T(0.05));

  auto run = [&](const std::string& name, auto&& make_instance) {
    double worst = 0;
    for (int k = 0; k < instances; ++k) {
      worst = std::max(worst, make_instance());
    }
    results.push_back({name, worst, tol, worst <= tol});
  };
  auto corrupted = [&](const std::string& name) { return name == corrupt_op; };

  run("matmul", [&] {
    auto a = detail::random_tensor<T>(rng, {4, 3});
    auto b = detail::random_tensor<T>(rng, {3, 5});
    auto c = detail::random_coeffs<T>(rng, 20);
    return detail::gradcheck_instance<T>([&] { return weighted_sum(matmul(a, b), c); }, {a, b},
                                         h_linear, corrupted("matmul"));
  });
  run("conv2d", [&] {
    auto x = detail::random_tensor<T>(rng, {2, 3, 8, 8});
    auto k = detail::random_tensor<T>(rng, {4, 3, 3, 3});
    auto c = detail::random_coeffs<T>(rng, 2 * 4 * 8 * 8);
    return detail::gradcheck_instance<T>([&] { return weighted_sum(conv2d(x, k, 1, 1), c); },
                                         {x, k}, h_linear, corrupted("conv2d"));
  });
  run("conv2d_strided", [&] {
    auto x = detail::random_tensor<T>(rng, {1, 2, 9, 9});
    auto k = detail::random_tensor<T>(rng, {3, 2, 3, 3});
    auto c = detail::random_coeffs<T>(rng, 1 * 3 * 4 * 4);
    return detail::gradcheck_instance<T>([&] { return weighted_sum(conv2d(x, k, 2, 0), c); },
                                         {x, k}, h_linear, corrupted("conv2d_strided"));
  });
  run("channel_bias_add", [&] {
    auto x = detail::random_tensor<T>(rng, {2, 4, 3, 3});
    auto b = detail::random_tensor<T>(rng, {4});
    auto c = detail::random_coeffs<T>(rng, 2 * 4 * 3 * 3);
    return detail::gradcheck_instance<T>([&] { return weighted_sum(channel_bias_add(x, b), c); },
                                         {x, b}, h_linear, corrupted("channel_bias_add"));
  });
  run("relu", [&] {
    auto x = detail::random_tensor<T>(rng, {3, 7});
    detail::avoid_kinks(x, kink_margin);
    auto c = detail::random_coeffs<T>(rng, 21);
    return detail::gradcheck_instance<T>([&] { return weighted_sum(relu(x), c); }, {x}, h,
                                         corrupted("relu"));
  });
  run("max_pool2x2", [&] {
    auto x = detail::random_tensor<T>(rng, {2, 2, 6, 6});
    detail::separate_pool_windows(x, kink_margin);
    auto c = detail::random_coeffs<T>(rng, 2 * 2 * 3 * 3);
    return detail::gradcheck_instance<T>([&] { return weighted_sum(max_pool2x2(x), c); }, {x}, h,
                                         corrupted("max_pool2x2"));
  });
  run("global_avg_pool", [&] {
    auto x = detail::random_tensor<T>(rng, {2, 3, 4, 4});
    auto c = detail::random_coeffs<T>(rng, 6);
    return detail::gradcheck_instance<T>([&] { return weighted_sum(global_avg_pool(x), c); }, {x},
                                         h_linear, corrupted("global_avg_pool"));
  });
  run("affine", [&] {
    auto x = detail::random_tensor<T>(rng, {4, 6});
    auto w = detail::random_tensor<T>(rng, {6, 5});
    auto b = detail::random_tensor<T>(rng, {5});
    auto c = detail::random_coeffs<T>(rng, 20);
    return detail::gradcheck_instance<T>([&] { return weighted_sum(affine(x, w, b), c); },
                                         {x, w, b}, h_linear, corrupted("affine"));
  });
  run("reshape", [&] {
    auto x = detail::random_tensor<T>(rng, {2, 6});
    auto c = detail::random_coeffs<T>(rng, 12);
    return detail::gradcheck_instance<T>(
        [&] { return weighted_sum(reshape(x, {3, 4}), c); }, {x}, h_linear, corrupted("reshape"));
  });
  run("sum", [&] {
    auto x = detail::random_tensor<T>(rng, {3, 5});
    return detail::gradcheck_instance<T>([&] { return sum(x); }, {x}, h_linear, corrupted("sum"));
  });
  run("mean", [&] {
    auto x = detail::random_tensor<T>(rng, {4, 4});
    return detail::gradcheck_instance<T>([&] { return mean(x); }, {x}, h_linear,
                                         corrupted("mean"));
  });
  run("l2_normalize_rows", [&] {
    auto x = detail::random_tensor<T>(rng, {5, 8});
    for (std::int64_t i = 0; i < x.size(); ++i) {
      x.data_ptr()[i] += x.data_ptr()[i] >= T(0) ? T(0.2) : T(-0.2);  // keep rows off zero norm
    }
    auto c = detail::random_coeffs<T>(rng, 40);
    return detail::gradcheck_instance<T>([&] { return weighted_sum(l2_normalize_rows(x), c); },
                                         {x}, h, corrupted("l2_normalize_rows"));
  });
  // The composed chain passes relu/pool outputs the probe cannot hold away
  // from their kinks, so it is only meaningful where the step is tiny.
  if constexpr (sizeof(T) == 8) {
    run("op_chain", [&] {
      auto x = detail::random_tensor<T>(rng, {2, 3, 8, 8});
      auto k = detail::random_tensor<T>(rng, {4, 3, 3, 3});
      auto b = detail::random_tensor<T>(rng, {4});
      auto w = detail::random_tensor<T>(rng, {4, 6});
      auto b2 = detail::random_tensor<T>(rng, {6});
      auto c = detail::random_coeffs<T>(rng, 12);
      auto build = [&] {
        auto t = conv2d(x, k, 1, 1);
        t = channel_bias_add(t, b);
        t = relu(t);
        t = max_pool2x2(t);
        auto p = global_avg_pool(t);
        auto e = affine(p, w, b2);
        return weighted_sum(l2_normalize_rows(e), c);
      };
      return detail::gradcheck_instance<T>(build, {x, k, b, w, b2}, h, corrupted("op_chain"));
    });
  }
  return results;
}

namespace detail {

// FD over every entry of the five scaled-similarity matrices.
inline double loss_sim_grad_err(Rng& rng, LossKind kind, std::int64_t n, bool corrupt) {
  const double tau = 0.5;
  ScaledSimilarities<double> sims;
  sims.tau = tau;
  sims.has_aux = true;
  auto rand_mat = [&](bool unit_diag) {
    MatX<double> m(n, n);
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = 0; j < n; ++j) m(i, j) = rng.uniform(-1.0, 1.0) / tau;
      if (unit_diag) m(i, i) = 1.0 / tau;
    }
    return m;
  };
  sims.s_xy = rand_mat(false);
  sims.s_xx = rand_mat(true);
  sims.s_yy = rand_mat(true);
  sims.s_zx = rand_mat(false);
  sims.s_zy = rand_mat(false);

  auto lr = three_view_loss_with_grads(sims, kind);
  const double h = 1e-5;
  double worst = 0;
  auto check_matrix = [&](MatX<double>& m, const MatX<double>& g) {
    std::vector<double> analytic, fd;
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = 0; j < n; ++j) {
        double a = g(i, j);
        if (corrupt) a = a * 1.01 + 0.01;
        analytic.push_back(a);
        const double orig = m(i, j);
        m(i, j) = orig + h;
        const double fp = three_view_loss_with_grads(sims, kind).report.total;
        m(i, j) = orig - h;
        const double fm = three_view_loss_with_grads(sims, kind).report.total;
        m(i, j) = orig;
        fd.push_back((fp - fm) / (2 * h));
      }
    }
    worst = std::max(worst, grad_rel_err<double>(analytic, fd));
  };
  check_matrix(sims.s_xy, lr.grads.g_xy);
  check_matrix(sims.s_xx, lr.grads.g_xx);
  check_matrix(sims.s_yy, lr.grads.g_yy);
  check_matrix(sims.s_zx, lr.grads.g_zx);
  check_matrix(sims.s_zy, lr.grads.g_zy);
  return worst;
}

}  // namespace detail

// Full 64-bit verification suite: per-op checks, similarity-level loss
// gradients, the GNT-Xent gradient identities, and the end-to-end
// encoder-through-loss path.
inline std::vector<CheckResult> run_gradcheck_suite(const GradcheckOptions& options = {}) {
  std::vector<CheckResult> results = run_op_checks<double>(options.seed, 1e-5, 1e-6,
                                                           options.corrupt_op);
  Rng rng(mix_seed(options.seed, 0x6c6f7373ULL));  // "loss"
  auto corrupted = [&](const std::string& name) { return name == options.corrupt_op; };

  {
    double worst = 0;
    for (std::int64_t n : {2, 4, 6}) {
      worst = std::max(worst, detail::loss_sim_grad_err(rng, LossKind::GntXent, n,
                                                        corrupted("gnt_xent_similarity_grads")));
    }
    results.push_back({"gnt_xent_similarity_grads", worst, 1e-6, worst <= 1e-6});
  }
  {
    double worst = 0;
    for (std::int64_t n : {2, 4, 6}) {
      worst = std::max(worst, detail::loss_sim_grad_err(rng, LossKind::NtXent, n,
                                                        corrupted("nt_xent_similarity_grads")));
    }
    results.push_back({"nt_xent_similarity_grads", worst, 1e-6, worst <= 1e-6});
  }

  // GNT-Xent identities: per-term d/d(pos) == -1 exactly (analytic) and
  // within 1e-3 by finite differences; per-term negative sums == +1.
  {
    double worst_exact = 0, worst_fd = 0, worst_neg = 0;
    for (std::int64_t n : {2, 4, 8, 16}) {
      for (std::int64_t d : {8, 32}) {
        BatchEmbeddings<double> emb;
        emb.x = detail::random_unit_rows<double>(rng, n, d);
        emb.y = detail::random_unit_rows<double>(rng, n, d);
        emb.z = detail::random_unit_rows<double>(rng, n, d);
        auto sims = similarity_matrices(emb, 0.1);
        auto lr = three_view_loss_with_grads(sims, LossKind::GntXent);
        for (double v : lr.term_pos_grads) {
          worst_exact = std::max(worst_exact, std::abs(v + 1.0));
        }
        for (double v : lr.term_neg_grad_sums) {
          worst_neg = std::max(worst_neg, std::abs(v - 1.0));
        }
        // FD of the total w.r.t. each positive diagonal entry: the xy term
        // sees its positive once (slope -1/n); the zx/zy pairs share theirs
        // across two log-terms (slope -2/n).
        const double h = 1e-6;
        auto fd_diag = [&](MatX<double>& m, double expected_terms) {
          for (std::int64_t i = 0; i < n; ++i) {
            const double orig = m(i, i);
            m(i, i) = orig + h;
            const double fp = three_view_loss_with_grads(sims, LossKind::GntXent).report.total;
            m(i, i) = orig - h;
            const double fm = three_view_loss_with_grads(sims, LossKind::GntXent).report.total;
            m(i, i) = orig;
            const double slope = (fp - fm) / (2 * h) * static_cast<double>(n);
            worst_fd = std::max(worst_fd, std::abs(slope + expected_terms));
          }
        };
        fd_diag(sims.s_xy, 1.0);
        fd_diag(sims.s_zx, 2.0);
        fd_diag(sims.s_zy, 2.0);
      }
    }
    if (corrupted("gnt_xent_positive_grad_exact")) worst_exact += 0.01;
    if (corrupted("gnt_xent_positive_grad_fd")) worst_fd += 0.01;
    if (corrupted("gnt_xent_negative_grad_sum")) worst_neg += 0.01;
    results.push_back({"gnt_xent_positive_grad_exact", worst_exact, 0.0, worst_exact == 0.0});
    results.push_back({"gnt_xent_positive_grad_fd", worst_fd, 1e-3, worst_fd <= 1e-3});
    results.push_back({"gnt_xent_negative_grad_sum", worst_neg, 1e-9, worst_neg <= 1e-9});
  }

  // Scalar NT-Xent term.
  {
    double worst = 0;
    for (int k = 0; k < 10; ++k) {
      const double pos = rng.uniform(-5.0, 5.0);
      std::vector<double> negs;
      const int m = 1 + static_cast<int>(rng.uniform_int(6));
      for (int j = 0; j < m; ++j) negs.push_back(rng.uniform(-5.0, 5.0));
      auto r = nt_xent(pos, negs);
      const double h = 1e-6;
      std::vector<double> analytic{r.dpos}, fd;
      fd.push_back((nt_xent(pos + h, negs).loss - nt_xent(pos - h, negs).loss) / (2 * h));
      for (std::size_t j = 0; j < negs.size(); ++j) {
        analytic.push_back(r.dnegs[j]);
        auto up = negs, dn = negs;
        up[j] += h;
        dn[j] -= h;
        fd.push_back((nt_xent(pos, up).loss - nt_xent(pos, dn).loss) / (2 * h));
      }
      if (corrupted("nt_xent_scalar")) {
        for (auto& v : analytic) v = v * 1.01 + 0.01;
      }
      worst = std::max(worst, grad_rel_err<double>(analytic, fd));
    }
    results.push_back({"nt_xent_scalar", worst, 1e-6, worst <= 1e-6});
  }

  // Embedding-level gradients of the full loss.
  for (LossKind kind : {LossKind::GntXent, LossKind::NtXent}) {
    const std::string name = kind == LossKind::GntXent ? "full_loss_backward_gnt"
                                                       : "full_loss_backward_nt";
    double worst = 0;
    for (int k = 0; k < 3; ++k) {
      const std::int64_t n = 4, d = 8;
      const double tau = 0.1;
      BatchEmbeddings<double> emb;
      emb.x = detail::random_unit_rows<double>(rng, n, d);
      emb.y = detail::random_unit_rows<double>(rng, n, d);
      emb.z = detail::random_unit_rows<double>(rng, n, d);
      auto full = full_loss_backward(emb, tau, kind);
      const double h = 1e-6;
      auto check = [&](MatX<double>& m, const MatX<double>& g) {
        std::vector<double> analytic, fd;
        for (std::int64_t i = 0; i < m.rows(); ++i) {
          for (std::int64_t j = 0; j < m.cols(); ++j) {
            double a = g(i, j);
            if (corrupted(name)) a = a * 1.01 + 0.01;
            analytic.push_back(a);
            const double orig = m(i, j);
            m(i, j) = orig + h;
            const double fp = full_loss_backward(emb, tau, kind).report.total;
            m(i, j) = orig - h;
            const double fm = full_loss_backward(emb, tau, kind).report.total;
            m(i, j) = orig;
            fd.push_back((fp - fm) / (2 * h));
          }
        }
        worst = std::max(worst, grad_rel_err<double>(analytic, fd));
      };
      check(emb.x, full.dx);
      check(emb.y, full.dy);
      check(emb.z, full.dz);
    }
    results.push_back({name, worst, 1e-5, worst <= 1e-5});
  }

  // End-to-end: encoder forward on three views, analytic loss head seeding
  // the tape, parameter gradients vs finite differences of the total loss.
  {
    EncoderConfig cfg;
    cfg.widths = {4, 6};
    cfg.embed_dim = 8;
    cfg.input_size = 8;
    Encoder<double> enc(cfg, options.seed);
    const std::int64_t n = 2;
    Rng batch_rng(mix_seed(options.seed, 0x626174636857ULL));
    auto bx = detail::random_tensor<double>(batch_rng, {n, 3, 8, 8}, 0.0, 1.0);
    auto by = detail::random_tensor<double>(batch_rng, {n, 3, 8, 8}, 0.0, 1.0);
    auto bz = detail::random_tensor<double>(batch_rng, {n, 3, 8, 8}, 0.0, 1.0);
    const double tau = 0.1;

    auto forward_total = [&]() {
      BatchEmbeddings<double> emb;
      emb.x = to_matrix(enc.encode(bx).embedding);
      emb.y = to_matrix(enc.encode(by).embedding);
      emb.z = to_matrix(enc.encode(bz).embedding);
      return three_view_loss_with_grads(similarity_matrices(emb, tau), LossKind::GntXent)
          .report.total;
    };

    enc.zero_grads();
    Tape<double> tape;
    {
      TapeScope<double> scope(tape);
      auto ex = enc.encode(bx).embedding;
      auto ey = enc.encode(by).embedding;
      auto ez = enc.encode(bz).embedding;
      BatchEmbeddings<double> emb{to_matrix(ex), to_matrix(ey), to_matrix(ez)};
      auto full = full_loss_backward(emb, tau, LossKind::GntXent);
      std::pair<Tensor<double>, std::span<const double>> seeds[3] = {
          {ex, {full.dx.data(), static_cast<std::size_t>(full.dx.size())}},
          {ey, {full.dy.data(), static_cast<std::size_t>(full.dy.size())}},
          {ez, {full.dz.data(), static_cast<std::size_t>(full.dz.size())}}};
      tape.backward_seeded(seeds);
    }

    double worst = 0;
    const double h = 1e-5;
    for (auto& [pname, p] : enc.named_params()) {
      std::vector<double> analytic(p.grad().begin(), p.grad().end());
      if (analytic.empty()) analytic.assign(static_cast<std::size_t>(p.size()), 0.0);
      if (corrupted("encoder_end_to_end")) {
        for (auto& v : analytic) v = v * 1.01 + 0.01;
      }
      auto fd = finite_difference_gradient<double>(
          [&](const Tensor<double>&) { return forward_total(); }, p, h);
      worst = std::max(worst, grad_rel_err<double>(analytic, fd));
    }
    results.push_back({"encoder_end_to_end", worst, 1e-5, worst <= 1e-5});
  }

  return results;
}

}  // namespace aag
