#include "normforge/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "normforge/errors.hpp"
#include "normforge/rng.hpp"
#include "normforge/svd.hpp"
#include "normforge/trainer.hpp"

namespace normforge {

namespace {

// ---------------------------------------------------------------- helpers

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

double rel_gap(const ParamTree& a, const ParamTree& b) {
  ParamTree d = a;
  d.axpy(-1.0, b);
  return tree_frobenius_norm(d) / std::max(1.0, tree_frobenius_norm(b));
}

/// Random matrix with orthonormal factors and prescribed singular values.
Matrix matrix_with_spectrum(Rng& rng, int rows, int cols, std::span<const double> sv) {
  const int r = static_cast<int>(sv.size());
  auto orthonormal = [&rng](int n, int k) {
    Matrix q(n, k);
    for (int j = 0; j < k; ++j) {
      std::vector<double> col(n);
      for (int i = 0; i < n; ++i) col[i] = rng.normal();
      for (int pass = 0; pass < 2; ++pass) {
        for (int p = 0; p < j; ++p) {
          double dot = 0.0;
          for (int i = 0; i < n; ++i) dot += col[i] * q(i, p);
          for (int i = 0; i < n; ++i) col[i] -= dot * q(i, p);
        }
      }
      double nrm = 0.0;
      for (int i = 0; i < n; ++i) nrm += col[i] * col[i];
      nrm = std::sqrt(nrm);
      for (int i = 0; i < n; ++i) q(i, j) = col[i] / nrm;
    }
    return q;
  };
  Matrix u = orthonormal(rows, r);
  Matrix v = orthonormal(cols, r);
  for (int j = 0; j < r; ++j) {
    for (int i = 0; i < rows; ++i) u(i, j) *= sv[j];
  }
  return matmul_nt(u, v);
}

/// Exact sigma_max for matrices whose smaller dimension is <= 2 (used by
/// the brute-force sampler, where power iteration would dominate runtime).
double spectral_small_exact(const Matrix& m) {
  const int r = std::min(m.rows(), m.cols());
  if (r == 1) {
    double s = 0.0;
    for (double x : m.data()) s += x * x;
    return std::sqrt(s);
  }
  const Matrix g = m.rows() <= m.cols() ? matmul_nt(m, m) : matmul_tn(m, m);
  const double tr = g(0, 0) + g(1, 1);
  const double det = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0);
  const double disc = std::sqrt(std::max(0.0, tr * tr - 4.0 * det));
  return std::sqrt(std::max(0.0, 0.5 * (tr + disc)));
}

struct RunningMax {
  double value = 0.0;
  void update(double v) { value = std::max(value, v); }
};

using CriterionFn = std::function<void(CriterionResult&)>;

struct Suite {
  const VerifyOptions& opts;
  std::vector<CriterionResult> results;
  std::ostream* progress = nullptr;
  // bookkeeping across training runs for the safeguard criterion
  double max_coeff_excess = 0.0;
  long runs_checked = 0;

  void run(const std::string& name, double tolerance, double runtime_budget,
           const CriterionFn& fn) {
    if (!opts.only.empty() &&
        std::find(opts.only.begin(), opts.only.end(), name) == opts.only.end()) {
      return;
    }
    CriterionResult r;
    r.name = name;
    r.tolerance = tolerance * opts.tol_scale;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      fn(r);
    } catch (const std::exception& e) {
      r.measured = std::numeric_limits<double>::infinity();
      r.detail = std::string("exception: ") + e.what();
    }
    r.runtime_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.pass = r.measured <= r.tolerance;
    if (runtime_budget > 0.0 && r.runtime_sec > runtime_budget) {
      r.pass = false;
      r.detail += (r.detail.empty() ? "" : "; ") + std::string("runtime budget ") +
                  fmt(runtime_budget) + "s exceeded";
    }
    if (progress) {
      (*progress) << (r.pass ? "PASS " : "FAIL ") << r.name << "  measured=" << fmt(r.measured)
                  << " tol=" << fmt(r.tolerance) << " (" << fmt(r.runtime_sec) << "s)"
                  << (r.detail.empty() ? "" : "  [" + r.detail + "]") << '\n';
      progress->flush();
    }
    results.push_back(std::move(r));
  }

  RunSummary tracked_run(const RunConfig& cfg) {
    RunSummary s = run_training(cfg);
    max_coeff_excess = std::max(max_coeff_excess, s.max_coeff_excess);
    ++runs_checked;
    return s;
  }
};

// deterministic synthetic gradient stream over a tree shape
ParamTree random_tree_like(const ParamTree& shape, Rng& rng, double scale = 1.0) {
  ParamTree g = tree_like(shape);
  for (auto& m : g.matrices) {
    for (double& x : m.data()) x = scale * rng.normal();
  }
  for (double& x : g.base) x = scale * rng.normal();
  return g;
}

}  // namespace

bool all_passed(const std::vector<CriterionResult>& results) {
  for (const auto& r : results) {
    if (!r.pass) return false;
  }
  return !results.empty();
}

std::string verify_report_json(const std::vector<CriterionResult>& results) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : results) {
    nlohmann::json j;
    j["name"] = r.name;
    j["tolerance"] = r.tolerance;
    j["measured"] = std::isfinite(r.measured) ? nlohmann::json(r.measured)
                                              : nlohmann::json("inf");
    j["pass"] = r.pass;
    j["runtime_sec"] = r.runtime_sec;
    if (!r.detail.empty()) j["detail"] = r.detail;
    arr.push_back(std::move(j));
  }
  nlohmann::json top;
  top["criteria"] = arr;
  top["all_pass"] = all_passed(results);
  return top.dump(2);
}

std::vector<CriterionResult> run_verify(const VerifyOptions& opts, std::ostream* progress) {
  Suite suite{opts, {}, progress};
  const PolarConfig& polar_cfg = opts.polar;

  std::filesystem::path scratch = opts.scratch_dir;
  if (scratch.empty()) {
    scratch = std::filesystem::temp_directory_path() / "normforge_verify";
  }
  std::filesystem::create_directories(scratch);

  // ------------------------------------------------------------ criterion 1
  // Adam as CSD w.r.t. the ada-infinity norm and as RSD w.r.t. the ada-2
  // norm: 100-step scalar and vector runs, 5 seeds.
  auto adam_equivalence = [&](BackupNormKind backup, SdType sd, ProductNormKind pn,
                              CriterionResult& r) {
    RunningMax worst;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      for (int dim : {1, 7}) {
        ParamTree shape;
        shape.base.assign(dim, 0.0);

        Rng rng(mix_seed(seed, dim));
        ParamTree w_gen = shape;
        for (double& x : w_gen.base) x = rng.normal();
        std::vector<double> w_ref = w_gen.base;

        VariantConfig vc;
        vc.sd_type = sd;
        vc.product_norm = pn;
        vc.backup_norm = backup;
        vc.eta_m = vc.eta_b = 0.01;
        VariantOptimizer opt(vc, shape, polar_cfg);
        OptState ref_state = OptState::like(shape);

        for (int t = 0; t < 100; ++t) {
          ParamTree g = random_tree_like(shape, rng);
          opt.step(w_gen, g, /*loss=*/1.0);
          adam_step(w_ref, ref_state, g.base, vc.eta_b, vc.beta, vc.beta2, vc.epsilon);
          double gap = 0.0, ref = 1.0;
          for (int i = 0; i < dim; ++i) {
            gap = std::max(gap, std::fabs(w_gen.base[i] - w_ref[i]));
            ref = std::max(ref, std::fabs(w_ref[i]));
          }
          worst.update(gap / ref);
        }
      }
    }
    r.measured = worst.value;
  };
  suite.run("adam_csd_adainf", 1e-10, 1.0, [&](CriterionResult& r) {
    adam_equivalence(BackupNormKind::AdaInf, SdType::Constrained, ProductNormKind::Inf, r);
  });
  suite.run("adam_rsd_ada2", 1e-10, 1.0, [&](CriterionResult& r) {
    adam_equivalence(BackupNormKind::Ada2, SdType::Regularized, ProductNormKind::L2, r);
  });

  // ------------------------------------------------------------ criterion 2
  // Generic (constrained, inf, ada_inf) vs the direct side-by-side
  // implementation on a 3-matrix toy net, 100 steps, 3 seeds.
  suite.run("muonadam_equivalence", 1e-8, 5.0, [&](CriterionResult& r) {
    RunningMax worst;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      ModelSpec ms{{5, 8, 7, 4}, Activation::Tanh, LossKind::Mse, seed};
      Mlp model(ms);
      DatasetSpec ds{DatasetKind::TeacherNet, 64, 0.05, seed};
      auto data = make_dataset(ds, model.in_dim(), model.out_dim(), 16);

      ParamTree w_gen = model.init_params();
      ParamTree w_dir = w_gen;

      VariantConfig vc;
      vc.sd_type = SdType::Constrained;
      vc.product_norm = ProductNormKind::Inf;
      vc.backup_norm = BackupNormKind::AdaInf;
      vc.eta_m = 0.02;
      vc.eta_b = 0.01;
      VariantOptimizer opt(vc, w_gen, polar_cfg);
      OptState dir_state = OptState::like(w_dir);

      for (int t = 0; t < 100; ++t) {
        const Batch& batch = data[t % data.size()];
        auto [loss_g, grads_g] = model.backward(w_gen, batch);
        opt.step(w_gen, grads_g, loss_g);
        auto [loss_d, grads_d] = model.backward(w_dir, batch);
        (void)loss_d;
        muonadam_step(w_dir, dir_state, grads_d, vc.eta_m, vc.eta_b, vc.beta, vc.beta,
                      vc.beta2, vc.epsilon, polar_cfg);
        worst.update(rel_gap(w_gen, w_dir));
      }
    }
    r.measured = worst.value;
  });

  // ------------------------------------------------------------ criterion 3
  // Closed-form recovery of the named special cases.
  suite.run("scion_recovery", 1e-10, 0.0, [&](CriterionResult& r) {
    RunningMax worst;
    for (std::uint64_t seed = 1; seed <= 2; ++seed) {
      ModelSpec ms{{4, 6, 3}, Activation::Tanh, LossKind::Mse, seed};
      Mlp model(ms);
      DatasetSpec ds{DatasetKind::TeacherNet, 32, 0.05, seed};
      auto data = make_dataset(ds, model.in_dim(), model.out_dim(), 8);

      ParamTree w_gen = model.init_params();
      ParamTree w_dir = w_gen;
      VariantConfig vc;
      vc.sd_type = SdType::Constrained;
      vc.product_norm = ProductNormKind::Inf;
      vc.backup_norm = BackupNormKind::Inf;
      vc.eta_m = 0.02;
      vc.eta_b = 0.005;
      VariantOptimizer opt(vc, w_gen, polar_cfg);
      OptState st = OptState::like(w_dir);

      for (int t = 0; t < 50; ++t) {
        const Batch& batch = data[t % data.size()];
        auto [loss_g, grads_g] = model.backward(w_gen, batch);
        opt.step(w_gen, grads_g, loss_g);

        auto [loss_d, grads_d] = model.backward(w_dir, batch);
        (void)loss_d;
        // W^l -= eta_m polar(M^l);  theta -= eta_b sign(m)
        momentum_update(st, grads_d, vc.beta, vc.beta2);
        for (std::size_t l = 0; l < w_dir.matrices.size(); ++l) {
          w_dir.matrices[l].axpy(-vc.eta_m, polar(st.momentum.matrices[l], polar_cfg));
        }
        for (std::size_t i = 0; i < w_dir.base.size(); ++i) {
          w_dir.base[i] -= vc.eta_b * sign0(st.momentum.base[i]);
        }
        ++st.step;
        worst.update(rel_gap(w_gen, w_dir));
      }
    }
    r.measured = worst.value;
  });

  suite.run("polargrad_recovery", 1e-10, 0.0, [&](CriterionResult& r) {
    RunningMax worst;
    for (std::uint64_t seed = 1; seed <= 2; ++seed) {
      ModelSpec ms{{4, 6, 3}, Activation::Tanh, LossKind::Mse, seed};
      Mlp model(ms);
      DatasetSpec ds{DatasetKind::TeacherNet, 32, 0.05, seed};
      auto data = make_dataset(ds, model.in_dim(), model.out_dim(), 8);

      ParamTree w_gen = model.init_params();
      ParamTree w_dir = w_gen;
      VariantConfig vc;
      vc.sd_type = SdType::Regularized;
      vc.product_norm = ProductNormKind::L2;
      vc.backup_norm = BackupNormKind::Ada2;
      vc.eta_m = 0.05;
      vc.eta_b = 0.01;
      VariantOptimizer opt(vc, w_gen, polar_cfg);
      OptState st = OptState::like(w_dir);

      for (int t = 0; t < 50; ++t) {
        const Batch& batch = data[t % data.size()];
        auto [loss_g, grads_g] = model.backward(w_gen, batch);
        opt.step(w_gen, grads_g, loss_g);

        auto [loss_d, grads_d] = model.backward(w_dir, batch);
        (void)loss_d;
        // W^l -= eta_m ||M^l||_nuc polar(M^l);  theta -= eta_b m/(sqrt(v)+eps)
        momentum_update(st, grads_d, vc.beta, vc.beta2);
        for (std::size_t l = 0; l < w_dir.matrices.size(); ++l) {
          const Matrix& mom = st.momentum.matrices[l];
          Matrix p = polar(mom, polar_cfg);
          w_dir.matrices[l].axpy(-vc.eta_m * frob_inner(p, mom), p);
        }
        for (std::size_t i = 0; i < w_dir.base.size(); ++i) {
          w_dir.base[i] -= vc.eta_b * st.momentum.base[i] /
                           (std::sqrt(st.second_moment[i]) + vc.epsilon);
        }
        ++st.step;
        worst.update(rel_gap(w_gen, w_dir));
      }
    }
    r.measured = worst.value;
  });

  // ------------------------------------------------------------ criterion 4
  suite.run("muonmax_momo_equivalence", 1e-8, 0.0, [&](CriterionResult& r) {
    RunningMax worst;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      ModelSpec ms{{4, 8, 3}, Activation::Tanh, LossKind::Mse, seed};
      Mlp model(ms);
      DatasetSpec ds{DatasetKind::TeacherNet, 32, 0.05, seed};
      auto data = make_dataset(ds, model.in_dim(), model.out_dim(), 8);

      ParamTree w_gen = model.init_params();
      ParamTree w_dir = w_gen;
      VariantConfig vc;
      vc.sd_type = SdType::Regularized;
      vc.product_norm = ProductNormKind::Hybrid;
      vc.backup_norm = BackupNormKind::Ada2;
      vc.truncation = true;
      vc.eta_m = 0.05;
      vc.eta_b = 0.02;
      vc.f_star = 0.0;
      VariantOptimizer opt(vc, w_gen, polar_cfg);
      OptState dir_state = OptState::like(w_dir);

      for (int t = 0; t < 50; ++t) {
        const Batch& batch = data[t % data.size()];
        auto [loss_g, grads_g] = model.backward(w_gen, batch);
        opt.step(w_gen, grads_g, loss_g);
        auto [loss_d, grads_d] = model.backward(w_dir, batch);
        muonmax_momo_step(w_dir, dir_state, grads_d, loss_d, vc, 1.0, polar_cfg);
        worst.update(rel_gap(w_gen, w_dir));
      }
    }
    r.measured = worst.value;
  });

  suite.run("muonmax_degenerate", 1e-10, 0.0, [&](CriterionResult& r) {
    // with F_* = -1e9 the truncation branch never engages and the direct
    // step must coincide with plain regularized hybrid descent
    RunningMax worst;
    ModelSpec ms{{4, 8, 3}, Activation::Tanh, LossKind::Mse, 11};
    Mlp model(ms);
    DatasetSpec ds{DatasetKind::TeacherNet, 32, 0.05, 11};
    auto data = make_dataset(ds, model.in_dim(), model.out_dim(), 8);

    ParamTree w_gen = model.init_params();
    ParamTree w_dir = w_gen;
    VariantConfig plain;
    plain.sd_type = SdType::Regularized;
    plain.product_norm = ProductNormKind::Hybrid;
    plain.backup_norm = BackupNormKind::Ada2;
    plain.truncation = false;
    plain.eta_m = 0.05;
    plain.eta_b = 0.02;
    VariantConfig momo = plain;
    momo.truncation = true;
    momo.f_star = -1e9;
    VariantOptimizer opt(plain, w_gen, polar_cfg);
    OptState dir_state = OptState::like(w_dir);

    for (int t = 0; t < 50; ++t) {
      const Batch& batch = data[t % data.size()];
      auto [loss_g, grads_g] = model.backward(w_gen, batch);
      StepReport rep = opt.step(w_gen, grads_g, loss_g);
      if (rep.clamp_active) throw Error("plain step reported clamping");
      auto [loss_d, grads_d] = model.backward(w_dir, batch);
      muonmax_momo_step(w_dir, dir_state, grads_d, loss_d, momo, 1.0, polar_cfg);
      worst.update(rel_gap(w_gen, w_dir));
    }
    r.measured = worst.value;
  });

  // ------------------------------------------------------------ criterion 5
  // Lemma-level brute force: duality pairing plus unit-ball dominance over
  // a million sampled directions per case.
  suite.run("product_lemma_pairing", 1e-6, 0.0, [&](CriterionResult& r) {
    RunningMax worst;
    for (int case_idx = 0; case_idx < 200; ++case_idx) {
      Rng rng(mix_seed(0x9a1f, case_idx));
      ParamTree v;
      NormSpec spec;
      spec.polar = polar_cfg;
      if (case_idx % 2 == 0) {
        v.matrices.push_back(Matrix(2, 2));
        v.base.assign(2, 0.0);
        spec.slot_norms = {AtomicNorm::spectral(), AtomicNorm::maxabs()};
      } else {
        v.matrices.push_back(Matrix(1, 2));
        v.matrices.push_back(Matrix(2, 1));
        v.base.assign(2, 0.0);
        std::vector<double> diag = {0.5 + rng.uniform(), 0.5 + rng.uniform()};
        spec.slot_norms = {AtomicNorm::spectral(), AtomicNorm::spectral(),
                           AtomicNorm::scaled(diag, AtomicNorm::euclid())};
      }
      for (auto& m : v.matrices) {
        for (double& x : m.data()) x = rng.normal();
      }
      for (double& x : v.base) x = rng.normal();

      const double lambdas[3] = {0.5, 1.0, 2.0};
      for (int agg_idx = 0; agg_idx < 3; ++agg_idx) {
        switch (agg_idx) {
          case 0: spec.aggregator = ProductAggregator::max_agg(); break;
          case 1: spec.aggregator = ProductAggregator::l2_agg(); break;
          default:
            spec.aggregator = ProductAggregator::hybrid_agg(lambdas[case_idx % 3]);
        }
        const ParamTree lmo = product_lmo(spec, v);
        const double dual = product_dual(spec, v);
        worst.update(std::fabs(-tree_inner(lmo, v) - dual) / std::max(1.0, dual));
      }
    }
    r.measured = worst.value;
  });

  suite.run("product_lmo_dominance", 1e-3, 60.0, [&](CriterionResult& r) {
    // structure: one 2x2 matrix slot + 2-dim base slot (total dim 6);
    // sampler needs closed-form spectral norms, so slots stay small
    const int n_cases = 200;
    const long n_samples = 1000000;
    std::vector<double> gaps(n_cases, 0.0);

    auto run_case = [&](int case_idx) {
      Rng rng(mix_seed(0xd0m1 + 0, case_idx));
      ParamTree v;
      v.matrices.push_back(Matrix(2, 2));
      v.base.assign(2, 0.0);
      for (double& x : v.matrices[0].data()) x = rng.normal();
      for (double& x : v.base) x = rng.normal();

      NormSpec spec;
      spec.polar = polar_cfg;
      spec.slot_norms = {AtomicNorm::spectral(), AtomicNorm::euclid()};
      switch (case_idx % 3) {
        case 0: spec.aggregator = ProductAggregator::max_agg(); break;
        case 1: spec.aggregator = ProductAggregator::l2_agg(); break;
        default: spec.aggregator = ProductAggregator::hybrid_agg(1.0 + (case_idx % 5));
      }

      const ParamTree lmo = product_lmo(spec, v);
      const double lmo_inner = tree_inner(lmo, v);

      // sample directions, normalize by the exact primal product norm
      double best = std::numeric_limits<double>::infinity();
      Matrix sample_m(2, 2);
      double base0, base1;
      for (long s = 0; s < n_samples; ++s) {
        auto smp = sample_m.data();
        for (int i = 0; i < 4; ++i) smp[i] = rng.uniform(-1.0, 1.0);
        base0 = rng.uniform(-1.0, 1.0);
        base1 = rng.uniform(-1.0, 1.0);

        const double mat_primal = spectral_small_exact(sample_m);
        const double base_primal = std::sqrt(base0 * base0 + base1 * base1);
        double primal;
        switch (spec.aggregator.kind) {
          case ProductAggregator::Kind::MaxAgg:
            primal = std::max(mat_primal, base_primal);
            break;
          case ProductAggregator::Kind::L2Agg:
            primal = std::sqrt(mat_primal * mat_primal + base_primal * base_primal);
            break;
          default:
            primal = std::sqrt(mat_primal * mat_primal +
                               spec.aggregator.lambda * base_primal * base_primal);
        }
        if (primal <= 0.0) continue;
        const double inner = (frob_inner(sample_m, v.matrices[0]) + base0 * v.base[0] +
                              base1 * v.base[1]) /
                             primal;
        best = std::min(best, inner);
      }
      gaps[case_idx] = lmo_inner - best;  // <= 0 when the LMO is optimal
    };

    const int workers = std::max(1, opts.workers);
    std::mutex mu;
    int next = 0;
    auto worker = [&] {
      for (;;) {
        int mine;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next >= n_cases) return;
          mine = next++;
        }
        run_case(mine);
      }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    r.measured = *std::max_element(gaps.begin(), gaps.end());
  });

  // ------------------------------------------------------------ criterion 6
  suite.run("momo_csd_optimality", 1e-6, 0.0, [&](CriterionResult& r) {
    RunningMax worst;
    for (int inst = 0; inst < 100; ++inst) {
      Rng rng(mix_seed(0x6c5d, inst));
      const double m0 = rng.normal(), m1 = rng.normal();
      const double mn = std::sqrt(m0 * m0 + m1 * m1);
      if (mn < 1e-6) continue;
      const double eta = rng.uniform(0.05, 2.0);
      const double f_tilde = rng.uniform(-0.5, 3.0);
      const double f_star = f_tilde - rng.uniform(-0.5, 2.0);  // both branches occur

      const double coeff = std::min(eta, std::max(0.0, f_tilde - f_star) / mn);
      const double closed_obj = std::max(f_tilde - coeff * mn, f_star);

      // polar grid over the eta-ball (1000 radii x 1000 angles)
      double grid_min = std::max(f_tilde, f_star);  // r = 0
      double argmin_r = 0.0;
      for (int ri = 1; ri <= 1000; ++ri) {
        const double rad = eta * ri / 1000.0;
        // the model is linear in the direction; the best direction at any
        // radius is -m/||m||, but scan angles anyway as a true brute force
        for (int ai = 0; ai < 1000; ++ai) {
          const double ang = 6.283185307179586 * ai / 1000.0;
          const double inner = rad * (m0 * std::cos(ang) + m1 * std::sin(ang));
          const double obj = std::max(f_tilde + inner, f_star);
          if (obj < grid_min) {
            grid_min = obj;
            argmin_r = rad;
          }
        }
      }
      worst.update(closed_obj - grid_min);  // grid can't beat the true optimum
      // minimal-distance tie-break: the closed-form radius may not exceed
      // the best grid radius by more than one grid cell
      if (closed_obj <= grid_min + 1e-9) {
        worst.update((coeff - argmin_r - eta / 1000.0) * 1e-3);
      }
    }
    r.measured = worst.value;
  });

  suite.run("momo_rsd_optimality", 1e-6, 0.0, [&](CriterionResult& r) {
    RunningMax worst;
    for (int inst = 0; inst < 100; ++inst) {
      Rng rng(mix_seed(0x6c5e, inst));
      const double m0 = rng.normal(), m1 = rng.normal();
      const double mn = std::sqrt(m0 * m0 + m1 * m1);
      if (mn < 1e-6) continue;
      const double eta = rng.uniform(0.05, 2.0);
      const double f_tilde = rng.uniform(-0.5, 3.0);
      const double f_star = f_tilde - rng.uniform(-0.5, 2.0);

      const double coeff = std::min(eta, std::max(0.0, f_tilde - f_star) / (mn * mn));
      const double r_closed = coeff * mn;
      auto g = [&](double rad) {
        return std::max(f_tilde - rad * mn, f_star) + rad * rad / (2.0 * eta);
      };

      // golden-section on the (convex) radial objective
      double lo = 0.0, hi = eta * mn + std::max(0.0, f_tilde - f_star) + 1.0;
      const double phi = 0.6180339887498949;
      double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
      double g1 = g(x1), g2 = g(x2);
      for (int it = 0; it < 200; ++it) {
        if (g1 < g2) {
          hi = x2;
          x2 = x1;
          g2 = g1;
          x1 = hi - phi * (hi - lo);
          g1 = g(x1);
        } else {
          lo = x1;
          x1 = x2;
          g1 = g2;
          x2 = lo + phi * (hi - lo);
          g2 = g(x2);
        }
      }
      const double g_gold = std::min(g1, g2);
      worst.update(std::fabs(g(r_closed) - g_gold));
    }
    r.measured = worst.value;
  });

  // ------------------------------------------------------------ criterion 7
  auto polar_batch = [&](const std::function<double(const Matrix&, const SvdResult&)>& metric,
                         CriterionResult& r) {
    RunningMax worst;
    for (int trial = 0; trial < 500; ++trial) {
      Rng rng(mix_seed(0x7019, trial));
      const int rows = static_cast<int>(rng.uniform_int(1, 16));
      const int cols = static_cast<int>(rng.uniform_int(1, 16));
      const int rank = std::min(rows, cols);
      const double cond = rng.uniform(1.0, 100.0);
      std::vector<double> sv(rank);
      const double scale = std::exp(rng.uniform(-2.0, 2.0));
      for (int i = 0; i < rank; ++i) {
        sv[i] = scale * std::exp(rng.uniform(-std::log(cond), 0.0));
      }
      sv[0] = scale;
      if (rank > 1) sv[rank - 1] = scale / cond;
      std::sort(sv.rbegin(), sv.rend());
      const Matrix m = matrix_with_spectrum(rng, rows, cols, sv);
      worst.update(metric(m, svd_oracle(m)));
    }
    r.measured = worst.value;
  };
  suite.run("polar_orthogonality", 1e-3, 0.0, [&](CriterionResult& r) {
    polar_batch(
        [&](const Matrix& m, const SvdResult&) {
          const Matrix p = polar(m, polar_cfg);
          const int rk = std::min(m.rows(), m.cols());
          Matrix gram = m.rows() >= m.cols() ? matmul_tn(p, p) : matmul_nt(p, p);
          gram -= Matrix::identity(rk);
          return gram.frobenius_norm();
        },
        r);
  });
  suite.run("polar_vs_svd", 1e-3, 0.0, [&](CriterionResult& r) {
    polar_batch(
        [&](const Matrix& m, const SvdResult& svd) {
          const Matrix p = polar(m, polar_cfg);
          return (p - matmul_nt(svd.u, svd.v)).frobenius_norm();
        },
        r);
  });
  suite.run("nuclear_duality", 1e-5, 0.0, [&](CriterionResult& r) {
    polar_batch(
        [&](const Matrix& m, const SvdResult& svd) {
          double sum = 0.0;
          for (double s : svd.singular_values) sum += s;
          return std::fabs(nuclear_norm(m, polar_cfg) - sum) / sum;
        },
        r);
  });

  // ------------------------------------------------------------ criterion 8
  auto stale_pair_cfg = [&](bool truncation) {
    RunConfig rc;
    rc.variant.sd_type = SdType::Regularized;
    rc.variant.product_norm = ProductNormKind::Hybrid;
    rc.variant.backup_norm = BackupNormKind::Ada2;
    rc.variant.truncation = truncation;
    rc.variant.eta_m = 0.02;
    rc.variant.eta_b = 0.02;
    rc.variant.f_star = 0.0;
    rc.model = ModelSpec{{6, 16, 16, 4}, Activation::Tanh, LossKind::Mse, 3};
    rc.data = DatasetSpec{DatasetKind::TeacherNet, 256, 0.05, 3};
    rc.steps = 500;
    rc.batch_size = 32;
    rc.log_every = 100;
    rc.seed = 3;
    return rc;
  };
  suite.run("stale_final_loss_gap", 0.01, 0.0, [&](CriterionResult& r) {
    RunningMax worst;
    for (bool truncation : {false, true}) {
      RunConfig exact = stale_pair_cfg(truncation);
      exact.out_dir = scratch / (std::string("stale_exact_") + (truncation ? "momo" : "plain"));
      RunConfig stale = exact;
      stale.variant.stale = true;
      stale.out_dir = scratch / (std::string("stale_on_") + (truncation ? "momo" : "plain"));
      const RunSummary se = suite.tracked_run(exact);
      const RunSummary ss = suite.tracked_run(stale);
      if (se.status != "ok" || ss.status != "ok" || !se.final_loss || !ss.final_loss) {
        throw Error("stale comparison run diverged");
      }
      worst.update(std::fabs(*se.final_loss - *ss.final_loss));
    }
    r.measured = worst.value;
  });

  suite.run("stale_constant_grad", 1e-12, 0.0, [&](CriterionResult& r) {
    // constant gradients make the momentum stationary, so the previous
    // step's duals already equal the exact ones
    ParamTree shape;
    shape.matrices.push_back(Matrix(3, 3));
    shape.base.assign(2, 0.0);
    Rng rng(77);
    ParamTree grads = random_tree_like(shape, rng);
    ParamTree w_exact = random_tree_like(shape, rng);
    ParamTree w_stale = w_exact;

    VariantConfig vc;
    vc.sd_type = SdType::Regularized;
    vc.product_norm = ProductNormKind::Hybrid;
    vc.backup_norm = BackupNormKind::Ada2;
    vc.truncation = true;
    vc.f_star = -10.0;
    VariantConfig vs = vc;
    vs.stale = true;
    VariantOptimizer opt_exact(vc, shape, polar_cfg);
    VariantOptimizer opt_stale(vs, shape, polar_cfg);

    RunningMax worst;
    for (int t = 0; t < 20; ++t) {
      opt_exact.step(w_exact, grads, 1.0);
      opt_stale.step(w_stale, grads, 1.0);
      worst.update(rel_gap(w_stale, w_exact));
    }
    r.measured = worst.value;
  });

  // ----------------------------------------------------------- criterion 9
  suite.run("gradient_checks", 1e-4, 0.0, [&](CriterionResult& r) {
    RunningMax worst;
    struct Case {
      ModelSpec spec;
      DatasetKind data;
    };
    const std::vector<Case> cases = {
        {{{4, 8, 3}, Activation::Tanh, LossKind::Mse, 1}, DatasetKind::TeacherNet},
        {{{4, 8, 3}, Activation::Tanh, LossKind::SoftmaxXent, 2}, DatasetKind::TeacherNet},
        {{{5, 7, 7, 2}, Activation::Relu, LossKind::Mse, 3}, DatasetKind::TeacherNet},
        {{{5, 7, 7, 2}, Activation::Relu, LossKind::SoftmaxXent, 4}, DatasetKind::GaussianBlobs},
        {{{3, 16, 2}, Activation::Tanh, LossKind::SoftmaxXent, 5}, DatasetKind::GaussianBlobs},
    };
    for (const auto& c : cases) {
      Mlp model(c.spec);
      DatasetSpec ds{c.data, 16, c.data == DatasetKind::GaussianBlobs ? 1.0 : 0.1,
                     c.spec.seed};
      auto data = make_dataset(ds, model.in_dim(), model.out_dim(), 16);
      const ParamTree params = model.init_params();
      worst.update(model.finite_diff_check(params, data.front(), 1e-5, 64, c.spec.seed));
    }
    r.measured = worst.value;
  });

  // ----------------------------------------------------------- criterion 10
  suite.run("robustness_directional", 0.34, 600.0, [&](CriterionResult& r) {
    const std::vector<double> rho_grid = {0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0};
    const std::vector<std::uint64_t> seeds = {1, 2, 3};

    auto method_cfg = [&](SdType sd, ProductNormKind pn, BackupNormKind bn, bool trunc,
                          const char* tag) {
      RunConfig rc;
      rc.variant.sd_type = sd;
      rc.variant.product_norm = pn;
      rc.variant.backup_norm = bn;
      rc.variant.truncation = trunc;
      rc.variant.stale = trunc;  // Momo methods run with the stale cache on
      rc.variant.eta_m = 0.01;
      rc.variant.eta_b = 0.01;
      rc.variant.f_star = 0.0;
      rc.model = ModelSpec{{6, 16, 16, 4}, Activation::Tanh, LossKind::Mse, 9};
      rc.data = DatasetSpec{DatasetKind::TeacherNet, 256, 0.05, 9};
      rc.steps = 2000;
      rc.batch_size = 32;
      rc.log_every = 500;
      rc.out_dir = scratch / (std::string("robustness_") + tag);
      return rc;
    };

    struct MethodRun {
      std::string tag;
      SweepResult sweep;
    };
    std::vector<MethodRun> methods;
    auto sweep_method = [&](const RunConfig& rc, const char* tag) {
      SweepConfig sc;
      sc.base = rc;
      sc.rho_grid = rho_grid;
      sc.seeds = seeds;
      sc.workers = std::max(1, opts.workers);
      SweepResult res = run_sweep(sc);
      methods.push_back({tag, std::move(res)});
    };
    sweep_method(method_cfg(SdType::Constrained, ProductNormKind::Inf, BackupNormKind::AdaInf,
                            false, "muonadam"),
                 "muonadam");
    sweep_method(
        method_cfg(SdType::Constrained, ProductNormKind::Inf, BackupNormKind::Inf, false,
                   "scion"),
        "scion");
    sweep_method(method_cfg(SdType::Constrained, ProductNormKind::Inf, BackupNormKind::AdaInf,
                            true, "muonadam_momo"),
                 "muonadam_momo");
    sweep_method(method_cfg(SdType::Regularized, ProductNormKind::Hybrid, BackupNormKind::Ada2,
                            true, "muonmax_momo"),
                 "muonmax_momo");

    // per-seed robustness fraction: share of rho values whose loss is
    // within 10% of that method's own per-seed best
    auto per_seed_fraction = [&](const SweepResult& res, std::uint64_t seed) {
      double best = std::numeric_limits<double>::infinity();
      std::vector<double> losses;
      for (const auto& row : res.rows) {
        if (row.seed != seed) continue;
        const double loss = (row.status == "ok" && row.final_loss)
                                ? *row.final_loss
                                : std::numeric_limits<double>::infinity();
        losses.push_back(loss);
        best = std::min(best, loss);
      }
      if (losses.empty() || !std::isfinite(best)) return 0.0;
      int ok = 0;
      for (double l : losses) {
        if (l <= best * 1.10) ++ok;
      }
      return static_cast<double>(ok) / static_cast<double>(losses.size());
    };

    int violating_seeds = 0;
    std::ostringstream detail;
    for (std::uint64_t seed : seeds) {
      const double f_muonadam = per_seed_fraction(methods[0].sweep, seed);
      const double f_scion = per_seed_fraction(methods[1].sweep, seed);
      const double f_mam = per_seed_fraction(methods[2].sweep, seed);
      const double f_mmm = per_seed_fraction(methods[3].sweep, seed);
      const double base = std::max(f_muonadam, f_scion);
      const bool ok = f_mam >= base && f_mmm >= base;
      if (!ok) ++violating_seeds;
      detail << "seed" << seed << ": muonadam=" << fmt(f_muonadam) << " scion=" << fmt(f_scion)
             << " muonadam-momo=" << fmt(f_mam) << " muonmax-momo=" << fmt(f_mmm)
             << (ok ? " ok; " : " VIOLATED; ");
    }
    for (const auto& m : methods) {
      for (const auto& row : m.sweep.rows) {
        (void)row;
      }
      suite.runs_checked += static_cast<long>(m.sweep.rows.size());
    }
    r.detail = detail.str();
    r.measured =
        static_cast<double>(violating_seeds) / static_cast<double>(seeds.size());
  });

  // ----------------------------------------------------------- criterion 11
  suite.run("momo_safeguard", 1e-12, 0.0, [&](CriterionResult& r) {
    // a fresh clamped run plus everything tracked so far
    RunConfig rc = stale_pair_cfg(true);
    rc.variant.stale = false;
    rc.out_dir = scratch / "safeguard_run";
    const RunSummary s = suite.tracked_run(rc);
    if (s.status != "ok") throw Error("safeguard run diverged");
    r.detail = "runs checked: " + std::to_string(suite.runs_checked);
    r.measured = std::max(0.0, suite.max_coeff_excess);
  });

  suite.run("momo_clamp_engagement", 0.5, 0.0, [&](CriterionResult& r) {
    RunConfig rc = stale_pair_cfg(true);
    rc.variant.stale = false;
    rc.variant.eta_m *= 100.0;  // 100x the tuned value; truncation must engage
    rc.variant.eta_b *= 100.0;
    rc.steps = 200;
    rc.out_dir = scratch / "clamp_run";
    const RunSummary s = suite.tracked_run(rc);
    r.detail = "clamp_rate=" + fmt(s.clamp_rate);
    r.measured = s.any_clamp ? 0.0 : 1.0;
  });

  return std::move(suite.results);
}

}  // namespace normforge
