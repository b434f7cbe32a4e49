#include "normforge/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "normforge/errors.hpp"
#include "normforge/rng.hpp"
#include "normforge/version.hpp"

namespace normforge {

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

nlohmann::json summary_to_json(const RunSummary& s) {
  nlohmann::json j;
  j["status"] = s.status;
  j["steps_completed"] = s.steps_completed;
  j["initial_loss"] = s.initial_loss;
  if (s.final_loss) j["final_loss"] = *s.final_loss; else j["final_loss"] = nullptr;
  if (s.mean_last_10pct) j["mean_last_10pct"] = *s.mean_last_10pct;
  else j["mean_last_10pct"] = nullptr;
  j["wall_time_sec"] = s.wall_time_sec;
  j["clamp_rate"] = s.clamp_rate;
  j["any_clamp"] = s.any_clamp;
  j["max_coeff_excess"] = s.max_coeff_excess;
  j["version"] = version_string();
  j["version_hash"] = version_content_hash();
  for (const auto& [k, v] : s.config_echo) j["config." + k] = v;
  return j;
}

}  // namespace

RunSummary run_training(const RunConfig& cfg) {
  cfg.validate();

  RunSummary summary;
  summary.config_echo = cfg.flatten();
  summary.run_dir = cfg.out_dir;
  std::filesystem::create_directories(cfg.out_dir);

  // the run seed folds into the model and data seeds so sweep seeds give
  // genuinely different, still deterministic runs
  ModelSpec model_spec = cfg.model;
  model_spec.seed = mix_seed(model_spec.seed, cfg.seed);
  DatasetSpec data_spec = cfg.data;
  data_spec.seed = mix_seed(data_spec.seed, cfg.seed);

  Mlp model(model_spec);
  const std::vector<Batch> data =
      make_dataset(data_spec, model.in_dim(), model.out_dim(), cfg.batch_size);

  ParamTree w = model.init_params();
  VariantOptimizer opt(cfg.variant, w);

  ScheduleConfig sched = cfg.schedule;
  if (sched.total_steps == 0) sched.total_steps = cfg.steps;

  std::ofstream csv(cfg.out_dir / "log.csv", std::ios::trunc);
  if (!csv) throw ConfigError("run_training: cannot write to " + cfg.out_dir.string());
  csv << "step,train_loss,lr_mult,eff_step_matrix,eff_step_base,dual_total,"
         "model_estimate,clamp_active\n";

  summary.initial_loss = model.forward_loss(w, data.front());
  summary.max_coeff_excess = 0.0;

  const auto t_start = std::chrono::steady_clock::now();
  std::vector<double> losses;
  losses.reserve(static_cast<std::size_t>(cfg.steps));
  long clamp_steps = 0;

  for (long t = 1; t <= cfg.steps; ++t) {
    const double mult = lr_schedule(t, sched, 1.0);
    const Batch& batch = data[static_cast<std::size_t>((t - 1) % static_cast<long>(data.size()))];

    auto [loss, grads] = model.backward(w, batch);
    if (!std::isfinite(loss)) {
      summary.status = "diverged";
      break;
    }
    losses.push_back(loss);

    StepReport report;
    try {
      report = opt.step(w, grads, loss, mult);
    } catch (const NumericError&) {
      summary.status = "diverged";
      break;
    }
    summary.steps_completed = t;
    if (report.clamp_active) {
      ++clamp_steps;
      summary.any_clamp = true;
    }
    summary.max_coeff_excess = std::max(
        summary.max_coeff_excess, report.step_coefficient - cfg.variant.eta_m * mult);

    if (t % cfg.log_every == 0 || t == cfg.steps) {
      csv << t << ',' << fmt_double(loss) << ',' << fmt_double(mult) << ','
          << fmt_double(report.effective_step_matrix) << ','
          << fmt_double(report.effective_step_base) << ','
          << fmt_double(report.dual_total) << ',' << fmt_double(report.model_estimate)
          << ',' << (report.clamp_active ? 1 : 0) << '\n';
    }
  }
  csv.flush();

  const auto t_end = std::chrono::steady_clock::now();
  summary.wall_time_sec = std::chrono::duration<double>(t_end - t_start).count();
  if (!losses.empty()) {
    summary.final_loss = losses.back();
    const std::size_t tail =
        std::max<std::size_t>(1, (losses.size() + 9) / 10);  // ceil(10%)
    double acc = 0.0;
    for (std::size_t i = losses.size() - tail; i < losses.size(); ++i) acc += losses[i];
    summary.mean_last_10pct = acc / static_cast<double>(tail);
  }
  if (summary.steps_completed > 0) {
    summary.clamp_rate =
        static_cast<double>(clamp_steps) / static_cast<double>(summary.steps_completed);
  }

  std::ofstream js(cfg.out_dir / "summary.json", std::ios::trunc);
  js << summary_to_json(summary).dump(2) << '\n';
  return summary;
}

void aggregate_sweep(SweepResult& result, double tau_rob) {
  result.aggregates.clear();

  // group rows by rho, preserving first-seen order
  std::vector<double> rhos;
  for (const auto& row : result.rows) {
    if (std::find(rhos.begin(), rhos.end(), row.rho) == rhos.end()) rhos.push_back(row.rho);
  }

  for (double rho : rhos) {
    RhoAggregate agg;
    agg.rho = rho;
    std::vector<double> ok;
    for (const auto& row : result.rows) {
      if (row.rho != rho) continue;
      ++agg.n_total;
      if (row.status == "ok" && row.final_loss && std::isfinite(*row.final_loss)) {
        ok.push_back(*row.final_loss);
      }
    }
    agg.n_ok = static_cast<int>(ok.size());
    if (!ok.empty()) {
      double mean = 0.0;
      for (double v : ok) mean += v;
      mean /= static_cast<double>(ok.size());
      agg.mean = mean;
      double var = 0.0;
      for (double v : ok) var += (v - mean) * (v - mean);
      agg.stddev = ok.size() > 1 ? std::sqrt(var / static_cast<double>(ok.size() - 1)) : 0.0;
    }
    result.aggregates.push_back(agg);
  }

  // robustness: a rho is a candidate only if every seed finished
  double best = std::numeric_limits<double>::infinity();
  for (const auto& agg : result.aggregates) {
    if (agg.n_ok == agg.n_total && agg.mean) best = std::min(best, *agg.mean);
  }
  int robust = 0;
  if (std::isfinite(best)) {
    for (const auto& agg : result.aggregates) {
      if (agg.n_ok == agg.n_total && agg.mean && *agg.mean <= best * (1.0 + tau_rob)) {
        ++robust;
      }
    }
  }
  result.robustness_fraction =
      result.aggregates.empty()
          ? 0.0
          : static_cast<double>(robust) / static_cast<double>(result.aggregates.size());
}

namespace {

void write_sweep_files(const SweepResult& result, const SweepConfig& cfg) {
  std::ofstream rows_csv(result.out_dir / "sweep.csv", std::ios::trunc);
  rows_csv << "variant,rho,seed,final_loss,status\n";
  for (const auto& row : result.rows) {
    rows_csv << row.variant << ',' << fmt_double(row.rho) << ',' << row.seed << ','
             << (row.final_loss ? fmt_double(*row.final_loss) : std::string("nan")) << ','
             << row.status << '\n';
  }

  std::ofstream agg_csv(result.out_dir / "sweep_aggregate.csv", std::ios::trunc);
  agg_csv << "rho,mean_loss,std_loss,n_ok,n_total\n";
  for (const auto& agg : result.aggregates) {
    agg_csv << fmt_double(agg.rho) << ','
            << (agg.mean ? fmt_double(*agg.mean) : std::string("nan")) << ','
            << (agg.stddev ? fmt_double(*agg.stddev) : std::string("nan")) << ','
            << agg.n_ok << ',' << agg.n_total << '\n';
  }

  nlohmann::json j;
  j["robustness_fraction"] = result.robustness_fraction;
  j["tau_rob"] = cfg.tau_rob;
  j["variant"] = variant_alias(cfg.base.variant);
  j["version"] = version_string();
  j["version_hash"] = version_content_hash();
  std::ofstream js(result.out_dir / "sweep_summary.json", std::ios::trunc);
  js << j.dump(2) << '\n';
}

}  // namespace

SweepResult run_sweep(const SweepConfig& cfg) {
  if (cfg.rho_grid.empty()) throw ConfigError("run_sweep: rho_grid must be nonempty");
  if (cfg.seeds.empty()) throw ConfigError("run_sweep: seeds must be nonempty");
  cfg.base.validate();

  SweepResult result;
  result.out_dir = cfg.base.out_dir;
  std::filesystem::create_directories(result.out_dir);

  struct Job {
    double rho;
    std::uint64_t seed;
    std::size_t index;
  };
  std::vector<Job> jobs;
  for (double rho : cfg.rho_grid) {
    for (std::uint64_t seed : cfg.seeds) {
      jobs.push_back({rho, seed, jobs.size()});
    }
  }
  result.rows.resize(jobs.size());

  const std::string alias = variant_alias(cfg.base.variant);
  auto run_one = [&](const Job& job) {
    RunConfig rc = cfg.base;
    rc.variant.eta_m *= job.rho;
    rc.variant.eta_b *= job.rho;
    rc.seed = job.seed;
    std::ostringstream dir;
    dir << alias << "_rho" << job.rho << "_seed" << job.seed;
    rc.out_dir = cfg.base.out_dir / dir.str();

    SweepRow row;
    row.variant = alias;
    row.rho = job.rho;
    row.seed = job.seed;
    try {
      const RunSummary s = run_training(rc);
      row.status = s.status;
      row.final_loss = s.final_loss;
    } catch (const Error& e) {
      row.status = std::string("error: ") + e.what();
    }
    result.rows[job.index] = std::move(row);
  };

  const int workers = std::max(1, cfg.workers);
  if (workers == 1) {
    for (const auto& job : jobs) run_one(job);
  } else {
    std::mutex mu;
    std::size_t next = 0;
    auto worker = [&] {
      for (;;) {
        std::size_t mine;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next >= jobs.size()) return;
          mine = next++;
        }
        run_one(jobs[mine]);
      }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  aggregate_sweep(result, cfg.tau_rob);
  write_sweep_files(result, cfg);
  return result;
}

SweepResult report_from_dir(const std::filesystem::path& dir, double tau_rob) {
  std::ifstream is(dir / "sweep.csv");
  if (!is) throw ConfigError("report: no sweep.csv in " + dir.string());

  SweepResult result;
  result.out_dir = dir;
  std::string line;
  std::getline(is, line);  // header
  if (line != "variant,rho,seed,final_loss,status") {
    throw ConfigError("report: unexpected sweep.csv header: " + line);
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    SweepRow row;
    std::string field;
    std::getline(ss, row.variant, ',');
    std::getline(ss, field, ',');
    row.rho = std::stod(field);
    std::getline(ss, field, ',');
    row.seed = static_cast<std::uint64_t>(std::stoull(field));
    std::getline(ss, field, ',');
    if (field != "nan") row.final_loss = std::stod(field);
    std::getline(ss, row.status);
    result.rows.push_back(std::move(row));
  }
  aggregate_sweep(result, tau_rob);
  return result;
}

}  // namespace normforge
