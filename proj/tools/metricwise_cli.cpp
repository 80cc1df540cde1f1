// metricwise command-line front end.
//
//   plan      build an importance or Bernoulli sampling plan from predictions
//   draw      draw the points to label from a plan
//   estimate  estimate a metric from a plan, a draw and labels
//   simulate | compare | calibrate | weights | cross   scenario experiments
//
// Exit codes: 0 success, 2 invalid input, 3 degenerate estimate.

#include <metricwise/io.hpp>
#include <metricwise/metricwise.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace mw = metricwise;
using mw::io::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitDegenerate = 3;

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("METRICWISE_SEED");
  if (!s || !*s) return std::nullopt;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (*end != '\0') throw mw::ValidationError("METRICWISE_SEED is not an integer");
  return static_cast<std::uint64_t>(v);
}

bool is_multilabel_metric(const std::string& name) {
  std::string lower;
  for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return lower == "microf1" || lower == "macrof1";
}

bool is_macro(const std::string& name) {
  std::string lower;
  for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return lower == "macrof1";
}

struct PlanArgs {
  std::string predictions, metric = "F1", method = "bs", out;
  double budget = 0.0, lambda = mw::kDefaultLambda, threshold = mw::kDefaultThreshold;
  std::uint64_t seed = 0;
};

int run_plan(const PlanArgs& a) {
  const mw::io::PredictionTable table = mw::io::read_predictions(a.predictions);
  const std::string method = mw::method_name(mw::parse_method(a.method));
  mw::PlanningInfo info;
  mw::DeviationVector dev;
  if (table.classes > 1 || is_multilabel_metric(a.metric)) {
    const mw::MultiLabelPool pool = table.multilabel_pool(a.threshold);
    if (is_macro(a.metric)) {
      mw::check_lambda(a.lambda);
      dev = mw::macro_deviation(pool, mw::blend_posterior(pool, a.lambda));
      info = {a.lambda, "MacroF1", dev.f_ref};
    } else if (is_multilabel_metric(a.metric)) {
      dev = mw::micro_planning_deviations(pool, a.lambda, 0.5, &info);
    } else {
      throw mw::ValidationError("multi-label predictions need MicroF1 or MacroF1");
    }
  } else {
    const mw::PredictionPool pool = table.binary_pool(a.threshold);
    dev = mw::planning_deviations(pool, mw::MetricSpec::parse(a.metric), a.lambda, &info);
  }

  mw::io::PlanFile plan;
  plan.seed = env_seed().value_or(a.seed);
  plan.threshold = a.threshold;
  plan.classes = table.classes;
  plan.ids = table.ids;
  plan.probs = table.probs;
  plan.info = info;
  if (method == "bernoulli") {
    mw::check_bernoulli_budget(a.budget, dev.h.size());
    plan.method = "bernoulli";
    plan.weights = mw::optimal_bernoulli(dev.h, a.budget);
    plan.budget = a.budget;
  } else {
    if (!(a.budget >= 1.0) || a.budget != std::floor(a.budget))
      throw mw::InvalidBudget("importance budget must be a positive integer draw count");
    plan.method = "importance";
    const std::size_t n = dev.h.size();
    plan.proposal = method == "uniform" ? "uniform" : "optimal";
    plan.weights = method == "uniform"
                       ? std::vector<double>(n, 1.0 / static_cast<double>(n))
                       : mw::optimal_importance(dev.h);
    plan.budget = a.budget;
  }
  mw::io::write_file(a.out, mw::io::plan_to_json(plan).dump(2) + "\n");
  return 0;
}

mw::io::PlanFile load_plan(const std::string& path) {
  json j;
  try {
    j = json::parse(mw::io::read_file(path));
  } catch (const json::exception& e) {
    throw mw::ValidationError(path + ": " + e.what());
  }
  return mw::io::plan_from_json(j);
}

int run_draw(const std::string& plan_path, std::optional<std::uint64_t> seed,
             const std::string& out) {
  const mw::io::PlanFile plan = load_plan(plan_path);
  const std::uint64_t s = env_seed().value_or(seed.value_or(plan.seed));
  json j;
  if (plan.method == "importance")
    j = mw::io::draw_to_json(mw::draw_is(plan.importance(), s), plan.ids);
  else
    j = mw::io::draw_to_json(mw::draw_bs(plan.bernoulli(), s), plan.ids);
  mw::io::write_file(out, j.dump(2) + "\n");
  return 0;
}

struct EstimateArgs {
  std::string plan, draw, labels, eval_metric, out;
  double level = 0.9, epsilon = mw::kDefaultEpsilon;
};

int run_estimate(const EstimateArgs& a) {
  const mw::io::PlanFile plan = load_plan(a.plan);
  json dj;
  try {
    dj = json::parse(mw::io::read_file(a.draw));
  } catch (const json::exception& e) {
    throw mw::ValidationError(a.draw + ": " + e.what());
  }
  const auto draw = mw::io::draw_from_json(dj, plan.weights.size());
  const bool is_plan = plan.method == "importance";
  if (is_plan != std::holds_alternative<mw::ISDraw>(draw))
    throw mw::ValidationError("draw does not match the plan's sampling method");
  const std::string metric_name = a.eval_metric.empty() ? plan.info.metric : a.eval_metric;
  const mw::LabelMatrix labels = mw::io::read_labels(a.labels, plan.ids, plan.classes);

  mw::EstimateReport report;
  if (plan.classes > 1 || is_multilabel_metric(metric_name)) {
    const mw::MultiLabelPool pool(plan.classes, plan.probs, plan.threshold, plan.ids);
    if (is_macro(metric_name)) {
      report = is_plan ? mw::estimate_macro_is(pool, std::get<mw::ISDraw>(draw),
                                               plan.importance(), labels, a.level, a.epsilon)
                       : mw::estimate_macro_bs(pool, std::get<mw::BSDraw>(draw),
                                               plan.bernoulli(), labels, a.level, a.epsilon);
    } else if (is_multilabel_metric(metric_name)) {
      const mw::MicroPayoffs payoff(pool, labels);
      report = is_plan ? mw::report_is(std::get<mw::ISDraw>(draw), plan.importance(),
                                       payoff, "MicroF1", a.level, a.epsilon)
                       : mw::report_bs(std::get<mw::BSDraw>(draw), plan.bernoulli(),
                                       payoff, "MicroF1", a.level, a.epsilon);
    } else {
      throw mw::ValidationError("multi-label plans need MicroF1 or MacroF1");
    }
  } else {
    const mw::PredictionPool pool(plan.probs, plan.threshold, plan.ids);
    const mw::MetricSpec metric = mw::MetricSpec::parse(metric_name);
    const mw::BinaryPayoffs payoff(pool, labels.values, metric);
    report = is_plan ? mw::report_is(std::get<mw::ISDraw>(draw), plan.importance(),
                                     payoff, metric.name(), a.level, a.epsilon)
                     : mw::report_bs(std::get<mw::BSDraw>(draw), plan.bernoulli(),
                                     payoff, metric.name(), a.level, a.epsilon);
  }
  mw::io::write_file(a.out, mw::io::report_to_json(report).dump(2) + "\n");
  return 0;
}

struct ScenarioArgs {
  std::string config, out, labels_out, sorted_out;
  bool full = false;
};

mw::ScenarioConfig load_config(const ScenarioArgs& a) {
  json j = json::object();
  if (!a.config.empty()) {
    try {
      j = json::parse(mw::io::read_file(a.config));
    } catch (const json::exception& e) {
      throw mw::ValidationError(a.config + ": " + e.what());
    }
  }
  if (a.full) j["full"] = true;
  mw::ScenarioConfig c = mw::io::config_from_json(j);
  if (auto s = env_seed()) c.seed = *s;
  return c;
}

int run_simulate(const ScenarioArgs& a) {
  const mw::ScenarioConfig c = load_config(a);
  const mw::SimulatedPool sim = mw::simulate_pool(c, c.seed);
  std::string preds = "id,prob_positive\n", labels = "id,label\n";
  for (std::size_t n = 0; n < sim.pool.size(); ++n) {
    preds += sim.pool.id(n) + "," + mw::io::format_number(sim.pool.prob(n)) + "\n";
    labels += sim.pool.id(n) + "," + std::to_string(static_cast<int>(sim.labels[n])) + "\n";
  }
  mw::io::write_file(a.out, preds);
  if (!a.labels_out.empty()) mw::io::write_file(a.labels_out, labels);
  return 0;
}

int run_compare(const ScenarioArgs& a) {
  const mw::ExperimentResult r = mw::run_comparison(load_config(a));
  mw::io::write_file(a.out, mw::io::results_csv(r.cells));
  return 0;
}

int run_calibrate(const ScenarioArgs& a) {
  const mw::ScenarioConfig c = load_config(a);
  std::string out = "method,budget,level,coverage,collapsed\n";
  for (const auto& cell : mw::calibration_sweep(c, c.level))
    out += mw::method_name(cell.method) + "," + mw::io::format_number(cell.budget) + "," +
           mw::io::format_number(c.level) + "," + mw::io::format_number(cell.coverage) +
           "," + (cell.collapsed ? "1" : "0") + "\n";
  mw::io::write_file(a.out, out);
  return 0;
}

int run_weights(const ScenarioArgs& a) {
  const mw::ScenarioConfig c = load_config(a);
  const mw::SimulatedPool sim = mw::simulate_pool(c, c.seed);
  mw::PlanningInfo info;
  const mw::DeviationVector dev = mw::planning_deviations(
      sim.pool, mw::MetricSpec::parse(c.plan_metric), c.lambda, &info);
  std::string out = "method,budget,draws,fraction_saturated,max_weight,min_weight\n";
  std::string sorted = "method,budget,rank,weight\n";
  for (mw::Method m : c.methods) {
    for (double budget : c.budgets) {
      mw::WeightsReport w;
      std::uint64_t draws = 0;
      if (m == mw::Method::Bernoulli) {
        w = mw::weights_report(mw::BernoulliPlan{mw::optimal_bernoulli(dev.h, budget), budget, info});
      } else {
        std::vector<double> q = m == mw::Method::Uniform
                                    ? std::vector<double>(c.n, 1.0 / static_cast<double>(c.n))
                                    : mw::optimal_importance(dev.h);
        draws = mw::draws_for_distinct(q, budget);
        w = mw::weights_report(mw::ImportancePlan{std::move(q), draws, info});
      }
      const std::string prefix = mw::method_name(m) + "," + mw::io::format_number(budget);
      out += prefix + "," + std::to_string(draws) + "," +
             mw::io::format_number(w.fraction_saturated) + "," +
             mw::io::format_number(w.sorted.front()) + "," +
             mw::io::format_number(w.sorted.back()) + "\n";
      for (std::size_t i = 0; i < w.sorted.size(); ++i)
        sorted += prefix + "," + std::to_string(i) + "," + mw::io::format_number(w.sorted[i]) + "\n";
    }
  }
  mw::io::write_file(a.out, out);
  if (!a.sorted_out.empty()) mw::io::write_file(a.sorted_out, sorted);
  return 0;
}

int run_cross(const ScenarioArgs& a) {
  mw::io::write_file(a.out, mw::io::cross_csv(mw::cross_metric_sweep(load_config(a))));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label-efficient estimation of classifier metrics"};
  app.require_subcommand(1);

  PlanArgs plan_args;
  auto* plan = app.add_subcommand("plan", "Build a sampling plan from predictions");
  plan->add_option("--predictions", plan_args.predictions, "Predictions CSV or JSON")->required();
  plan->add_option("--metric", plan_args.metric, "Metric to plan for")->capture_default_str();
  plan->add_option("--method", plan_args.method, "is, bs or uniform")->capture_default_str();
  plan->add_option("--budget", plan_args.budget, "IS draws or expected BS sample size")->required();
  plan->add_option("--lambda", plan_args.lambda, "Posterior blending weight")->capture_default_str();
  plan->add_option("--seed", plan_args.seed, "Seed recorded in the plan")->capture_default_str();
  plan->add_option("--threshold", plan_args.threshold, "Decision threshold")->capture_default_str();
  plan->add_option("--out", plan_args.out, "Plan JSON")->required();

  std::string draw_plan, draw_out;
  std::optional<std::uint64_t> draw_seed;
  auto* draw = app.add_subcommand("draw", "Draw the points to label");
  draw->add_option("--plan", draw_plan, "Plan JSON")->required();
  draw->add_option("--seed", draw_seed, "Seed (default: the plan's)");
  draw->add_option("--out", draw_out, "Draw JSON")->required();

  EstimateArgs est_args;
  auto* estimate = app.add_subcommand("estimate", "Estimate a metric from labelled draws");
  estimate->add_option("--plan", est_args.plan, "Plan JSON")->required();
  estimate->add_option("--draw", est_args.draw, "Draw JSON")->required();
  estimate->add_option("--labels", est_args.labels, "Labels CSV")->required();
  estimate->add_option("--eval-metric", est_args.eval_metric, "Metric to estimate (default: the plan's)");
  estimate->add_option("--level", est_args.level, "Confidence level")->capture_default_str();
  estimate->add_option("--epsilon", est_args.epsilon, "Variance regulariser")->capture_default_str();
  estimate->add_option("--out", est_args.out, "Report JSON")->required();

  ScenarioArgs scen;
  std::vector<std::pair<CLI::App*, int (*)(const ScenarioArgs&)>> scenario_cmds;
  for (auto [name, help, fn] :
       {std::tuple{"simulate", "Write a synthetic prediction pool", &run_simulate},
        std::tuple{"compare", "Compare estimators across budgets", &run_compare},
        std::tuple{"calibrate", "Confidence interval coverage per budget", &run_calibrate},
        std::tuple{"weights", "Sampling weight summaries per budget", &run_weights},
        std::tuple{"cross", "Errors for every plan/eval metric pair", &run_cross}}) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", scen.config, "Scenario JSON");
    sub->add_option("--out", scen.out, "Output CSV")->required();
    sub->add_flag("--full", scen.full, "Full-size run: n = 11200, 3000 repetitions");
    if (std::string(name) == "simulate")
      sub->add_option("--labels-out", scen.labels_out, "Labels CSV");
    if (std::string(name) == "weights")
      sub->add_option("--sorted-out", scen.sorted_out, "Sorted weights CSV");
    scenario_cmds.emplace_back(sub, fn);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*plan) return run_plan(plan_args);
    if (*draw) return run_draw(draw_plan, draw_seed, draw_out);
    if (*estimate) return run_estimate(est_args);
    for (auto& [sub, fn] : scenario_cmds)
      if (*sub) return fn(scen);
  } catch (const mw::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_degenerate() ? kExitDegenerate : kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
