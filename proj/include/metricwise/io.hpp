#pragma once

// File formats: prediction and label CSV/JSON, plan/draw/report JSON,
// scenario config JSON and results CSV.

#include <metricwise/bernoulli.hpp>
#include <metricwise/error.hpp>
#include <metricwise/harness.hpp>
#include <metricwise/importance.hpp>
#include <metricwise/metric_core.hpp>
#include <metricwise/multilabel.hpp>
#include <metricwise/online_bs.hpp>
#include <metricwise/report.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace metricwise::io {

using nlohmann::json;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path);
  out << content;
  if (!out) throw ValidationError("failed writing " + path);
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

// A table of `id, v_1, ..., v_C` rows. The first row is a header when its
// second cell is not numeric.
struct Table {
  std::vector<std::string> header;
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
};

inline Table read_table(const std::string& text, const std::string& what) {
  Table t;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0, width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split(line);
    if (cells.size() < 2)
      throw ValidationError(what + " line " + std::to_string(lineno) +
                            ": expected id and at least one value");
    double v = 0.0;
    if (t.ids.empty() && t.header.empty() && !parse_double(cells[1], v)) {
      t.header = cells;
      continue;
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width)
      throw ValidationError(what + " line " + std::to_string(lineno) +
                            ": inconsistent column count");
    std::vector<double> row;
    for (std::size_t i = 1; i < cells.size(); ++i) {
      if (!parse_double(cells[i], v))
        throw ValidationError(what + " line " + std::to_string(lineno) +
                              ": not a number: " + cells[i]);
      row.push_back(v);
    }
    t.ids.push_back(cells[0]);
    t.rows.push_back(std::move(row));
  }
  if (t.rows.empty()) throw ValidationError(what + " has no rows");
  return t;
}

}  // namespace detail

// Predictions with one probability column per class (C = 1 for binary).
struct PredictionTable {
  std::size_t classes = 1;
  std::vector<std::string> ids;
  std::vector<double> probs;  // row-major

  PredictionPool binary_pool(double threshold) const {
    if (classes != 1)
      throw ValidationError("expected binary predictions, got " +
                            std::to_string(classes) + " classes");
    return PredictionPool(probs, threshold, ids);
  }
  MultiLabelPool multilabel_pool(double threshold) const {
    return MultiLabelPool(classes, probs, threshold, ids);
  }
};

// CSV `id,prob_positive` or `id,prob_class_1,...,prob_class_C`, or JSON
// `[{"id":..., "prob_positive":...}]` / `{"items":[...]}` where an item may
// carry `"probs":[...]` instead for multi-label pools.
inline PredictionTable read_predictions(const std::string& path) {
  const std::string text = read_file(path);
  PredictionTable out;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && (text[first] == '[' || text[first] == '{')) {
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::exception& e) {
      throw ValidationError(path + ": " + e.what());
    }
    const json& items = doc.is_object() ? doc.at("items") : doc;
    if (!items.is_array() || items.empty())
      throw ValidationError(path + ": predictions must be a non-empty array");
    out.classes = 0;
    std::size_t i = 0;
    for (const auto& item : items) {
      std::vector<double> row;
      if (item.contains("probs"))
        row = item.at("probs").get<std::vector<double>>();
      else
        row.push_back(item.at("prob_positive").get<double>());
      if (out.classes == 0) out.classes = row.size();
      if (row.size() != out.classes || row.empty())
        throw ValidationError(path + ": inconsistent class count");
      out.ids.push_back(item.contains("id") ? item.at("id").get<std::string>()
                                            : std::to_string(i));
      out.probs.insert(out.probs.end(), row.begin(), row.end());
      ++i;
    }
    return out;
  }
  const detail::Table t = detail::read_table(text, path);
  out.classes = t.rows.front().size();
  out.ids = t.ids;
  for (const auto& row : t.rows) out.probs.insert(out.probs.end(), row.begin(), row.end());
  return out;
}

// Labels CSV `id,label` or `id,label_1,...,label_C`; ids not listed stay
// unlabelled.
inline LabelMatrix read_labels(const std::string& path,
                               const std::vector<std::string>& pool_ids,
                               std::size_t classes) {
  const detail::Table t = detail::read_table(read_file(path), path);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < pool_ids.size(); ++i) index.emplace(pool_ids[i], i);
  LabelMatrix labels{classes, std::vector<Label>(pool_ids.size() * classes, kUnlabeled)};
  for (std::size_t r = 0; r < t.ids.size(); ++r) {
    const auto it = index.find(t.ids[r]);
    if (it == index.end()) throw ValidationError(path + ": unknown id " + t.ids[r]);
    if (t.rows[r].size() != classes)
      throw ValidationError(path + ": expected " + std::to_string(classes) +
                            " label columns for id " + t.ids[r]);
    for (std::size_t k = 0; k < classes; ++k) {
      const double v = t.rows[r][k];
      if (v != 0.0 && v != 1.0)
        throw ValidationError(path + ": label for " + t.ids[r] + " is not 0/1");
      labels.values[it->second * classes + k] = static_cast<Label>(v);
    }
  }
  return labels;
}

// A plan as written by `plan`: the sampler plus the pool it was built on.
struct PlanFile {
  std::string method;    // "importance" or "bernoulli"
  std::string proposal;  // "optimal" or "uniform" (importance only)
  std::vector<double> weights;  // q or b
  double budget = 0.0;          // M
  PlanningInfo info;
  std::uint64_t seed = 0;
  double threshold = kDefaultThreshold;
  std::size_t classes = 1;
  std::vector<std::string> ids;
  std::vector<double> probs;

  ImportancePlan importance() const {
    ImportancePlan p{weights, static_cast<std::uint64_t>(budget), info};
    p.validate();
    return p;
  }
  BernoulliPlan bernoulli() const {
    BernoulliPlan p{weights, budget, info};
    p.validate();
    return p;
  }
};

inline json plan_to_json(const PlanFile& plan) {
  json j;
  j["method"] = plan.method;
  if (plan.method == "importance") {
    j["proposal"] = plan.proposal;
    j["q"] = plan.weights;
    j["M"] = static_cast<std::uint64_t>(plan.budget);
  } else {
    j["b"] = plan.weights;
    j["M"] = plan.budget;
  }
  j["lambda"] = plan.info.lambda;
  j["metric"] = plan.info.metric;
  j["f_prime_a"] = plan.info.f_prime_a;
  j["seed"] = plan.seed;
  j["threshold"] = plan.threshold;
  j["classes"] = plan.classes;
  j["ids"] = plan.ids;
  j["probs"] = plan.probs;
  return j;
}

inline PlanFile plan_from_json(const json& j) {
  try {
    PlanFile p;
    p.method = j.at("method").get<std::string>();
    if (p.method == "importance") {
      p.proposal = j.value("proposal", std::string("optimal"));
      p.weights = j.at("q").get<std::vector<double>>();
      p.budget = static_cast<double>(j.at("M").get<std::uint64_t>());
    } else if (p.method == "bernoulli") {
      p.weights = j.at("b").get<std::vector<double>>();
      p.budget = j.at("M").get<double>();
    } else {
      throw ValidationError("plan method must be importance or bernoulli");
    }
    p.info.lambda = j.at("lambda").get<double>();
    p.info.metric = j.at("metric").get<std::string>();
    p.info.f_prime_a = j.at("f_prime_a").get<double>();
    p.seed = j.value("seed", std::uint64_t{0});
    p.threshold = j.value("threshold", kDefaultThreshold);
    p.classes = j.value("classes", std::size_t{1});
    p.ids = j.at("ids").get<std::vector<std::string>>();
    p.probs = j.at("probs").get<std::vector<double>>();
    if (p.probs.size() != p.weights.size() * p.classes || p.ids.size() != p.weights.size())
      throw ValidationError("plan pool and weights disagree on size");
    return p;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed plan: ") + e.what());
  }
}

inline json draw_to_json(const ISDraw& draw, const std::vector<std::string>& ids) {
  json j;
  j["method"] = "importance";
  j["seed"] = draw.seed;
  json indices = json::array(), counts = json::array(), drawn_ids = json::array();
  for (std::size_t n = 0; n < draw.counts.size(); ++n)
    if (draw.counts[n] > 0) {
      indices.push_back(n);
      counts.push_back(draw.counts[n]);
      drawn_ids.push_back(ids[n]);
    }
  j["indices"] = indices;
  j["counts"] = counts;
  j["ids"] = drawn_ids;
  return j;
}

inline json draw_to_json(const BSDraw& draw, const std::vector<std::string>& ids) {
  json j;
  j["method"] = "bernoulli";
  j["seed"] = draw.seed;
  json selected = json::array(), drawn_ids = json::array();
  for (std::size_t n : draw.indices()) {
    selected.push_back(n);
    drawn_ids.push_back(ids[n]);
  }
  j["selected"] = selected;
  j["ids"] = drawn_ids;
  return j;
}

inline std::variant<ISDraw, BSDraw> draw_from_json(const json& j, std::size_t n) {
  try {
    const std::uint64_t seed = j.value("seed", std::uint64_t{0});
    if (j.contains("selected")) {
      BSDraw d{std::vector<std::uint8_t>(n, 0), seed};
      for (std::size_t i : j.at("selected").get<std::vector<std::size_t>>()) {
        if (i >= n) throw ValidationError("draw index out of range");
        d.selected[i] = 1;
      }
      return d;
    }
    const auto idx = j.at("indices").get<std::vector<std::size_t>>();
    const auto cnt = j.at("counts").get<std::vector<std::uint64_t>>();
    if (idx.size() != cnt.size())
      throw ValidationError("draw indices and counts differ in length");
    ISDraw d{std::vector<std::uint64_t>(n, 0), seed};
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (idx[k] >= n) throw ValidationError("draw index out of range");
      d.counts[idx[k]] += cnt[k];
    }
    return d;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed draw: ") + e.what());
  }
}

inline json finite_or_null(double v) {
  return std::isfinite(v) ? json(v) : json(nullptr);
}

inline json report_to_json(const EstimateReport& r) {
  json j;
  j["method"] = r.method;
  j["metric"] = r.metric;
  j["estimate"] = r.estimate;
  j["x_hat"] = finite_or_null(r.x_hat);
  j["y_hat"] = finite_or_null(r.y_hat);
  j["variance"] = r.variance;
  j["ci_level"] = r.level;
  j["ci_lo"] = r.ci.lo;
  j["ci_hi"] = r.ci.hi;
  j["beta_alpha"] = finite_or_null(r.fit.alpha);
  j["beta_beta"] = finite_or_null(r.fit.beta);
  j["flags"] = r.flags;
  j["labeled"] = r.labeled;
  j["draws"] = r.draws;
  return j;
}

inline json online_log_to_json(const OnlineState& state) {
  json out = json::array();
  for (const auto& r : state.log())
    out.push_back({{"round", r.round},
                   {"drawn", r.drawn},
                   {"weights_digest", r.weights_digest},
                   {"partial_estimate", r.partial_estimate}});
  return out;
}

// Scenario JSON. Budgets come either as absolute distinct counts
// ("budgets") or as fractions of n ("fractions"); "full" switches to the
// full-size replication defaults (n = 11200, 3000 repetitions).
inline ScenarioConfig config_from_json(const json& j) {
  ScenarioConfig c;
  try {
    if (j.value("full", false)) {
      c.n = 11200;
      c.repetitions = 3000;
    }
    c.n = j.value("n", c.n);
    c.positive_fraction = j.value("positive_fraction", c.positive_fraction);
    if (j.contains("sharpness") && j.at("sharpness").is_string()) {
      if (j.at("sharpness").get<std::string>() != "inf")
        throw ValidationError("sharpness must be a number or \"inf\"");
      c.sharpness = std::numeric_limits<double>::infinity();
    } else {
      c.sharpness = j.value("sharpness", c.sharpness);
    }
    c.miscalibration = j.value("miscalibration", c.miscalibration);
    c.threshold = j.value("threshold", c.threshold);
    c.lambda = j.value("lambda", c.lambda);
    c.plan_metric = j.value("plan_metric", c.plan_metric);
    c.eval_metric = j.value("eval_metric", c.eval_metric);
    c.repetitions = j.value("repetitions", c.repetitions);
    c.seed = j.value("seed", c.seed);
    c.level = j.value("level", c.level);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.threads = j.value("threads", c.threads);
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& m : j.at("methods")) c.methods.push_back(parse_method(m.get<std::string>()));
    }
    if (j.contains("fractions"))
      c.set_fractions(j.at("fractions").get<std::vector<double>>());
    else if (j.contains("budgets"))
      c.budgets = j.at("budgets").get<std::vector<double>>();
    else
      c.set_fractions({0.05, 0.1, 0.2, 0.4, 0.6, 0.8});
    if (j.contains("plan_metrics"))
      c.plan_metrics = j.at("plan_metrics").get<std::vector<std::string>>();
    if (j.contains("eval_metrics"))
      c.eval_metrics = j.at("eval_metrics").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed scenario: ") + e.what());
  }
  c.validate();
  return c;
}

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline constexpr const char* kResultsHeader =
    "method,budget,mean_abs_err,mean_log_sq_err,std,coverage,mean_distinct,"
    "frac_saturated,failures,stderr,mean_draws";

inline std::string results_row(const CellResult& c) {
  std::string row = method_name(c.method);
  for (double v : {c.budget, c.mean_abs_err, c.mean_log_sq_err, c.std, c.coverage,
                   c.mean_distinct, c.frac_saturated})
    row += "," + format_number(v);
  row += "," + std::to_string(c.failures);
  row += "," + format_number(c.stderr_) + "," + format_number(c.mean_draws);
  return row;
}

inline std::string results_csv(const std::vector<CellResult>& cells) {
  std::string out = std::string(kResultsHeader) + "\n";
  for (const auto& c : cells) out += results_row(c) + "\n";
  return out;
}

inline std::string cross_csv(const std::vector<CellResult>& cells) {
  std::string out =
      "method,budget,plan_metric,eval_metric,mean_abs_err,mean_log_sq_err,std,"
      "coverage,failures\n";
  for (const auto& c : cells) {
    out += method_name(c.method) + "," + format_number(c.budget) + "," +
           c.plan_metric + "," + c.eval_metric;
    for (double v : {c.mean_abs_err, c.mean_log_sq_err, c.std, c.coverage})
      out += "," + format_number(v);
    out += "," + std::to_string(c.failures) + "\n";
  }
  return out;
}

}  // namespace metricwise::io
