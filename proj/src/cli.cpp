// Copyright 2026 The GPC Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gpc/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <ostream>

#include "gpc/checkpoint.hpp"
#include "gpc/error.hpp"
#include "gpc/gradcheck.hpp"
#include "gpc/planner.hpp"
#include "gpc/svg.hpp"

namespace gpc::cli {

namespace {

Tensor column_from(const std::vector<double>& v, const std::string& field) {
  if (v.empty()) throw ConfigError(fmt::format("{}: empty vector", field));
  for (double x : v) {
    if (!std::isfinite(x)) throw ConfigError(fmt::format("{}: non-finite entry", field));
  }
  return Tensor::column(v);
}

Tensor precision_matrix(const Json& j) {
  if (j.is_number()) {
    const double v = j.get<double>();
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("goal_precision: must be positive");
    return Tensor::scalar(v);
  }
  std::vector<std::vector<double>> rows;
  try {
    rows = j.get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("goal_precision: expected a number or a square matrix");
  }
  const std::size_t n = rows.size();
  Tensor t(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    if (rows[r].size() != n) throw ConfigError("goal_precision: matrix must be square");
    for (std::size_t c = 0; c < n; ++c) t(r, c) = rows[r][c];
  }
  if (n == 0) throw ConfigError("goal_precision: empty matrix");
  return t;
}

std::string num(double v) { return fmt::format("{:.17g}", v); }

void write_svg(const Options& options, const std::string& name, const std::string& text) {
  if (options.svg) write_text_file(options.out / name, text);
}

Sequence require_sequence(const RunConfig& config) {
  if (!config.sequence) throw ConfigError("sequence: required for this command");
  return load_sequence(*config.sequence);
}

void check_observation_width(const ModelConfig& model, const Sequence& seq) {
  if (seq.dimension() != model.widths.front()) {
    throw ConfigError(fmt::format("model.widths[0] is {} but the sequence has dimension {}",
                                  model.widths.front(), seq.dimension()));
  }
}

double mean_abs(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += std::abs(v);
  return s / static_cast<double>(t.size());
}

}  // namespace

RunConfig parse_run_config(const Json& j) {
  RunConfig c;
  FieldReader r(j, "");
  if (r.has("sequence")) c.sequence = sequence_config_from_json(r.raw("sequence"), "sequence");
  if (r.has("model")) c.model = model_config_from_json(r.raw("model"), "model");
  r.get("horizon", c.horizon);
  if (r.has("context")) {
    int context = 0;
    r.get("context", context);
    c.context = context;
  }
  r.get("strides", c.strides);
  r.get("checkpoint", c.checkpoint);
  r.get("actions", c.actions);
  r.get("lengths", c.lengths);
  r.get("horizons", c.horizons);
  r.get("goal_trajectory", c.goal_trajectory);
  r.get("goal", c.goal);
  if (r.has("goal_precision")) c.goal_precision = precision_matrix(r.raw("goal_precision"));
  r.get("seed", c.seed);
  r.get("inject_fault", c.inject_fault);
  r.finish();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) { return parse_run_config(read_json_file(path)); }

std::string metrics_csv(const TrainTrace& trace) {
  std::string csv = std::string(kMetricsHeader) + "\n";
  for (const auto& s : trace.steps) {
    for (const auto& c : s.channels) {
      csv += fmt::format("{},{},{},{},{},{},{},{},{}\n", s.step, c.key.level, c.key.order, to_string(c.key.channel),
                         c.stride, num(c.error_norm), num(c.xi_norm), num(c.energy), num(s.total_free_energy));
    }
  }
  return csv;
}

int cmd_generate(const RunConfig& config, const Options& options, std::ostream& out) {
  const Sequence seq = require_sequence(config);
  write_text_file(options.out / "sequence.csv", to_csv(seq));
  if (options.svg) {
    PlotSeries s{"signal", {}, {}};
    for (std::size_t t = 0; t < seq.size(); ++t) {
      s.x.push_back(static_cast<double>(t));
      s.y.push_back(seq.samples[t][0]);
    }
    write_svg(options, "sequence.svg", line_plot({s}, "Generated sequence", "t", "x[0]"));
  }
  out << fmt::format("wrote {} samples to {}\n", seq.size(), (options.out / "sequence.csv").string());
  return kOk;
}

int cmd_train(const RunConfig& config, const Options& options, std::ostream& out) {
  const Sequence seq = require_sequence(config);
  check_observation_width(config.model, seq);
  Model model = build(config.model);
  const TrainTrace trace = train(model, seq);
  save_checkpoint(model, options.out / "checkpoint.json");
  write_text_file(options.out / "metrics.csv", metrics_csv(trace));
  if (options.svg) {
    PlotSeries energy{"total free energy", {}, {}};
    PlotSeries err{"one-step squared error", {}, {}};
    for (const auto& s : trace.steps) {
      energy.x.push_back(static_cast<double>(s.step));
      energy.y.push_back(s.total_free_energy);
      if (s.prediction_error_sq) {
        err.x.push_back(static_cast<double>(s.step));
        err.y.push_back(*s.prediction_error_sq);
      }
    }
    write_svg(options, "free_energy.svg", line_plot({energy}, "Free energy per step", "step", "F"));
    write_svg(options, "prediction_error.svg", line_plot({err}, "One-step prediction error", "step", "e^2"));
  }
  bool any_prediction = false;
  for (const auto& s : trace.steps) any_prediction = any_prediction || s.prediction_error_sq.has_value();
  if (any_prediction && seq.variance() > 0.0) {
    out << fmt::format("normalized_mse {}\n", num(normalized_mse(trace, seq)));
  } else {
    out << "normalized_mse n/a\n";
  }
  return kOk;
}

int cmd_eval(const RunConfig& config, const Options& options, std::ostream& out) {
  if (config.horizon < 1) throw ConfigError(fmt::format("horizon: must be >= 1, got {}", config.horizon));
  if (config.checkpoint.empty()) throw ConfigError("checkpoint: required for eval");
  Model model = load_checkpoint(config.checkpoint);
  const Sequence seq = require_sequence(config);
  check_observation_width(model.config, seq);
  const int stride = model.levels.back().best_replica().stride.dt();
  const long need = static_cast<long>(config.horizon) * stride;
  const long context = config.context ? *config.context : static_cast<long>(seq.size()) - need;
  if (context < 1 || context > static_cast<long>(seq.size())) {
    throw ConfigError(fmt::format("context: {} is outside [1, {}] for horizon {} at stride {}", context,
                                  seq.size(), config.horizon, stride));
  }

  // Inference only: states settle on the context, parameters stay fixed.
  model.clock = 0;
  for (auto& set : model.levels) {
    for (auto& rep : set.replicas) rep.sampled = rep.has_previous = false;
  }
  long last_top = 0;
  for (long t = 0; t < context; ++t) {
    if (model.clock % static_cast<std::uint64_t>(stride) == 0) last_top = t;
    step(model, seq.samples[static_cast<std::size_t>(t)], StepOptions{false, false});
  }
  if (last_top + need >= static_cast<long>(seq.size())) {
    throw ConfigError(fmt::format("sequence: {} samples are too few for context {} and horizon {}", seq.size(),
                                  context, config.horizon));
  }
  const std::vector<Tensor> pred = predict_rollout(model, config.horizon);
  std::string csv = std::string(kRolloutHeader) + "\n";
  double se = 0.0;
  std::size_t count = 0;
  PlotSeries p{"predicted", {}, {}}, a{"actual", {}, {}};
  for (int i = 0; i < config.horizon; ++i) {
    const long time = last_top + static_cast<long>(i + 1) * stride;
    const Tensor& actual = seq.samples[static_cast<std::size_t>(time)];
    for (std::size_t d = 0; d < actual.size(); ++d) {
      const double y = pred[static_cast<std::size_t>(i)][d];
      csv += fmt::format("{},{},{},{},{}\n", i + 1, time, d, num(y), num(actual[d]));
      se += (y - actual[d]) * (y - actual[d]);
      ++count;
    }
    p.x.push_back(static_cast<double>(time));
    p.y.push_back(pred[static_cast<std::size_t>(i)][0]);
    a.x.push_back(static_cast<double>(time));
    a.y.push_back(actual[0]);
  }
  write_text_file(options.out / "rollout.csv", csv);
  write_svg(options, "rollout.svg", line_plot({p, a}, "Closed-loop rollout", "t", "x[0]"));
  out << fmt::format("rollout_mse {}\n", num(se / static_cast<double>(count)));
  return kOk;
}

std::vector<SweepRow> stride_sweep(const ModelConfig& base, const Sequence& sequence,
                                   const std::vector<int>& strides) {
  if (strides.empty()) throw ConfigError("strides: empty stride list");
  for (int s : strides) {
    if (s < 1) throw ConfigError(fmt::format("strides: {} is not >= 1", s));
  }
  std::vector<SweepRow> rows;
  for (int s : strides) {
    ModelConfig mc = base;
    mc.replicas = 1;
    mc.stride_candidates.assign(static_cast<std::size_t>(mc.levels), {s});
    mc.initial_strides.assign(static_cast<std::size_t>(mc.levels), {s});
    Model model = build(mc);
    const TrainTrace trace = train(model, sequence);
    const std::size_t n = trace.steps.size();
    const std::size_t from = n - n / 4;
    const std::size_t order = static_cast<std::size_t>(std::min(2, mc.orders));
    double ed = 0.0, eh = 0.0;
    std::size_t ned = 0, neh = 0;
    std::vector<Tensor> states;
    for (std::size_t i = from; i < n; ++i) {
      const auto& st = trace.steps[i];
      bool active = false;
      for (const auto& c : st.channels) {
        if (c.key.level != 0 || c.key.order != 0) continue;
        if (c.key.channel == Channel::transition) {
          ed += mean_abs(c.epsilon);
          ++ned;
        } else if (c.key.channel == Channel::hierarchical) {
          eh += mean_abs(c.epsilon);
          ++neh;
        }
        active = true;
      }
      if (active || st.clock % static_cast<std::uint64_t>(s) == 0) states.push_back(st.best_states[order]);
    }
    SweepRow row;
    row.stride = s;
    row.mean_abs_e_d = ned ? ed / static_cast<double>(ned) : std::nan("");
    row.mean_abs_e_h = neh ? eh / static_cast<double>(neh) : 0.0;
    if (!states.empty()) {
      const std::size_t d = states.front().size();
      double var = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (const auto& x : states) mean += x[j];
        mean /= static_cast<double>(states.size());
        double v = 0.0;
        for (const auto& x : states) v += (x[j] - mean) * (x[j] - mean);
        var += v / static_cast<double>(states.size());
      }
      row.order2_state_variance = var / static_cast<double>(d);
    }
    if (!std::isfinite(row.mean_abs_e_d)) {
      throw ConfigError(fmt::format("strides: stride {} made no predictions in the last quarter of the sequence", s));
    }
    rows.push_back(row);
  }
  return rows;
}

int cmd_stride_sweep(const RunConfig& config, const Options& options, std::ostream& out) {
  if (config.strides.empty()) throw ConfigError("strides: empty stride list");
  const Sequence seq = require_sequence(config);
  check_observation_width(config.model, seq);
  const auto rows = stride_sweep(config.model, seq, config.strides);
  std::string csv = std::string(kSweepHeader) + "\n";
  PlotSeries ed{"mean |e_d|", {}, {}};
  for (const auto& r : rows) {
    csv += fmt::format("{},{},{},{}\n", r.stride, num(r.mean_abs_e_d), num(r.mean_abs_e_h),
                       num(r.order2_state_variance));
    ed.x.push_back(r.stride);
    ed.y.push_back(r.mean_abs_e_d);
    out << fmt::format("stride {:>3}  mean_abs_e_d {:.6g}  order2_var {:.6g}\n", r.stride, r.mean_abs_e_d,
                       r.order2_state_variance);
  }
  write_text_file(options.out / "stride_sweep.csv", csv);
  write_svg(options, "stride_sweep.svg", line_plot({ed}, "Transition error by stride", "stride", "mean |e_d|"));
  return kOk;
}

int cmd_plan(const RunConfig& config, const Options& options, std::ostream& out) {
  if (config.actions.empty()) throw ConfigError("actions: empty action set");
  if (config.checkpoint.empty()) throw ConfigError("checkpoint: required for plan");
  const Model model = load_checkpoint(config.checkpoint);
  const std::size_t top = model.config.widths.back();
  const std::size_t obs = model.config.widths.front();
  std::vector<Action> actions;
  for (std::size_t i = 0; i < config.actions.size(); ++i) {
    Tensor delta = column_from(config.actions[i], fmt::format("actions[{}]", i));
    if (delta.rows() != top) {
      throw ConfigError(fmt::format("actions[{}]: expected {} entries (top-level width)", i, top));
    }
    actions.push_back({std::move(delta)});
  }
  std::vector<int> horizons = config.horizons;
  if (horizons.empty()) horizons = {config.horizon};
  const auto policies = enumerate_policies(actions, config.lengths, horizons);

  Preference pref;
  if (!config.goal_trajectory.empty()) {
    for (std::size_t i = 0; i < config.goal_trajectory.size(); ++i) {
      pref.goal.push_back(column_from(config.goal_trajectory[i], fmt::format("goal_trajectory[{}]", i)));
    }
  } else if (!config.goal.empty()) {
    pref.goal.push_back(column_from(config.goal, "goal"));
  } else {
    throw ConfigError("goal: either goal or goal_trajectory is required");
  }
  for (const auto& g : pref.goal) {
    if (g.rows() != obs) throw ConfigError(fmt::format("goal: expected {} entries (observation width)", obs));
  }
  Tensor pi = config.goal_precision.value_or(Tensor::identity(obs));
  if (pi.is_scalar() && obs > 1) pi = scale(Tensor::identity(obs), pi.item());
  if (pi.rows() != obs) throw ConfigError("goal_precision: dimension differs from the observation width");
  for (std::size_t r = 0; r < obs; ++r) {
    for (std::size_t c = 0; c < obs; ++c) {
      if (pi(r, c) != pi(c, r)) throw ConfigError("goal_precision: must be symmetric");
    }
  }
  pref.goal_precision = Precision::from_precision(pi);

  const PolicySelection sel = select_policy(model, policies, pref, model.config.execution);
  std::string csv = std::string(kPlanHeader) + "\n";
  for (std::size_t i = 0; i < policies.size(); ++i) {
    std::string idx;
    for (std::size_t k = 0; k < policies[i].indices.size(); ++k) {
      idx += (k ? "-" : "") + std::to_string(policies[i].indices[k]);
    }
    csv += fmt::format("{},{},{},{},{}\n", i, idx, policies[i].horizon, num(sel.scores[i].value),
                       i == sel.best ? 1 : 0);
  }
  write_text_file(options.out / "plan.csv", csv);
  if (options.svg) {
    PlotSeries s{"EFE", {}, {}};
    for (std::size_t i = 0; i < policies.size(); ++i) {
      s.x.push_back(static_cast<double>(i));
      s.y.push_back(sel.scores[i].value);
    }
    write_svg(options, "plan.svg", line_plot({s}, "Expected free energy per policy", "policy", "EFE"));
  }
  out << fmt::format("selected policy {} (horizon {}) score {}\n", sel.best, policies[sel.best].horizon,
                     num(sel.scores[sel.best].value));
  return kOk;
}

int cmd_gradcheck(const RunConfig& config, const Options&, std::ostream& out) {
  GradCheckOptions o;
  o.seed = config.seed;
  o.inject_fault = config.inject_fault;
  const GradCheckSummary summary = run_gradcheck(o);
  for (const auto& c : summary.cases) {
    out << fmt::format("{} {} max_error {:.3e} tol {:.0e}\n", c.passed() ? "ok  " : "FAIL", c.name, c.max_error,
                       c.tolerance);
  }
  out << fmt::format("gradcheck: {} cases, {} failures\n", summary.cases.size(), summary.failures());
  return summary.passed() ? kOk : kCheckFailure;
}

int run(const Options& options, std::ostream& out, std::ostream& err) {
  try {
    RunConfig config;
    if (options.config) {
      config = load_run_config(*options.config);
    } else if (options.command != "gradcheck") {
      throw ConfigError("--config is required");
    }
    if (options.command == "generate") return cmd_generate(config, options, out);
    if (options.command == "train") return cmd_train(config, options, out);
    if (options.command == "eval") return cmd_eval(config, options, out);
    if (options.command == "stride-sweep") return cmd_stride_sweep(config, options, out);
    if (options.command == "plan") return cmd_plan(config, options, out);
    if (options.command == "gradcheck") return cmd_gradcheck(config, options, out);
    throw ConfigError(fmt::format("unknown command '{}'", options.command));
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::invalid_argument& e) {
    err << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kCheckFailure;
  }
}

}  // namespace gpc::cli
