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

#include "gpc/network.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <functional>
#include <memory>
#include <numeric>
#include <random>

#include "gpc/error.hpp"

namespace gpc {

void ModelConfig::validate() const {
  if (levels < 1) throw ConfigError("levels must be >= 1");
  if (orders < 0) throw ConfigError("orders must be >= 0");
  if (widths.size() != static_cast<std::size_t>(levels)) {
    throw ConfigError(fmt::format("widths: expected {} entries, got {}", levels, widths.size()));
  }
  for (std::size_t w : widths) {
    if (w == 0) throw ConfigError("widths must be positive");
  }
  if (replicas < 1) throw ConfigError("replicas must be >= 1");
  if (!stride_candidates.empty() && stride_candidates.size() != static_cast<std::size_t>(levels)) {
    throw ConfigError("stride_candidates: one list per level required");
  }
  if (!initial_strides.empty() && initial_strides.size() != static_cast<std::size_t>(levels)) {
    throw ConfigError("initial_strides: one list per level required");
  }
  for (int l = 0; l < levels; ++l) {
    const StridePrior p = prior(l);
    try {
      p.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("stride_candidates[{}]: {}", l, e.what()));
    }
    if (initial_strides.empty()) {
      if (p.candidates.size() < static_cast<std::size_t>(replicas)) {
        throw ConfigError(fmt::format("stride_candidates[{}]: fewer candidates than replicas", l));
      }
      continue;
    }
    std::vector<int> s = initial_strides[static_cast<std::size_t>(l)];
    if (s.size() != static_cast<std::size_t>(replicas)) {
      throw ConfigError(fmt::format("initial_strides[{}]: expected {} strides", l, replicas));
    }
    std::sort(s.begin(), s.end());
    if (s.front() < 1) throw ConfigError(fmt::format("initial_strides[{}]: strides must be >= 1", l));
    if (std::adjacent_find(s.begin(), s.end()) != s.end()) {
      throw ConfigError(fmt::format("initial_strides[{}]: strides must be distinct", l));
    }
  }
  if (!(eta_mu > 0.0)) throw ConfigError("eta_mu must be positive");
  if (!(eta_theta > 0.0)) throw ConfigError("eta_theta must be positive");
  if (!(eta_pi > 0.0 && eta_pi <= 1.0)) throw ConfigError("eta_pi must be in (0, 1]");
  if (settle_iterations < 1) throw ConfigError("settle_iterations must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (replica_window < 1) throw ConfigError("replica_window must be >= 1");
  if (!(resample_ratio >= 1.0)) throw ConfigError("resample_ratio must be >= 1");
  if (!(init_scale >= 0.0)) throw ConfigError("init_scale must be >= 0");
  if (!(stride_noise >= 0.0 && stride_noise <= 1.0)) throw ConfigError("stride_noise must be in [0, 1]");
}

StridePrior ModelConfig::prior(int level) const {
  std::vector<int> candidates;
  if (stride_candidates.empty()) {
    candidates.resize(static_cast<std::size_t>(std::max(replicas, 1)));
    std::iota(candidates.begin(), candidates.end(), 1);
  } else {
    candidates = stride_candidates.at(static_cast<std::size_t>(level));
  }
  return StridePrior::uniform(std::move(candidates), stride_noise);
}

namespace {

std::size_t smallest_stride(const ReplicaSet& set) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < set.replicas.size(); ++i) {
    if (set.replicas[i].stride < set.replicas[best].stride) best = i;
  }
  return best;
}

void label_levels(Replica& r, int level) {
  for (auto& s : r.state.orders) s.level = level;
  for (auto& s : r.previous.orders) s.level = level;
}

// Flat view of every state in the grid: slot = (level, replica, order).
class Grid {
 public:
  explicit Grid(const Model& m) : model_(m), orders_(m.config.order_count()) {
    std::size_t offset = 0;
    for (const auto& set : m.levels) {
      offsets_.push_back(offset);
      offset += set.replicas.size() * orders_;
    }
    size_ = offset;
  }

  std::size_t size() const { return size_; }
  std::size_t slot(int level, int replica, int order) const {
    return offsets_[static_cast<std::size_t>(level)] +
           static_cast<std::size_t>(replica) * orders_ + static_cast<std::size_t>(order);
  }
  const Replica& replica(int level, int r) const {
    return model_.levels[static_cast<std::size_t>(level)].replicas[static_cast<std::size_t>(r)];
  }
  int best(int level) const {
    return static_cast<int>(model_.levels[static_cast<std::size_t>(level)].best);
  }

  std::vector<Tensor> gather() const {
    std::vector<Tensor> states(size_);
    for (int l = 0; l < static_cast<int>(model_.levels.size()); ++l) {
      const auto& set = model_.levels[static_cast<std::size_t>(l)];
      for (int r = 0; r < static_cast<int>(set.replicas.size()); ++r) {
        for (int k = 0; k < static_cast<int>(orders_); ++k) {
          states[slot(l, r, k)] = set.replicas[static_cast<std::size_t>(r)].state.orders[static_cast<std::size_t>(k)].mu;
        }
      }
    }
    return states;
  }

  void scatter(Model& m, const std::vector<Tensor>& states) const {
    for (int l = 0; l < static_cast<int>(m.levels.size()); ++l) {
      auto& set = m.levels[static_cast<std::size_t>(l)];
      for (int r = 0; r < static_cast<int>(set.replicas.size()); ++r) {
        for (int k = 0; k < static_cast<int>(orders_); ++k) {
          set.replicas[static_cast<std::size_t>(r)].state.orders[static_cast<std::size_t>(k)].mu =
              states[slot(l, r, k)].detached();
        }
      }
    }
  }

 private:
  const Model& model_;
  std::size_t orders_;
  std::vector<std::size_t> offsets_;
  std::size_t size_ = 0;
};

std::vector<ChannelKey> active_keys(const Model& m) {
  std::vector<ChannelKey> keys;
  const int L = static_cast<int>(m.levels.size());
  const int K = m.config.orders;
  for (int l = 0; l < L; ++l) {
    const auto& set = m.levels[static_cast<std::size_t>(l)];
    for (int r = 0; r < static_cast<int>(set.replicas.size()); ++r) {
      const Replica& rep = set.replicas[static_cast<std::size_t>(r)];
      if (!rep.active) continue;
      for (int k = 0; k <= K; ++k) {
        if (rep.has_previous) keys.push_back({l, r, k, Channel::transition});
        if (k < K) keys.push_back({l, r, k, Channel::derivative});
      }
    }
    if (l + 1 < L) {
      const int b = static_cast<int>(set.best);
      const auto& above = m.levels[static_cast<std::size_t>(l + 1)];
      if (set.replicas[set.best].active && above.replicas[above.best].active) {
        for (int k = 0; k <= K; ++k) keys.push_back({l, b, k, Channel::hierarchical});
      }
    }
  }
  return keys;
}

const Precision& precision_of(const Model& m, const ChannelKey& key) {
  const auto l = static_cast<std::size_t>(key.level);
  const auto k = static_cast<std::size_t>(key.order);
  const Replica& rep = m.levels[l].replicas[static_cast<std::size_t>(key.replica)];
  switch (key.channel) {
    case Channel::transition: return rep.transition_precisions[k];
    case Channel::derivative: return rep.derivative_precisions[k];
    case Channel::hierarchical: return m.hierarchical_precisions[l][k];
  }
  throw std::logic_error("unknown channel");
}

Precision& precision_of(Model& m, const ChannelKey& key) {
  return const_cast<Precision&>(precision_of(static_cast<const Model&>(m), key));
}

// Slots whose state enters the channel error.
std::vector<std::size_t> channel_slots(const Grid& g, const ChannelKey& key) {
  switch (key.channel) {
    case Channel::transition: return {g.slot(key.level, key.replica, key.order)};
    case Channel::derivative:
      return {g.slot(key.level, key.replica, key.order), g.slot(key.level, key.replica, key.order + 1)};
    case Channel::hierarchical:
      return {g.slot(key.level, key.replica, key.order), g.slot(key.level + 1, g.best(key.level + 1), key.order)};
  }
  return {};
}

using StateAt = std::function<const Tensor&(std::size_t slot)>;

Tensor channel_epsilon(const Model& m, const Grid& g, const ChannelKey& key, const StateAt& x) {
  const Replica& rep = g.replica(key.level, key.replica);
  const auto k = static_cast<std::size_t>(key.order);
  const Tensor& own = x(g.slot(key.level, key.replica, key.order));
  switch (key.channel) {
    case Channel::transition:
      return sub(own, transition(rep.transitions[k], rep.previous.orders[k].mu, rep.stride));
    case Channel::derivative: {
      const Tensor& above = x(g.slot(key.level, key.replica, key.order + 1));
      return sub(discrete_derivative(rep.transitions[k], own, rep.stride),
                 predict(rep.derivative_predictors[k], above));
    }
    case Channel::hierarchical: {
      const Tensor& above = x(g.slot(key.level + 1, g.best(key.level + 1), key.order));
      return sub(own, predict(m.hierarchical[static_cast<std::size_t>(key.level)], above));
    }
  }
  throw std::logic_error("unknown channel");
}

double total_energy(const Model& m, const Grid& g, const std::vector<ChannelKey>& keys,
                    const std::vector<Tensor>& states) {
  const StateAt at = [&](std::size_t s) -> const Tensor& { return states[s]; };
  double total = 0.0;
  for (const auto& key : keys) {
    const Precision& p = precision_of(m, key);
    total += layer_energy({key.channel, channel_epsilon(m, g, key, at)}, p);
  }
  return total;
}

std::vector<std::size_t> free_slots(const Model& m, const Grid& g) {
  std::vector<std::size_t> out;
  for (int l = 0; l < static_cast<int>(m.levels.size()); ++l) {
    const auto& set = m.levels[static_cast<std::size_t>(l)];
    for (int r = 0; r < static_cast<int>(set.replicas.size()); ++r) {
      if (!set.replicas[static_cast<std::size_t>(r)].active) continue;
      for (int k = (l == 0 ? 1 : 0); k <= m.config.orders; ++k) out.push_back(g.slot(l, r, k));
    }
  }
  return out;
}

double squared_norm(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v * v;
  return s;
}

}  // namespace

Model build(const ModelConfig& config) {
  config.validate();
  Model m;
  m.config = config;
  std::mt19937_64 rng(config.seed);
  const std::size_t orders = config.order_count();
  for (int l = 0; l < config.levels; ++l) {
    const StridePrior prior = config.prior(l);
    std::vector<int> strides;
    if (!config.initial_strides.empty()) {
      strides = config.initial_strides[static_cast<std::size_t>(l)];
    } else if (prior.candidates.size() == static_cast<std::size_t>(config.replicas)) {
      strides = prior.candidates;
    } else {
      while (strides.size() < static_cast<std::size_t>(config.replicas)) {
        strides.push_back(sample_stride(prior.exclude(strides), rng).dt());
      }
    }
    ReplicaSet set;
    for (int s : strides) {
      Replica r = make_replica(config.widths[static_cast<std::size_t>(l)], orders, Stride(s),
                               config.activation, config.init_scale, rng);
      label_levels(r, l);
      set.replicas.push_back(std::move(r));
    }
    set.best = smallest_stride(set);
    m.levels.push_back(std::move(set));
  }
  std::uniform_real_distribution<double> init(-config.init_scale, config.init_scale);
  for (int l = 0; l + 1 < config.levels; ++l) {
    Tensor w(config.widths[static_cast<std::size_t>(l)], config.widths[static_cast<std::size_t>(l + 1)]);
    for (double& v : w.data()) v = init(rng);
    m.hierarchical.push_back({std::move(w), config.activation});
    m.hierarchical_precisions.emplace_back(orders,
                                           Precision::identity(config.widths[static_cast<std::size_t>(l)]));
  }
  return m;
}

void clamp(Model& model, const Tensor& observation) {
  const std::size_t width = model.config.widths.front();
  if (observation.rows() != width || observation.cols() != 1) {
    throw ShapeError(fmt::format("observation: expected {}x1, got {}", width,
                                 to_string(observation.shape())));
  }
  if (!observation.all_finite()) throw std::domain_error("observation has non-finite entries");
  for (std::size_t l = 0; l < model.levels.size(); ++l) {
    for (auto& rep : model.levels[l].replicas) {
      rep.active = model.clock % static_cast<std::uint64_t>(rep.stride.dt()) == 0;
      if (!rep.active) continue;
      if (rep.sampled) {
        rep.previous = rep.state;
        rep.has_previous = true;
      }
      rep.sampled = true;
      if (l == 0) rep.state.orders[0].mu = observation.detached();
    }
  }
}

std::vector<double> settle(Model& model, int iterations) {
  const Grid grid(model);
  const std::vector<ChannelKey> keys = active_keys(model);
  const std::vector<std::size_t> free = free_slots(model, grid);

  std::vector<std::vector<std::size_t>> touching(grid.size());
  for (std::size_t c = 0; c < keys.size(); ++c) {
    for (std::size_t s : channel_slots(grid, keys[c])) touching[s].push_back(c);
  }

  std::vector<Tensor> states = grid.gather();
  double energy = total_energy(model, grid, keys, states);
  std::vector<double> energies{energy};
  std::vector<Tensor> grads(free.size());

  for (int it = 0; it < iterations && !free.empty(); ++it) {
    for_each_index(model.config.execution, free.size(), [&](std::size_t i) {
      const std::size_t slot = free[i];
      Tape tape;
      const Tensor leaf = tape.leaf(states[slot]);
      const StateAt at = [&](std::size_t s) -> const Tensor& { return s == slot ? leaf : states[s]; };
      Tensor local = Tensor::scalar(0.0);
      for (std::size_t c : touching[slot]) {
        local = add(local, quadratic_energy(channel_epsilon(model, grid, keys[c], at), precision_of(model, keys[c])));
      }
      grads[i] = local.is_taped() ? tape.backward(local).at(*leaf.node())
                                  : Tensor::zeros(states[slot].rows(), 1);
    });
    double g2 = 0.0;
    for (const auto& g : grads) g2 += squared_norm(g);
    if (g2 == 0.0 || !std::isfinite(g2)) break;

    bool accepted = false;
    double step = model.config.eta_mu;
    for (int h = 0; h <= kMaxHalvings; ++h, step *= 0.5) {
      std::vector<Tensor> candidate = states;
      for (std::size_t i = 0; i < free.size(); ++i) {
        Tensor& x = candidate[free[i]];
        for (std::size_t j = 0; j < x.size(); ++j) x[j] -= step * grads[i][j];
      }
      const double e = total_energy(model, grid, keys, candidate);
      if (std::isfinite(e) && e <= energy - kArmijo * step * g2) {
        states = std::move(candidate);
        energy = e;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    energies.push_back(energy);
  }
  grid.scatter(model, states);
  return energies;
}

std::vector<ChannelReport> channel_errors(const Model& model) {
  const Grid grid(model);
  const std::vector<Tensor> states = grid.gather();
  const StateAt at = [&](std::size_t s) -> const Tensor& { return states[s]; };
  std::vector<ChannelReport> out;
  for (const auto& key : active_keys(model)) {
    ChannelReport rep;
    rep.key = key;
    rep.stride = grid.replica(key.level, key.replica).stride.dt();
    const ErrorChannel eps{key.channel, channel_epsilon(model, grid, key, at)};
    const Precision& p = precision_of(model, key);
    rep.error_norm = eps.epsilon.norm();
    rep.xi_norm = eps.xi(p).norm();
    rep.energy = layer_energy(eps, p);
    rep.epsilon = eps.epsilon;
    out.push_back(std::move(rep));
  }
  return out;
}

double total_free_energy(const Model& model) {
  double total = 0.0;
  for (const auto& c : channel_errors(model)) total += c.energy;
  return total;
}

namespace {

void learn_weights(Model& model) {
  const double rate = model.config.eta_theta;
  std::vector<std::function<void()>> jobs;

  for (auto& set : model.levels) {
    for (auto& rep : set.replicas) {
      if (!rep.active) continue;
      const std::size_t K = rep.transitions.size() - 1;
      // Derivative targets use the transitions as they were before this update.
      auto targets = std::make_shared<std::vector<Tensor>>();
      for (std::size_t k = 0; k < K; ++k) {
        targets->push_back(discrete_derivative(rep.transitions[k], rep.state.orders[k].mu, rep.stride));
      }
      for (std::size_t k = 0; k <= K; ++k) {
        if (!rep.has_previous) break;
        jobs.push_back([&rep, k, rate] {
          PredictionWeights w{rep.transitions[k].weight, Activation::linear};
          update_weights(w, rep.state.orders[k].mu, rep.previous.orders[k].mu, rep.transition_precisions[k], rate);
          rep.transitions[k].weight = std::move(w.weight);
        });
      }
      for (std::size_t k = 0; k < K; ++k) {
        jobs.push_back([&rep, k, rate, targets] {
          update_weights(rep.derivative_predictors[k], (*targets)[k], rep.state.orders[k + 1].mu,
                         rep.derivative_precisions[k], rate);
        });
      }
    }
  }
  for (std::size_t l = 0; l + 1 < model.levels.size(); ++l) {
    const Replica& below = model.levels[l].best_replica();
    const Replica& above = model.levels[l + 1].best_replica();
    if (!below.active || !above.active) continue;
    jobs.push_back([&model, &below, &above, l, rate] {
      std::vector<PredictionTerm> terms;
      for (std::size_t k = 0; k < below.state.orders.size(); ++k) {
        terms.push_back({&below.state.orders[k].mu, &above.state.orders[k].mu,
                         &model.hierarchical_precisions[l][k]});
      }
      update_weights(model.hierarchical[l], terms, rate);
    });
  }
  for_each_index(model.config.execution, jobs.size(), [&](std::size_t i) { jobs[i](); });
}

}  // namespace

void update_parameters(Model& model, const std::vector<ChannelReport>& channels, StepOptions options) {
  if (options.learn_weights) learn_weights(model);
  if (options.learn_precisions) {
    for_each_index(model.config.execution, channels.size(), [&](std::size_t i) {
      update_covariance(precision_of(model, channels[i].key), channels[i].epsilon, model.config.eta_pi);
    });
  }
}

StepReport step(Model& model, const Tensor& observation, StepOptions options) {
  clamp(model, observation);
  StepReport report;
  report.step = model.step_count;
  report.clock = model.clock;
  report.settle_energies = settle(model, model.config.settle_iterations);
  report.channels = channel_errors(model);

  for (const auto& c : report.channels) report.total_free_energy += c.energy;
  report.levels.resize(model.levels.size());
  for (std::size_t l = 0; l < model.levels.size(); ++l) {
    report.levels[l].active_stride = model.levels[l].best_replica().stride.dt();
  }
  for (const auto& c : report.channels) {
    const auto l = static_cast<std::size_t>(c.key.level);
    if (c.key.replica == static_cast<int>(model.levels[l].best)) report.levels[l].error_sum += c.error_norm;
    if (c.key.level == 0 && c.key.order == 0 && c.key.channel == Channel::transition &&
        c.key.replica == static_cast<int>(model.levels[0].best)) {
      report.prediction_error_sq = squared_norm(c.epsilon);
    }
  }
  for (const auto& s : model.levels[0].best_replica().state.orders) report.best_states.push_back(s.mu);

  update_parameters(model, report.channels, options);

  for (std::size_t l = 0; l < model.levels.size(); ++l) {
    auto& set = model.levels[l];
    for (std::size_t r = 0; r < set.replicas.size(); ++r) {
      Replica& rep = set.replicas[r];
      if (!rep.active || !rep.has_previous) continue;
      double score = 0.0;
      for (const auto& c : report.channels) {
        if (c.key.level == static_cast<int>(l) && c.key.replica == static_cast<int>(r) &&
            c.key.channel != Channel::hierarchical) {
          score += c.error_norm;
        }
      }
      rep.record_error(score, model.config.replica_window);
    }
  }
  ++model.clock;
  ++model.step_count;
  return report;
}

TrainTrace train(Model& model, const Sequence& sequence, int epochs) {
  if (sequence.empty()) throw ConfigError("training sequence is empty");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  TrainTrace trace;
  const std::size_t window = model.config.replica_window;
  for (int e = 0; e < epochs; ++e) {
    model.clock = 0;
    for (auto& set : model.levels) {
      for (auto& rep : set.replicas) {
        rep.sampled = false;
        rep.has_previous = false;
      }
    }
    for (const Tensor& obs : sequence.samples) {
      trace.steps.push_back(step(model, obs));
      if (model.config.replicas < 2 || model.step_count % window != 0) continue;
      for (std::size_t l = 0; l < model.levels.size(); ++l) {
        std::seed_seq seq{static_cast<std::uint32_t>(model.config.seed),
                          static_cast<std::uint32_t>(model.config.seed >> 32),
                          static_cast<std::uint32_t>(model.step_count),
                          static_cast<std::uint32_t>(model.step_count >> 32),
                          static_cast<std::uint32_t>(l)};
        std::mt19937_64 rng(seq);
        const auto width = model.config.widths[l];
        const ReplicaFactory fresh = [&](Stride s) {
          Replica r = make_replica(width, model.config.order_count(), s, model.config.activation,
                                   model.config.init_scale, rng);
          label_levels(r, static_cast<int>(l));
          r.active = false;
          return r;
        };
        trace.decisions.push_back(manage_replicas(model.levels[l], window, model.config.resample_ratio,
                                                  model.config.prior(static_cast<int>(l)), rng, fresh));
      }
    }
  }
  return trace;
}

TrainTrace train(Model& model, const Sequence& sequence) {
  return train(model, sequence, model.config.epochs);
}

double normalized_mse(const TrainTrace& trace, const Sequence& sequence, double fraction) {
  std::vector<double> errors;
  for (const auto& s : trace.steps) {
    if (s.prediction_error_sq) errors.push_back(*s.prediction_error_sq);
  }
  if (errors.empty()) throw std::domain_error("no one-step predictions were made");
  const auto count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(errors.size()))));
  double sum = 0.0;
  for (std::size_t i = errors.size() - count; i < errors.size(); ++i) sum += errors[i];
  const double mse = sum / static_cast<double>(count) / static_cast<double>(sequence.dimension());
  const double var = sequence.variance();
  if (!(var > 0.0)) throw std::domain_error("sequence has zero variance");
  return mse / var;
}

std::vector<Tensor> closed_loop_rollout(const Model& model, int horizon,
                                        const std::vector<Tensor>& actions) {
  if (horizon < 1) throw ConfigError(fmt::format("horizon must be >= 1, got {}", horizon));
  const Replica& top = model.levels.back().best_replica();
  Tensor s = top.state.orders[0].mu.detached();
  std::vector<Tensor> out;
  for (int i = 0; i < horizon; ++i) {
    if (static_cast<std::size_t>(i) < actions.size()) {
      if (actions[static_cast<std::size_t>(i)].shape() != s.shape()) {
        throw ShapeError(fmt::format("action: expected {}, got {}", to_string(s.shape()),
                                     to_string(actions[static_cast<std::size_t>(i)].shape())));
      }
      s = add(s, actions[static_cast<std::size_t>(i)]);
    }
    s = transition(top.transitions[0], s, top.stride);
    Tensor y = s;
    for (std::size_t l = model.hierarchical.size(); l-- > 0;) y = predict(model.hierarchical[l], y);
    out.push_back(std::move(y));
  }
  return out;
}

std::vector<Tensor> predict_rollout(const Model& model, int horizon) {
  return closed_loop_rollout(model, horizon, {});
}

double consistency_gap(const Model& model, int level) {
  if (level < 0 || level + 1 >= static_cast<int>(model.levels.size())) {
    throw std::out_of_range(fmt::format("consistency_gap: level {} needs levels {} and {}", level,
                                        level, level + 1));
  }
  const auto l = static_cast<std::size_t>(level);
  const Replica& below = model.levels[l].best_replica();
  const Replica& above = model.levels[l + 1].best_replica();
  const Tensor& x = above.state.orders[0].mu;
  const PredictionWeights& h = model.hierarchical[l];
  const Tensor a = transition(below.transitions[0], predict(h, x), below.stride);
  const Tensor b = predict(h, transition(above.transitions[0], x, above.stride));
  return sub(a, b).norm();
}

}  // namespace gpc
