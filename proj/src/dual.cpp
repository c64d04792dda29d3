#include "ctrl_duality/dual.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>

#include "ctrl_duality/errors.hpp"
#include "ctrl_duality/rng.hpp"
#include "ctrl_duality/stats.hpp"

namespace ctrl_duality {

PathObjective::PathObjective(const ModelSpec& model, PhiFn phi, const NoiseBatch& batch,
                             std::size_t path)
    : model_(&model), phi_(std::move(phi)), batch_(&batch), path_(path),
      states_(batch.grid().intervals() + 1, model.dim), phi_buf_(model.dim), mu_buf_(model.dim) {
  if (model.payoff.kind == PayoffKind::path_functional && !model.state_independent) {
    throw ConfigError("path-dependent payoffs need state-independent drift and volatility");
  }
  if (model.payoff.kind == PayoffKind::path_functional ? !model.payoff.functional
                                                       : !model.payoff.terminal) {
    throw ConfigError("model payoff is not set");
  }
}

double PathObjective::operator()(const ControlPath& a) {
  ++evaluations_;
  const ModelSpec& model = *model_;
  const auto& grid = batch_->grid();
  const std::size_t n = grid.intervals();
  const std::size_t d = model.dim;
  const bool american = model.payoff.kind == PayoffKind::american;

  std::copy(model.x0.begin(), model.x0.end(), states_.at(0).begin());
  double discount = 1.0;
  double running = 0.0;
  double martingale = 0.0;
  double best = american ? model.terminal_payoff(states_.at(0)) : 0.0;

  for (std::size_t i = 0; i < n; ++i) {
    const double t = grid.time(i);
    const double dt = grid.step(i);
    const auto ai = a.at(i);
    const auto x = states_.at(i);
    auto next = states_.at(i + 1);

    if (phi_) phi_(i, t, x, phi_buf_);
    std::fill(mu_buf_.begin(), mu_buf_.end(), 0.0);
    if (model.dynamics == Dynamics::general && model.drift) model.drift(t, ai, x, mu_buf_);
    if (model.reward) running += discount * model.reward(t, ai, x) * dt;

    std::copy(x.begin(), x.end(), next.begin());
    advance(model, t, dt, ai, batch_->dz(path_, i), batch_->dw(path_, i), next, scratch_);

    if (phi_) {
      double inc = 0.0;
      for (std::size_t j = 0; j < d; ++j) inc += phi_buf_[j] * (next[j] - x[j] - mu_buf_[j] * dt);
      martingale += discount * inc;
    }
    if (model.rate) discount *= std::exp(-model.rate(t, ai, x) * dt);

    if (american) {
      best = std::max(best, discount * model.terminal_payoff(next) + running - martingale);
    }
  }

  if (american) return best;
  const double payoff = model.payoff.kind == PayoffKind::path_functional
                            ? model.functional_payoff(states_)
                            : model.terminal_payoff(states_.at(n));
  return discount * payoff + running - martingale;
}

namespace {

// Expands a blocked parameter vector into a control path.
void expand(std::span<const double> params, std::size_t block, std::size_t k, ControlPath& out) {
  for (std::size_t i = 0; i < out.intervals(); ++i) {
    const auto src = params.subspan((i / block) * k, k);
    std::copy(src.begin(), src.end(), out.at(i).begin());
  }
}

}  // namespace

PathMax maximize_path(PathObjective& obj, const ControlBox& box, const SearchOptions& options,
                      std::span<const ControlPath> candidates) {
  const std::size_t n = obj.batch().grid().intervals();
  const std::size_t k = box.dim();
  const std::size_t start_evals = obj.evaluations();
  PathMax best;
  best.value = -std::numeric_limits<double>::infinity();
  bool have = false;
  double reference = 0.0;

  auto offer = [&](const ControlPath& a, double v) {
    if (!have || v > best.value) {
      best.value = v;
      best.control = a;
      have = true;
    }
  };

  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const double v = obj(candidates[c]);
    if (c == 0) reference = v;
    offer(candidates[c], v);
  }

  if (options.method == SearchMethod::enumerate) {
    const ControlNet net = make_control_net(box, options.net_spacing);
    for_each_control_path(net, n, options.enumerate_cap,
                          [&](const ControlPath& a) { offer(a, obj(a)); });
  } else {
    const std::size_t block = std::max<std::size_t>(1, options.block);
    const std::size_t blocks = (n + block - 1) / block;
    const std::size_t dim = blocks * k;
    std::vector<Interval> bounds(dim);
    for (std::size_t b = 0; b < blocks; ++b) {
      for (std::size_t j = 0; j < k; ++j) bounds[b * k + j] = box[j];
    }
    ControlPath work(n, k);
    auto objective = [&](std::span<const double> params) {
      expand(params, block, k, work);
      for (std::size_t i = 0; i < n; i += block) {
        if (!box.feasible(work.at(i))) return -std::numeric_limits<double>::infinity();
      }
      return obj(work);
    };

    const PathStream stream(mix_seed(options.seed, obj.batch().seed()), obj.path());
    std::uint64_t draw = 0;
    std::vector<double> start(dim), trial(dim);
    for (std::size_t r = 0; r < options.restarts; ++r) {
      if (r == 0) {
        for (std::size_t c = 0; c < dim; ++c) start[c] = 0.5 * (bounds[c].lo + bounds[c].hi);
      } else if (r == 1) {
        for (std::size_t c = 0; c < dim; ++c) start[c] = bounds[c].hi;
      } else {
        double start_value = -std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < std::max<std::size_t>(1, options.random_starts); ++s) {
          for (std::size_t c = 0; c < dim; ++c) {
            trial[c] = bounds[c].lo + bounds[c].width() * stream.uniform(draw++);
          }
          const double v = objective(trial);
          if (v > start_value) {
            start_value = v;
            start = trial;
          }
        }
      }
      const auto res = nelder_mead_maximize(objective, start, bounds, options.nelder_mead);
      best.iterations += res.iterations;
      best.cap_hit = best.cap_hit || !res.converged;
      ++best.restarts;
      expand(res.x, block, k, work);
      offer(work, res.value);
    }
  }

  best.evaluations = obj.evaluations() - start_evals;
  best.beat_reference = !candidates.empty() && best.value > reference;
  return best;
}

ControlPath feedback_path(const ModelSpec& model, const FeedbackRule& rule,
                          const NoiseBatch& batch, std::size_t path) {
  const auto& grid = batch.grid();
  const std::size_t n = grid.intervals();
  ControlPath a(n, model.box.dim());
  std::vector<double> x(model.x0);
  EvolveScratch scratch;
  for (std::size_t i = 0; i < n; ++i) {
    auto ai = a.at(i);
    rule(i, grid.time(i), x, ai);
    model.box.clamp(ai);
    advance(model, grid.time(i), grid.step(i), ai, batch.dz(path, i), batch.dw(path, i), x,
            scratch);
  }
  return a;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Estimate finish(std::span<const double> values, std::uint64_t seed,
                std::chrono::steady_clock::time_point start) {
  const auto s = sample_stats(values);
  Estimate e;
  e.mean = s.mean;
  e.std_error = s.std_error;
  e.paths = s.count;
  e.seed = seed;
  e.seconds = seconds_since(start);
  if (!std::isfinite(e.mean)) throw NumericalError("estimate is not finite");
  return e;
}

}  // namespace

Estimate lower_bound(const ModelSpec& model, const FeedbackRule& feedback, const NoiseBatch& batch,
                     Execution exec) {
  if (!feedback) throw ConfigError("lower bound: feedback rule is missing");
  if (model.payoff.kind == PayoffKind::american) {
    throw ConfigError("lower bound: american payoffs need a stopping rule");
  }
  const auto start = std::chrono::steady_clock::now();
  const auto& grid = batch.grid();
  const std::size_t n = grid.intervals();
  std::vector<double> values(batch.paths());
  for_each_index(exec, batch.paths(), [&](std::size_t p) {
    StatePath states(n + 1, model.dim);
    std::copy(model.x0.begin(), model.x0.end(), states.at(0).begin());
    std::vector<double> a(model.box.dim());
    EvolveScratch scratch;
    double discount = 1.0;
    double running = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = grid.time(i);
      const double dt = grid.step(i);
      const auto x = states.at(i);
      feedback(i, t, x, a);
      model.box.clamp(a);
      if (model.reward) running += discount * model.reward(t, a, x) * dt;
      auto next = states.at(i + 1);
      std::copy(x.begin(), x.end(), next.begin());
      advance(model, t, dt, a, batch.dz(p, i), batch.dw(p, i), next, scratch);
      if (model.rate) discount *= std::exp(-model.rate(t, a, x) * dt);
    }
    const double payoff = model.payoff.kind == PayoffKind::path_functional
                              ? model.functional_payoff(states)
                              : model.terminal_payoff(states.at(n));
    values[p] = discount * payoff + running;
  });
  return finish(values, batch.seed(), start);
}

namespace {

Estimate run_dual(const ModelSpec& model, const PhiFn& phi, const NoiseBatch& batch,
                  const SearchOptions& options, const FeedbackRule* reference, Execution exec) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t paths = batch.paths();
  std::vector<double> values(paths);
  std::vector<PathMax> results(paths);
  for_each_index(exec, paths, [&](std::size_t p) {
    PathObjective obj(model, phi, batch, p);
    std::vector<ControlPath> candidates;
    if (reference && *reference) candidates.push_back(feedback_path(model, *reference, batch, p));
    auto r = maximize_path(obj, model.box, options, candidates);
    values[p] = r.value;
    r.control = ControlPath();
    results[p] = std::move(r);
  });
  Estimate e = finish(values, batch.seed(), start);
  std::size_t beat = 0;
  for (const auto& r : results) {
    e.optimizer.iterations += r.iterations;
    e.optimizer.evaluations += r.evaluations;
    e.optimizer.restarts += r.restarts;
    e.optimizer.cap_hits += r.cap_hit ? 1 : 0;
    beat += r.beat_reference ? 1 : 0;
  }
  e.optimizer.beat_fraction = paths == 0 ? 0.0 : static_cast<double>(beat) / static_cast<double>(paths);
  return e;
}

}  // namespace

Estimate dual_upper_bound(const ModelSpec& model, const PhiFn& phi, const NoiseBatch& batch,
                          const SearchOptions& options, const FeedbackRule* reference,
                          Execution exec) {
  return run_dual(model, phi, batch, options, reference, exec);
}

Estimate american_dual(const ModelSpec& model, const PhiFn& phi, const NoiseBatch& batch,
                       const SearchOptions& options, Execution exec) {
  if (model.payoff.kind != PayoffKind::american) {
    throw ConfigError("american dual: model payoff must be american");
  }
  if (!model.cap) throw ConfigError("american dual: payoff must be bounded (set a cap)");
  return run_dual(model, phi, batch, options, nullptr, exec);
}

FeedbackRule uvm_feedback(const UvmSpec& spec, const BsdeSolution& solution) {
  auto s = std::make_shared<const UvmSpec>(spec);
  auto sol = std::make_shared<const BsdeSolution>(solution);
  return [s, sol](std::size_t, double t, std::span<const double> x, std::span<double> control) {
    const std::size_t d = s->assets;
    double g[16];
    std::vector<double> heap;
    std::span<double> gamma(g, d * d);
    if (d * d > 16) {
      heap.resize(d * d);
      gamma = heap;
    }
    const std::size_t last = sol->grid().intervals() - 1;
    sol->gamma(std::min(sol->grid().interval_of(t) + 1, last), x, gamma);
    hamiltonian(*s, x, gamma, control);
  };
}

PhiFn uvm_phi(const BsdeSolution& solution) {
  auto sol = std::make_shared<const BsdeSolution>(solution);
  return [sol](std::size_t, double t, std::span<const double> x, std::span<double> out) {
    sol->delta(sol->grid().interval_of(t), x, out);
  };
}

}  // namespace ctrl_duality
