#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ctrl_duality/bsde.hpp"
#include "ctrl_duality/discretize.hpp"
#include "ctrl_duality/estimate.hpp"
#include "ctrl_duality/nelder_mead.hpp"
#include "ctrl_duality/parallel.hpp"
#include "ctrl_duality/paths.hpp"

namespace ctrl_duality {

/// Martingale integrand phi(t_i, x) (one entry per state coordinate), where
/// `step` indexes the interval [t_i, t_{i+1}) of the evaluating grid.
using PhiFn = std::function<void(std::size_t step, double t, std::span<const double> x,
                                 std::span<double> out)>;

/// Feedback control a(t_i, x) written into `control`.
using FeedbackRule = std::function<void(std::size_t step, double t, std::span<const double> x,
                                        std::span<double> control)>;

/// Phi^{a,phi} of one noise path as a function of the control path:
///   R_T g(X_T) + sum R f dt - sum R_{t_{i-1}} phi^T (X_{t_i} - X_{t_{i-1}} - mu dt)
/// (left-endpoint sums). In american mode the payoff term is replaced by
/// max_i of the running value at t_i.
class PathObjective {
 public:
  PathObjective(const ModelSpec& model, PhiFn phi, const NoiseBatch& batch, std::size_t path);

  double operator()(const ControlPath& a);

  const ModelSpec& model() const { return *model_; }
  const NoiseBatch& batch() const { return *batch_; }
  std::size_t path() const { return path_; }
  std::size_t evaluations() const { return evaluations_; }
  /// Trajectory of the last evaluation.
  const StatePath& trajectory() const { return states_; }

 private:
  const ModelSpec* model_;
  PhiFn phi_;
  const NoiseBatch* batch_;
  std::size_t path_;
  std::size_t evaluations_ = 0;
  StatePath states_;
  EvolveScratch scratch_;
  std::vector<double> phi_buf_;
  std::vector<double> mu_buf_;
};

inline double pathwise_objective(PathObjective& obj, const ControlPath& a) { return obj(a); }

enum class SearchMethod { enumerate, polytope };

struct SearchOptions {
  SearchMethod method = SearchMethod::polytope;
  /// Net spacing h for enumerate mode.
  double net_spacing = 0.05;
  std::size_t enumerate_cap = 1'000'000;
  /// Polytope restarts: mid-box, upper corner, best of `random_starts`.
  std::size_t restarts = 3;
  std::size_t random_starts = 16;
  /// Controls are held constant over blocks of this many steps.
  std::size_t block = 1;
  NelderMeadOptions nelder_mead{};
  std::uint64_t seed = 0x5eedULL;
};

struct PathMax {
  double value = 0.0;
  ControlPath control;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  std::size_t restarts = 0;
  bool cap_hit = false;
  /// Strictly better than the first candidate (the reference control).
  bool beat_reference = false;
};

/// max over control paths of the objective. Enumerate mode is exact over the
/// net-valued paths D_h (first path in lexicographic order wins ties);
/// polytope mode searches the continuous box. Every candidate is evaluated
/// and competes, so the result is never below any candidate's value.
PathMax maximize_path(PathObjective& obj, const ControlBox& box, const SearchOptions& options,
                      std::span<const ControlPath> candidates = {});

/// Control path produced by running a feedback rule along noise path p.
ControlPath feedback_path(const ModelSpec& model, const FeedbackRule& rule,
                          const NoiseBatch& batch, std::size_t path);

/// Forward estimate of the value of a feedback policy (a lower bound for a
/// maximization problem).
Estimate lower_bound(const ModelSpec& model, const FeedbackRule& feedback, const NoiseBatch& batch,
                     Execution exec = Execution::parallel);

/// Mean over paths of the maximized pathwise objective. When `reference` is
/// given its control path along each noise path is a search candidate.
Estimate dual_upper_bound(const ModelSpec& model, const PhiFn& phi, const NoiseBatch& batch,
                          const SearchOptions& options, const FeedbackRule* reference = nullptr,
                          Execution exec = Execution::parallel);

/// Dual bound for optimal stopping with control: the pathwise objective is
/// max over grid instants (t = 0 included). The model payoff must be american.
Estimate american_dual(const ModelSpec& model, const PhiFn& phi, const NoiseBatch& batch,
                       const SearchOptions& options, Execution exec = Execution::parallel);

/// Feedback rule argmax H(x, Gamma_{t_{k+1}}(x)) for t in [t_k, t_{k+1}),
/// with Gamma_{t_{n-1}} on the last interval. Gamma_{t_0} is a constant
/// (x is deterministic at t_0) and is never used.
FeedbackRule uvm_feedback(const UvmSpec& spec, const BsdeSolution& solution);

/// phi*(t, x) = Z_{t_k}(x) with k the solution interval containing t.
PhiFn uvm_phi(const BsdeSolution& solution);

}  // namespace ctrl_duality
