#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ltm/model.hpp"
#include "ltm/random.hpp"

namespace ltm {

struct EmConfig {
  int max_iterations = 500;
  // Stop once (l_t - l_{t-1}) / (|l_{t-1}| + 1) drops below this.
  double tolerance = 1e-6;
  int restarts = 16;
  std::uint64_t seed = 0;
  // Pseudo-count added to every cell in the M-step.
  double smoothing = 0.0;
  // Worker threads for independent restarts; 0 means hardware concurrency.
  int threads = 1;

  void check() const;
};

struct FitResult {
  LatentTreeModel model;
  double loglik = 0.0;
  double bic = 0.0;
  // Objective at every E-step of the returned run: the log-likelihood, plus
  // smoothing * sum(log theta) when smoothing > 0. Ends at `loglik` when c = 0.
  std::vector<double> trace;
  // Final log-likelihood of every restart, in restart order.
  std::vector<double> restart_logliks;
};

// loglik - dim/2 * ln(n). Larger is better.
double bic_score(double loglik, long dim, double n);
double bic(const LatentTreeModel& model, const DataSet& data);

// Copies the structure of `skeleton` with every distribution uniform.
LatentTreeModel uniform_parameters(const LatentTreeModel& skeleton);
// Copies the structure with every distribution column drawn from Dirichlet(1).
LatentTreeModel random_parameters(const LatentTreeModel& skeleton, Rng& rng);

/// Best of config.restarts EM runs from random starting points. Only the
/// structure and cardinalities of the skeleton are used. The data must
/// contain every observed variable of the skeleton; other columns are ignored.
FitResult fit_em(const LatentTreeModel& skeleton, const DataSet& data, const EmConfig& config);

/// One EM run from the parameters of `init`. When `free_nodes` is nonempty,
/// only the CPTs of nodes flagged there are re-estimated; the rest stay
/// frozen. `data` must already be restricted to the model's observed
/// variables (deduplicated data makes this much faster).
FitResult run_em(const LatentTreeModel& init, const DataSet& data, const EmConfig& config,
                 std::span<const char> free_nodes = {});

struct LcaResult {
  std::vector<int> cardinalities;
  std::vector<FitResult> fits;
  std::size_t selected = 0;

  const FitResult& best() const { return fits[selected]; }
};

/// Fits one latent class model per cardinality over `variables` (all
/// dataset columns when empty) and selects the largest BIC, preferring the
/// smaller cardinality on ties within 1e-6.
LcaResult fit_lca(const DataSet& data, std::span<const std::string> variables, std::span<const int> cardinalities,
                  const EmConfig& config, const std::string& latent_name = "Y");

}  // namespace ltm
