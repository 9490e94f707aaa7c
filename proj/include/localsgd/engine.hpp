#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "localsgd/objectives.hpp"
#include "localsgd/rng.hpp"

namespace localsgd {

/// Iterates beyond this magnitude abort the trajectory.
inline constexpr double kDivergenceThreshold = 1e12;

enum class CheckpointPolicy {
  full,    ///< every iterate
  sparse,  ///< step 0, powers of two, round boundaries and the final step
};

struct Checkpoint {
  std::int64_t step;
  double value;
};

struct Trajectory {
  std::vector<Checkpoint> checkpoints;

  double initial() const { return checkpoints.front().value; }
  double final_value() const { return checkpoints.back().value; }
  std::int64_t final_step() const { return checkpoints.back().step; }
  std::optional<double> at(std::int64_t step) const;
};

struct FedAvgConfig {
  double eta = 0.0;
  int K = 1;
  int R = 1;
  int M = 1;
  std::vector<double> x0{0.0};
  std::uint64_t replicas = 1;
  std::uint64_t master_seed = 0;

  /// Throws InvalidParameter when eta <= 0 or any count is below one.
  void validate() const;
};

struct FedAvgResult {
  Trajectory round_starts;         ///< x^{(r,0)} for r = 0..R
  std::vector<Trajectory> local;   ///< per client, x_m^{(r,k)} at index r*K + k
};

/// Noiseless gradient descent z <- z - eta F'(z).
Trajectory run_gd(const Objective1D& obj, double x0, double eta, std::int64_t k,
                  CheckpointPolicy policy = CheckpointPolicy::full);

/// SGD with noise drawn from the objective's noise model at key.step + j for
/// step j. `antithetic_sign` = -1 negates every draw.
Trajectory run_sgd(const Objective1D& obj, double x0, double eta, std::int64_t k,
                   const RngKey& key, double antithetic_sign = 1.0,
                   CheckpointPolicy policy = CheckpointPolicy::sparse);

/// Federated averaging: broadcast, K local SGD steps per client with draws
/// keyed by (client, round, local step), uniform averaging.
FedAvgResult run_fedavg(const std::vector<ClientObjective>& clients, const FedAvgConfig& cfg,
                        const RngKey& key, CheckpointPolicy policy = CheckpointPolicy::sparse);

/// Runs FedAvg independently on each coordinate of a lower-bound composite.
/// Coordinate c draws from experiment id key.experiment_id + c.
std::vector<FedAvgResult> run_fedavg_composite(const LowerBoundComposite& instance,
                                               const FedAvgConfig& cfg, const RngKey& key);

}  // namespace localsgd
