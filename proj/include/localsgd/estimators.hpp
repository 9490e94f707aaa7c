#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "localsgd/csv.hpp"
#include "localsgd/engine.hpp"
#include "localsgd/objectives.hpp"
#include "localsgd/rng.hpp"

namespace localsgd {

/// Streaming mean and centered second moment (Welford), mergeable with Chan's
/// pairwise update.
struct WelfordState {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }
  void merge(const WelfordState& other);
  /// Unbiased sample variance; 0 for fewer than two samples.
  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
};

/// Merges shard states left to right.
WelfordState merge_all(const std::vector<WelfordState>& states);

struct MonteCarloEstimate {
  std::uint64_t n = 0;  ///< sample paths behind the estimate
  double mean = 0.0;
  double std_error = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;

  /// `n` defaults to the state's count; antithetic estimates report 2x pairs.
  static MonteCarloEstimate from_state(const WelfordState& s, std::uint64_t n = 0);
  /// |mean - value| <= z * std_error.
  bool within(double value, double z) const;
};

inline constexpr double kZ95 = 1.96;

class Histogram {
 public:
  Histogram() = default;
  Histogram(double lo, double hi, std::size_t bins);

  void add(double x);
  void merge(const Histogram& other);

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  std::size_t bins() const { return counts_.size(); }
  std::vector<double> edges() const;
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  /// Samples added, including those outside [lo, hi).
  std::uint64_t total() const { return total_; }
  std::uint64_t outside() const { return below_ + above_; }
  double outside_fraction() const;
  /// Bin index of x, or -1 when outside the range.
  std::int64_t bin_of(double x) const;

 private:
  double lo_ = 0.0;
  double hi_ = 1.0;
  double width_ = 1.0;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
  std::uint64_t below_ = 0;
  std::uint64_t above_ = 0;
};

enum class EstimatorMode { plain, antithetic };

std::string_view to_string(EstimatorMode mode);
EstimatorMode parse_estimator_mode(std::string_view name);

struct BiasPoint {
  std::int64_t k = 0;
  double gd = 0.0;  ///< noiseless iterate z^(k)
  MonteCarloEstimate bias;
};

/// E[x_sgd^(k)] - z_gd^(k) for every k in k_list. In antithetic mode `n` paths
/// form n/2 pairs (key, +1), (key, -1) whose averages are the samples.
std::vector<BiasPoint> estimate_bias(const Objective1D& obj, double x0, double eta,
                                     std::vector<std::int64_t> k_list, std::uint64_t n,
                                     EstimatorMode mode, const RngKey& key, unsigned workers = 0);

/// Mean and variance of the SGD iterate at each k (plain sampling).
struct IterateMoments {
  std::int64_t k = 0;
  MonteCarloEstimate mean;
  double variance = 0.0;
};
std::vector<IterateMoments> estimate_iterate_moments(const Objective1D& obj, double x0, double eta,
                                                     std::vector<std::int64_t> k_list, std::uint64_t n,
                                                     const RngKey& key, unsigned workers = 0);

struct DensityResult {
  std::vector<std::int64_t> checkpoints;
  std::vector<Histogram> histograms;
  std::vector<MonteCarloEstimate> means;
  /// Paired estimates of mean(k_{i+1}) - mean(k_i); the std_error is the joint
  /// standard error of the gap.
  std::vector<MonteCarloEstimate> gaps;
};

/// Histogram range used when none is given: predicted mean +- 6 predicted
/// standard deviations of SGD on the quadratic with the declared curvature H.
std::pair<double, double> default_density_range(const Objective1D& obj, double x0, double eta,
                                                std::int64_t k);

/// Histograms of the plain SGD iterate at each checkpoint. Throws
/// InvalidParameter when [lo, hi] does not cover 6 predicted standard
/// deviations, and RangeTooSmall when more than 0.1% of any checkpoint's
/// mass falls outside.
DensityResult estimate_density(const Objective1D& obj, double x0, double eta,
                               std::vector<std::int64_t> checkpoints, std::uint64_t n, std::size_t bins,
                               double lo, double hi, const RngKey& key, unsigned workers = 0);

struct DominanceResult {
  std::uint64_t n = 0;
  /// max over the grid of Pr[a >= c] - Pr[b >= c], floored at 0.
  double violation = 0.0;
  double at = 0.0;  ///< grid point attaining the maximum
  double dkw_bound = 0.0;
};

/// Dvoretzky-Kiefer-Wolfowitz radius sqrt(ln(2/alpha)/(2n)).
double dkw_bound(std::uint64_t n, double alpha = 0.05);

/// Compares the k-step SGD laws of obj_a and obj_b from x0 on a 512-point
/// pooled quantile grid. Small violation means b dominates a. The two samples
/// come from independent streams.
DominanceResult dominance_check(const Objective1D& obj_a, const Objective1D& obj_b, double x0, double eta,
                                std::int64_t k, std::uint64_t n, const RngKey& key, unsigned workers = 0);

enum class FedAvgMetric {
  value_gap,      ///< F(x^(R,0)) - F(x*)
  grad_sq,        ///< |grad F|^2 at the shadow average, averaged over all (r, k)
  final_iterate,  ///< x^(R,0)
};

std::string_view to_string(FedAvgMetric metric);
FedAvgMetric parse_fedavg_metric(std::string_view name);

/// Monte-Carlo estimate of a FedAvg metric over n replicas. F is the uniform
/// average of the client objectives and x* the first client's declared optimum.
MonteCarloEstimate fedavg_error(const std::vector<ClientObjective>& clients, const FedAvgConfig& cfg,
                                std::uint64_t n, const RngKey& key, FedAvgMetric metric,
                                EstimatorMode mode = EstimatorMode::plain, unsigned workers = 0);

/// Value gap of the lower-bound composite: per-coordinate gaps from
/// independent streams, summed.
MonteCarloEstimate composite_value_gap(const LowerBoundComposite& instance, const FedAvgConfig& cfg,
                                       std::uint64_t n, const RngKey& key, unsigned workers = 0);

/// `experiment,objective,eta,k,K,R,M,n,mode,mean,stderr,ci_lo,ci_hi`
CsvTable estimate_table();
void add_estimate_row(CsvTable& table, std::string_view experiment, std::string_view objective, double eta,
                      std::int64_t k, int K, int R, int M, EstimatorMode mode, const MonteCarloEstimate& est);

}  // namespace localsgd
