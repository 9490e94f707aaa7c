#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "localsgd/csv.hpp"
#include "localsgd/engine.hpp"
#include "localsgd/estimators.hpp"
#include "localsgd/objectives.hpp"
#include "localsgd/rng.hpp"

namespace localsgd {

struct RateInputs {
  double H = 0.0;
  double sigma = 0.0;
  double Q = 0.0;
  double G = 0.0;          ///< gradient bound
  double D = 0.0;          ///< initial distance to the optimum
  double B = 0.0;          ///< initial value gap
  double zeta_star = 0.0;  ///< heterogeneity at the optimum
  double zeta = 0.0;       ///< uniform heterogeneity
  int M = 1;
  int K = 1;
  int R = 1;

  /// Throws InvalidParameter on negative or non-finite reals or counts below 1.
  void validate() const;
};

struct BoundTerm {
  std::string name;
  double value = 0.0;
};

/// Rate terms as evaluated; constants are omitted. `total` is the sum of
/// `terms`. Min-structured terms are single entries whose candidates are
/// listed in `candidates`.
struct BoundReport {
  std::string theorem;
  std::vector<BoundTerm> terms;
  std::vector<BoundTerm> candidates;
  double total = 0.0;

  double term(std::string_view name) const;
};

/// HD^2/(KR) + sigma D/sqrt(MKR) + min{sigma D/sqrt(KR), H^(1/3) sigma^(2/3) D^(4/3)/(K^(1/3) R^(2/3))}.
/// Requires K >= 2.
BoundReport lower_bound_homog(const RateInputs& in);

/// lower_bound_homog plus min{zeta*^2/H, H^(1/3) zeta*^(2/3) D^(4/3)/R^(2/3)}.
BoundReport lower_bound_hetero(const RateInputs& in);

/// Best prior upper bound for uniform heterogeneity zeta:
/// HD^2/(KR) + sigma D/sqrt(MKR) + H^(1/3) sigma^(2/3) D^(4/3)/(K^(1/3) R^(2/3)) + H^(1/3) zeta^(2/3) D^(4/3)/R^(2/3).
BoundReport upper_bound_uniform(const RateInputs& in);

struct StepsizeRate {
  double eta = 0.0;
  std::vector<BoundTerm> eta_candidates;
  BoundReport rate;
};

/// Convex, third-order smooth: eta = min{1/H, sqrt(BM)/(sigma sqrt(HRK)),
/// B^(1/5)/(K^(3/5) R^(1/5) Q^(2/5) sigma^(4/5))}; rate HB/(KR) + sigma sqrt(BH)/sqrt(MKR)
/// + B^(4/5) sigma^(4/5) Q^(2/5)/(K^(2/5) R^(4/5)).
StepsizeRate stepsize_and_rate_convex_3o(const RateInputs& in);

/// Nonconvex, third-order smooth: eta = min{1/H, sqrt(BM)/(sigma sqrt(HKR)),
/// B^(1/5)/(K R^(1/5) Q^(2/5) (sigma+G)^(4/5))}; rate HB/(KR) + sigma sqrt(BH)/sqrt(MKR)
/// + B^(4/5) (G+sigma)^(4/5) Q^(2/5)/R^(4/5).
StepsizeRate stepsize_and_rate_nonconvex_3o(const RateInputs& in);

/// Nonconvex, second-order smooth: eta = min{1/H, sqrt(BM)/(sigma sqrt(HKR)),
/// B^(1/3)/(K R^(1/3) H^(2/3) (G+sigma)^(2/3))}; rate HB/(KR) + sigma sqrt(BH)/sqrt(MKR)
/// + B^(2/3) (G+sigma)^(2/3) H^(2/3)/R^(2/3).
StepsizeRate stepsize_and_rate_nonconvex_2o(const RateInputs& in);

enum class UpperTheorem { convex3o, nonconvex3o, nonconvex2o };
std::string_view to_string(UpperTheorem t);
UpperTheorem parse_upper_theorem(std::string_view name);
StepsizeRate stepsize_and_rate(UpperTheorem t, const RateInputs& in);

inline constexpr double kDefaultSlack = 10.0;

struct UpperVerification {
  UpperTheorem theorem = UpperTheorem::convex3o;
  double eta = 0.0;
  MonteCarloEstimate measured;
  double bound = 0.0;
  double slack = kDefaultSlack;
  /// Upper 95% confidence limit of the measurement <= slack * bound.
  bool pass = false;

  /// `PASS theorem=... measured=... bound=... C=...`
  std::string verdict_line() const;
};

/// Runs FedAvg at the prescribed step size from x0 and compares the averaged
/// squared gradient norm against slack * rate. Refuses (OutOfRegime) when the
/// clients' declared constants exceed the inputs or Q is undeclared for a
/// third-order theorem.
UpperVerification verify_upper_bound(const std::vector<ClientObjective>& clients, const RateInputs& in, double x0,
                                     std::uint64_t n, const RngKey& key, UpperTheorem which,
                                     double slack = kDefaultSlack, unsigned workers = 0);

/// `theorem,term_name,value`
CsvTable bound_table();
void add_bound_rows(CsvTable& table, const BoundReport& report);
void add_bound_rows(CsvTable& table, const StepsizeRate& sr);

}  // namespace localsgd
