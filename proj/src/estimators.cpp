#include "localsgd/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "localsgd/detail/kernels.hpp"
#include "localsgd/errors.hpp"
#include "localsgd/oracles.hpp"
#include "localsgd/parallel.hpp"

namespace localsgd {

void WelfordState::merge(const WelfordState& other) {
  if (other.count == 0) return;
  if (count == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(count);
  const double nb = static_cast<double>(other.count);
  const double n = na + nb;
  const double d = other.mean - mean;
  mean += d * (nb / n);
  m2 += other.m2 + d * d * (na * nb / n);
  count += other.count;
}

WelfordState merge_all(const std::vector<WelfordState>& states) {
  WelfordState out;
  for (const auto& s : states) out.merge(s);
  return out;
}

MonteCarloEstimate MonteCarloEstimate::from_state(const WelfordState& s, std::uint64_t n) {
  MonteCarloEstimate e;
  e.n = n ? n : s.count;
  e.mean = s.mean;
  e.std_error = s.count > 0 ? std::sqrt(s.variance() / static_cast<double>(s.count)) : 0.0;
  e.ci_lo = e.mean - kZ95 * e.std_error;
  e.ci_hi = e.mean + kZ95 * e.std_error;
  return e;
}

bool MonteCarloEstimate::within(double value, double z) const {
  return std::fabs(mean - value) <= z * std_error;
}

Histogram::Histogram(double lo, double hi, std::size_t bins)
    : lo_(lo), hi_(hi), width_((hi - lo) / static_cast<double>(bins)), counts_(bins, 0) {
  if (!(hi > lo) || bins == 0) throw InvalidParameter("histogram: need lo < hi and at least one bin");
}

std::int64_t Histogram::bin_of(double x) const {
  if (!(x >= lo_) || !(x < hi_)) return -1;
  auto i = static_cast<std::int64_t>((x - lo_) / width_);
  return std::min<std::int64_t>(i, static_cast<std::int64_t>(counts_.size()) - 1);
}

void Histogram::add(double x) {
  ++total_;
  const auto i = bin_of(x);
  if (i >= 0) {
    ++counts_[static_cast<std::size_t>(i)];
  } else if (x < lo_) {
    ++below_;
  } else {
    ++above_;
  }
}

void Histogram::merge(const Histogram& other) {
  if (counts_.empty()) {
    *this = other;
    return;
  }
  if (other.counts_.empty()) return;
  if (other.lo_ != lo_ || other.hi_ != hi_ || other.counts_.size() != counts_.size())
    throw InvalidParameter("histogram merge: layouts differ");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  total_ += other.total_;
  below_ += other.below_;
  above_ += other.above_;
}

std::vector<double> Histogram::edges() const {
  std::vector<double> e(counts_.size() + 1);
  for (std::size_t i = 0; i <= counts_.size(); ++i) e[i] = lo_ + width_ * static_cast<double>(i);
  e.back() = hi_;
  return e;
}

double Histogram::outside_fraction() const {
  return total_ ? static_cast<double>(outside()) / static_cast<double>(total_) : 0.0;
}

std::string_view to_string(EstimatorMode mode) {
  return mode == EstimatorMode::plain ? "plain" : "antithetic";
}

EstimatorMode parse_estimator_mode(std::string_view name) {
  if (name == "plain") return EstimatorMode::plain;
  if (name == "antithetic") return EstimatorMode::antithetic;
  throw InvalidParameter("unknown estimator mode '" + std::string(name) + "'");
}

std::string_view to_string(FedAvgMetric metric) {
  switch (metric) {
    case FedAvgMetric::value_gap:
      return "value_gap";
    case FedAvgMetric::grad_sq:
      return "grad_sq";
    case FedAvgMetric::final_iterate:
      return "final_iterate";
  }
  return "unknown";
}

FedAvgMetric parse_fedavg_metric(std::string_view name) {
  if (name == "value_gap") return FedAvgMetric::value_gap;
  if (name == "grad_sq") return FedAvgMetric::grad_sq;
  if (name == "final_iterate") return FedAvgMetric::final_iterate;
  throw InvalidParameter("unknown metric '" + std::string(name) + "'");
}

namespace {

std::vector<std::int64_t> normalize_checkpoints(std::vector<std::int64_t> ks) {
  if (ks.empty()) throw InvalidParameter("checkpoint list is empty");
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  if (ks.front() < 0) throw InvalidParameter("checkpoints must be >= 0");
  if (ks.back() > static_cast<std::int64_t>(std::numeric_limits<std::uint32_t>::max()))
    throw InvalidParameter("checkpoint exceeds 2^32");
  return ks;
}

void check_units(std::uint64_t units) {
  if (units > std::numeric_limits<std::uint32_t>::max())
    throw InvalidParameter("replica count exceeds 2^32");
}

// Runs `units` SGD paths (pairs in antithetic mode) through every checkpoint
// and feeds them to a per-shard accumulator created by make(). acc.single(v)
// receives one path, acc.pair(plus, minus) an antithetic pair.
template <class Acc, class Make>
std::vector<Acc> sample_paths(const Objective1D& obj, double x0, double eta, const std::vector<std::int64_t>& cps,
                              std::uint64_t units, bool antithetic, const RngKey& key, unsigned workers,
                              Make make) {
  check_units(units);
  const KeyedStream stream(key);
  const auto kmax = static_cast<std::uint32_t>(cps.back());
  const std::size_t nc = cps.size();
  auto shard = [&](std::uint64_t, std::uint64_t begin, std::uint64_t end) {
    Acc acc = make();
    std::vector<double> plus(nc), minus(nc);
    detail::with_kernel(obj.shape(), obj.noise(), stream, 1.0, [&](const auto& shape, const auto& draw) {
      auto flipped = draw;
      flipped.sign = -1.0;
      auto run_one = [&](const auto& d, const detail::StreamSlot& slot, std::vector<double>& out) {
        std::size_t idx = 0;
        while (idx < nc && cps[idx] == 0) out[idx++] = x0;
        auto observe = [&](std::uint32_t j, double x) {
          if (idx < nc && j == cps[idx]) out[idx++] = x;
        };
        detail::sgd_steps(shape, d, x0, eta, slot, 0, kmax, observe);
      };
      for (std::uint64_t u = begin; u < end; ++u) {
        const detail::StreamSlot slot{static_cast<std::uint32_t>(u), key.client, key.round};
        run_one(draw, slot, plus);
        if (antithetic) {
          run_one(flipped, slot, minus);
          acc.pair(plus, minus);
        } else {
          acc.single(plus);
        }
      }
    });
    return acc;
  };
  return run_shards<Acc>(units, shard, workers);
}

std::vector<double> gd_at(const Objective1D& obj, double x0, double eta, const std::vector<std::int64_t>& cps) {
  const auto traj = run_gd(obj, x0, eta, cps.back(), CheckpointPolicy::full);
  std::vector<double> z;
  for (auto k : cps) z.push_back(*traj.at(k));
  return z;
}

struct BiasAcc {
  std::vector<WelfordState> states;
  const std::vector<double>* gd = nullptr;

  void single(const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) states[i].add(v[i] - (*gd)[i]);
  }
  void pair(const std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) states[i].add(0.5 * (a[i] + b[i]) - (*gd)[i]);
  }
};

}  // namespace

std::vector<BiasPoint> estimate_bias(const Objective1D& obj, double x0, double eta, std::vector<std::int64_t> k_list,
                                     std::uint64_t n, EstimatorMode mode, const RngKey& key, unsigned workers) {
  const auto cps = normalize_checkpoints(std::move(k_list));
  const bool anti = mode == EstimatorMode::antithetic;
  if (n < 2) throw InvalidParameter("estimate_bias: n must be >= 2");
  if (anti && n % 2 != 0) throw InvalidParameter("estimate_bias: antithetic n must be even");
  const auto z = gd_at(obj, x0, eta, cps);
  const std::uint64_t units = anti ? n / 2 : n;

  const auto shards = sample_paths<BiasAcc>(obj, x0, eta, cps, units, anti, key, workers, [&] {
    return BiasAcc{std::vector<WelfordState>(cps.size()), &z};
  });
  std::vector<WelfordState> total(cps.size());
  for (const auto& s : shards)
    for (std::size_t i = 0; i < cps.size(); ++i) total[i].merge(s.states[i]);

  std::vector<BiasPoint> out;
  for (std::size_t i = 0; i < cps.size(); ++i)
    out.push_back({cps[i], z[i], MonteCarloEstimate::from_state(total[i], n)});
  return out;
}

namespace {

struct MomentAcc {
  std::vector<WelfordState> states;
  void single(const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) states[i].add(v[i]);
  }
  void pair(const std::vector<double>&, const std::vector<double>&) {}
};

}  // namespace

std::vector<IterateMoments> estimate_iterate_moments(const Objective1D& obj, double x0, double eta,
                                                     std::vector<std::int64_t> k_list, std::uint64_t n,
                                                     const RngKey& key, unsigned workers) {
  const auto cps = normalize_checkpoints(std::move(k_list));
  if (n < 2) throw InvalidParameter("estimate_iterate_moments: n must be >= 2");
  const auto shards = sample_paths<MomentAcc>(obj, x0, eta, cps, n, false, key, workers, [&] {
    return MomentAcc{std::vector<WelfordState>(cps.size())};
  });
  std::vector<WelfordState> total(cps.size());
  for (const auto& s : shards)
    for (std::size_t i = 0; i < cps.size(); ++i) total[i].merge(s.states[i]);
  std::vector<IterateMoments> out;
  for (std::size_t i = 0; i < cps.size(); ++i)
    out.push_back({cps[i], MonteCarloEstimate::from_state(total[i]), total[i].variance()});
  return out;
}

std::pair<double, double> default_density_range(const Objective1D& obj, double x0, double eta, std::int64_t k) {
  const double sd = std::sqrt(obj.noise().variance());
  const auto d = quad_sgd_distribution(obj.constants().H, sd, eta, x0, k);
  const double half = std::max(6.0 * std::sqrt(d.variance), 1e-3);
  return {d.mean - half, d.mean + half};
}

namespace {

struct DensityAcc {
  std::vector<WelfordState> means;
  std::vector<WelfordState> gaps;
  std::vector<Histogram> hists;

  void single(const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      means[i].add(v[i]);
      hists[i].add(v[i]);
      if (i + 1 < v.size()) gaps[i].add(v[i + 1] - v[i]);
    }
  }
  void pair(const std::vector<double>&, const std::vector<double>&) {}
};

}  // namespace

DensityResult estimate_density(const Objective1D& obj, double x0, double eta, std::vector<std::int64_t> checkpoints,
                               std::uint64_t n, std::size_t bins, double lo, double hi, const RngKey& key,
                               unsigned workers) {
  const auto cps = normalize_checkpoints(std::move(checkpoints));
  if (n < 2) throw InvalidParameter("estimate_density: n must be >= 2");
  const double sd = std::sqrt(obj.noise().variance());
  for (auto k : cps) {
    const auto d = quad_sgd_distribution(obj.constants().H, sd, eta, x0, k);
    const double s = std::sqrt(d.variance);
    if (d.mean - lo < 6.0 * s || hi - d.mean < 6.0 * s)
      throw InvalidParameter("estimate_density: range [" + format_double(lo) + ", " + format_double(hi) +
                             "] covers fewer than 6 predicted standard deviations at k=" + std::to_string(k));
  }

  const auto shards = sample_paths<DensityAcc>(obj, x0, eta, cps, n, false, key, workers, [&] {
    DensityAcc a;
    a.means.resize(cps.size());
    a.gaps.resize(cps.size() > 1 ? cps.size() - 1 : 0);
    a.hists.assign(cps.size(), Histogram(lo, hi, bins));
    return a;
  });

  DensityAcc total;
  total.means.resize(cps.size());
  total.gaps.resize(cps.size() > 1 ? cps.size() - 1 : 0);
  total.hists.assign(cps.size(), Histogram(lo, hi, bins));
  for (const auto& s : shards) {
    for (std::size_t i = 0; i < cps.size(); ++i) {
      total.means[i].merge(s.means[i]);
      total.hists[i].merge(s.hists[i]);
    }
    for (std::size_t i = 0; i < total.gaps.size(); ++i) total.gaps[i].merge(s.gaps[i]);
  }

  DensityResult out;
  out.checkpoints = cps;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const double frac = total.hists[i].outside_fraction();
    if (frac > 1e-3)
      throw RangeTooSmall(frac, format_double(frac * 100.0) + "% of the mass at k=" + std::to_string(cps[i]) +
                                    " lies outside [" + format_double(lo) + ", " + format_double(hi) + "]");
    out.means.push_back(MonteCarloEstimate::from_state(total.means[i]));
  }
  for (const auto& g : total.gaps) out.gaps.push_back(MonteCarloEstimate::from_state(g));
  out.histograms = std::move(total.hists);
  return out;
}

double dkw_bound(std::uint64_t n, double alpha) {
  if (n == 0) throw InvalidParameter("dkw_bound: n must be positive");
  return std::sqrt(std::log(2.0 / alpha) / (2.0 * static_cast<double>(n)));
}

namespace {

struct SampleAcc {
  std::vector<double> values;
  void single(const std::vector<double>& v) { values.push_back(v.back()); }
  void pair(const std::vector<double>&, const std::vector<double>&) {}
};

std::vector<double> final_samples(const Objective1D& obj, double x0, double eta, std::int64_t k, std::uint64_t n,
                                  const RngKey& key, unsigned workers) {
  const auto shards =
      sample_paths<SampleAcc>(obj, x0, eta, {k}, n, false, key, workers, [] { return SampleAcc{}; });
  std::vector<double> out;
  out.reserve(n);
  for (const auto& s : shards) out.insert(out.end(), s.values.begin(), s.values.end());
  return out;
}

}  // namespace

DominanceResult dominance_check(const Objective1D& obj_a, const Objective1D& obj_b, double x0, double eta,
                                std::int64_t k, std::uint64_t n, const RngKey& key, unsigned workers) {
  if (n < 1 || k < 0) throw InvalidParameter("dominance_check: need n >= 1 and k >= 0");
  if (obj_a.noise().kind != obj_b.noise().kind || obj_a.noise().scale != obj_b.noise().scale)
    throw InvalidParameter("dominance_check: objectives must share the noise model");
  auto a = final_samples(obj_a, x0, eta, k, n, key.with_client(0), workers);
  auto b = final_samples(obj_b, x0, eta, k, n, key.with_client(1), workers);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());

  std::vector<double> pooled;
  pooled.reserve(2 * n);
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(pooled));

  auto tail = [](const std::vector<double>& s, double c) {
    const auto below = std::lower_bound(s.begin(), s.end(), c) - s.begin();
    return static_cast<double>(s.size() - static_cast<std::size_t>(below)) / static_cast<double>(s.size());
  };

  constexpr int kGrid = 512;
  DominanceResult out;
  out.n = n;
  out.dkw_bound = dkw_bound(n);
  for (int i = 0; i < kGrid; ++i) {
    const auto idx = static_cast<std::size_t>((i + 0.5) / kGrid * static_cast<double>(pooled.size()));
    const double c = pooled[std::min(idx, pooled.size() - 1)];
    const double v = tail(a, c) - tail(b, c);
    if (v > out.violation) {
      out.violation = v;
      out.at = c;
    }
  }
  return out;
}

MonteCarloEstimate fedavg_error(const std::vector<ClientObjective>& clients, const FedAvgConfig& cfg, std::uint64_t n,
                                const RngKey& key, FedAvgMetric metric, EstimatorMode mode, unsigned workers) {
  cfg.validate();
  if (clients.size() != static_cast<std::size_t>(cfg.M))
    throw InvalidParameter("fedavg_error: number of clients differs from M");
  const bool anti = mode == EstimatorMode::antithetic;
  if (n < 2 || (anti && n % 2 != 0)) throw InvalidParameter("fedavg_error: n must be >= 2 (even if antithetic)");
  const std::uint64_t units = anti ? n / 2 : n;
  check_units(units);

  const std::size_t M = clients.size();
  const auto K = static_cast<std::uint32_t>(cfg.K);
  std::vector<std::size_t> order(M);
  std::vector<std::uint32_t> ids(M);
  for (std::size_t m = 0; m < M; ++m) {
    ids[m] = clients[m].stream_id.value_or(static_cast<std::uint32_t>(m));
    order[m] = m;
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });

  const double x_star = clients.front().objective.x_star();
  auto avg_value = [&](double x) {
    double acc = 0.0;
    for (std::size_t m : order) acc += clients[m].objective.value(x);
    return acc / static_cast<double>(M);
  };
  auto avg_grad = [&](double x) {
    double acc = 0.0;
    for (std::size_t m : order) acc += clients[m].objective.mean_grad(x);
    return acc / static_cast<double>(M);
  };
  const double f_star = metric == FedAvgMetric::value_gap ? avg_value(x_star) : 0.0;
  const KeyedStream stream(key);

  auto replica = [&](std::uint32_t u, double sign, std::vector<double>& sums, std::vector<double>& ends) {
    double x = cfg.x0.front();
    double grad_acc = 0.0;
    for (int r = 0; r < cfg.R; ++r) {
      const std::uint32_t first = static_cast<std::uint32_t>(r) * K;
      std::fill(sums.begin(), sums.end(), 0.0);
      for (std::size_t m : order) {
        const detail::StreamSlot slot{u, ids[m], key.round};
        if (metric == FedAvgMetric::grad_sq) {
          auto observe = [&](std::uint32_t j, double v) {
            if (j < K) sums[j] += v;
          };
          ends[m] = detail::client_round(clients[m], stream, x, cfg.eta, slot, first, K, r, sign, observe);
        } else {
          ends[m] = detail::client_round(clients[m], stream, x, cfg.eta, slot, first, K, r, sign);
        }
      }
      if (metric == FedAvgMetric::grad_sq) {
        const double g0 = avg_grad(x);
        grad_acc += g0 * g0;
        for (std::uint32_t j = 1; j < K; ++j) {
          const double g = avg_grad(sums[j] / static_cast<double>(M));
          grad_acc += g * g;
        }
      }
      double acc = 0.0;
      for (std::size_t m : order) acc += ends[m];
      x = acc / static_cast<double>(M);
    }
    switch (metric) {
      case FedAvgMetric::value_gap:
        return avg_value(x) - f_star;
      case FedAvgMetric::grad_sq:
        return grad_acc / (static_cast<double>(cfg.R) * static_cast<double>(K));
      case FedAvgMetric::final_iterate:
        break;
    }
    return x;
  };

  auto shard = [&](std::uint64_t, std::uint64_t begin, std::uint64_t end) {
    WelfordState st;
    std::vector<double> sums(K), ends(M);
    for (std::uint64_t u = begin; u < end; ++u) {
      const auto uu = static_cast<std::uint32_t>(u);
      double v = replica(uu, 1.0, sums, ends);
      if (anti) v = 0.5 * (v + replica(uu, -1.0, sums, ends));
      st.add(v);
    }
    return st;
  };
  return MonteCarloEstimate::from_state(merge_all(run_shards<WelfordState>(units, shard, workers)), n);
}

MonteCarloEstimate composite_value_gap(const LowerBoundComposite& instance, const FedAvgConfig& cfg,
                                       std::uint64_t n, const RngKey& key, unsigned workers) {
  cfg.validate();
  if (cfg.x0.size() != instance.x0.size())
    throw InvalidParameter("composite_value_gap: x0 dimension differs from the instance");
  if (!instance.homogeneous() && cfg.M % 2 != 0)
    throw InvalidParameter("composite_value_gap: heterogeneous instance needs an even number of clients");
  MonteCarloEstimate out;
  out.n = n;
  double var = 0.0;
  for (std::size_t c = 0; c < instance.x0.size(); ++c) {
    FedAvgConfig sub = cfg;
    sub.x0 = {cfg.x0[c]};
    const auto e = fedavg_error(instance.coordinate_clients(c, cfg.M), sub, n,
                                key.with_experiment(key.experiment_id + c), FedAvgMetric::value_gap,
                                EstimatorMode::plain, workers);
    out.mean += e.mean;
    var += e.std_error * e.std_error;
  }
  out.std_error = std::sqrt(var);
  out.ci_lo = out.mean - kZ95 * out.std_error;
  out.ci_hi = out.mean + kZ95 * out.std_error;
  return out;
}

CsvTable estimate_table() {
  return CsvTable({"experiment", "objective", "eta", "k", "K", "R", "M", "n", "mode", "mean", "stderr", "ci_lo",
                   "ci_hi"});
}

void add_estimate_row(CsvTable& table, std::string_view experiment, std::string_view objective, double eta,
                      std::int64_t k, int K, int R, int M, EstimatorMode mode, const MonteCarloEstimate& est) {
  table.add_row({experiment, objective, eta, static_cast<long long>(k), K, R, M,
                 static_cast<unsigned long long>(est.n), to_string(mode), est.mean, est.std_error, est.ci_lo,
                 est.ci_hi});
}

}  // namespace localsgd
