#include "localsgd/engine.hpp"

#include <algorithm>

#include "localsgd/detail/kernels.hpp"
#include "localsgd/errors.hpp"

namespace localsgd {

std::optional<double> Trajectory::at(std::int64_t step) const {
  auto it = std::lower_bound(checkpoints.begin(), checkpoints.end(), step,
                             [](const Checkpoint& c, std::int64_t s) { return c.step < s; });
  if (it == checkpoints.end() || it->step != step) return std::nullopt;
  return it->value;
}

void FedAvgConfig::validate() const {
  if (!(eta > 0.0)) throw InvalidParameter("FedAvgConfig: eta must be positive");
  if (K < 1 || R < 1 || M < 1) throw InvalidParameter("FedAvgConfig: K, R and M must be >= 1");
  if (replicas < 1) throw InvalidParameter("FedAvgConfig: replicas must be >= 1");
  if (x0.empty()) throw InvalidParameter("FedAvgConfig: x0 is empty");
  if (static_cast<std::int64_t>(K) * R > static_cast<std::int64_t>(UINT32_MAX))
    throw InvalidParameter("FedAvgConfig: K*R exceeds 2^32");
}

Trajectory run_gd(const Objective1D& obj, double x0, double eta, std::int64_t k,
                  CheckpointPolicy policy) {
  detail::check_steps(k);
  Trajectory out;
  out.checkpoints.push_back({0, x0});
  double z = x0;
  std::visit(
      [&](const auto& shape) {
        for (std::int64_t j = 1; j <= k; ++j) {
          z = z - eta * shape.grad(z);
          if (detail::escaped(z)) throw DivergedError(j);
          if (policy == CheckpointPolicy::full || detail::keep_sparse(j, k)) out.checkpoints.push_back({j, z});
        }
      },
      obj.shape());
  return out;
}

Trajectory run_sgd(const Objective1D& obj, double x0, double eta, std::int64_t k,
                   const RngKey& key, double antithetic_sign, CheckpointPolicy policy) {
  detail::check_steps(k);
  Trajectory out;
  out.checkpoints.push_back({0, x0});
  const KeyedStream stream(key);
  const detail::StreamSlot slot{key.replica, key.client, key.round};
  const auto observe = [&](std::uint32_t j, double x) {
    if (policy == CheckpointPolicy::full || detail::keep_sparse(j, k)) out.checkpoints.push_back({j, x});
  };
  detail::with_kernel(obj.shape(), obj.noise(), stream, antithetic_sign,
                      [&](const auto& shape, const auto& draw) {
                        return detail::sgd_steps(shape, draw, x0, eta, slot, key.step,
                                                 static_cast<std::uint32_t>(k), observe);
                      });
  return out;
}

FedAvgResult run_fedavg(const std::vector<ClientObjective>& clients, const FedAvgConfig& cfg,
                        const RngKey& key, CheckpointPolicy policy) {
  cfg.validate();
  if (clients.size() != static_cast<std::size_t>(cfg.M))
    throw InvalidParameter("run_fedavg: number of clients differs from M");

  const std::size_t M = clients.size();
  const auto K = static_cast<std::uint32_t>(cfg.K);
  const KeyedStream stream(key);

  // Sum client results in stream-id order so a permutation of the client list
  // gives the same floating-point average.
  std::vector<std::size_t> order(M);
  std::vector<std::uint32_t> ids(M);
  for (std::size_t m = 0; m < M; ++m) {
    ids[m] = clients[m].stream_id.value_or(static_cast<std::uint32_t>(m));
    order[m] = m;
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });

  FedAvgResult out;
  out.local.resize(M);
  double x = cfg.x0.front();
  out.round_starts.checkpoints.push_back({0, x});
  for (auto& t : out.local) t.checkpoints.push_back({0, x});

  std::vector<double> ends(M);
  for (int r = 0; r < cfg.R; ++r) {
    const std::uint32_t first = static_cast<std::uint32_t>(r) * K;
    for (std::size_t m = 0; m < M; ++m) {
      const detail::StreamSlot slot{key.replica, ids[m], key.round};
      auto& traj = out.local[m];
      const auto observe = [&](std::uint32_t j, double v) {
        if (policy == CheckpointPolicy::full) traj.checkpoints.push_back({first + j, v});
      };
      ends[m] = detail::client_round(clients[m], stream, x, cfg.eta, slot, first, K, r, 1.0, observe);
      if (policy != CheckpointPolicy::full) traj.checkpoints.push_back({first + K, ends[m]});
    }
    double acc = 0.0;
    for (std::size_t m : order) acc += ends[m];
    x = acc / static_cast<double>(M);
    out.round_starts.checkpoints.push_back({r + 1, x});
  }
  return out;
}

std::vector<FedAvgResult> run_fedavg_composite(const LowerBoundComposite& instance,
                                               const FedAvgConfig& cfg, const RngKey& key) {
  cfg.validate();
  if (cfg.x0.size() != instance.x0.size())
    throw InvalidParameter("run_fedavg_composite: x0 dimension differs from the instance");
  std::vector<FedAvgResult> out;
  for (std::size_t c = 0; c < instance.x0.size(); ++c) {
    FedAvgConfig sub = cfg;
    sub.x0 = {cfg.x0[c]};
    out.push_back(run_fedavg(instance.coordinate_clients(c, cfg.M), sub,
                             key.with_experiment(key.experiment_id + c)));
  }
  return out;
}

}  // namespace localsgd
