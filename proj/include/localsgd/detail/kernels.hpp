#pragma once

// Inner loops shared by the engine, estimators and the SDE integrator. The
// objective shape and noise kind are resolved once per call so the step loop
// is monomorphic.

#include <bit>
#include <cmath>
#include <cstdint>
#include <type_traits>
#include <variant>

#include "localsgd/engine.hpp"
#include "localsgd/errors.hpp"
#include "localsgd/objectives.hpp"
#include "localsgd/rng.hpp"

namespace localsgd::detail {

/// Coordinates of a draw apart from the step counter.
struct StreamSlot {
  std::uint32_t replica = 0;
  std::uint32_t client = 0;
  std::uint32_t round = 0;
};

template <NoiseKind Kind>
struct NoiseDraw {
  const KeyedStream* stream;
  double scale;
  double sign;

  double operator()(const StreamSlot& slot, std::uint32_t step) const {
    if constexpr (Kind == NoiseKind::gaussian) {
      return sign * (scale * inverse_normal_cdf(stream->uniform(slot.replica, slot.client, slot.round, step)));
    } else if constexpr (Kind == NoiseKind::uniform) {
      return sign * (scale * (2.0 * stream->uniform(slot.replica, slot.client, slot.round, step) - 1.0));
    } else {
      return scale;
    }
  }
};

/// Calls f(shape, NoiseDraw<kind>) with the concrete shape type.
template <class F>
decltype(auto) with_kernel(const ObjectiveShape& shape, const NoiseModel& noise,
                           const KeyedStream& stream, double sign, F&& f) {
  return std::visit(
      [&](const auto& s) -> decltype(auto) {
        switch (noise.kind) {
          case NoiseKind::gaussian:
            return f(s, NoiseDraw<NoiseKind::gaussian>{&stream, noise.scale, sign});
          case NoiseKind::uniform:
            return f(s, NoiseDraw<NoiseKind::uniform>{&stream, noise.scale, sign});
          case NoiseKind::point_mass:
            break;
        }
        return f(s, NoiseDraw<NoiseKind::point_mass>{&stream, noise.scale, sign});
      },
      shape);
}

inline bool keep_sparse(std::int64_t step, std::int64_t last) {
  return step == 0 || step == last || std::has_single_bit(static_cast<std::uint64_t>(step));
}

inline void check_steps(std::int64_t k) {
  if (k < 0) throw InvalidParameter("step count must be non-negative");
  if (k > static_cast<std::int64_t>(UINT32_MAX)) throw InvalidParameter("step count exceeds 2^32");
}

inline bool escaped(double x) { return !(std::fabs(x) <= kDivergenceThreshold); }

struct NoObserver {
  void operator()(std::uint32_t, double) const {}
};

/// Runs `steps` SGD steps from x using draws at steps first_step.. . The
/// observer sees (local step index after the update, iterate).
template <class Shape, class Draw, class Observer = NoObserver>
double sgd_steps(const Shape& shape, const Draw& draw, double x, double eta, const StreamSlot& slot,
                 std::uint32_t first_step, std::uint32_t steps, Observer&& observe = {},
                 std::int64_t report_round = -1, std::int64_t report_client = -1) {
  for (std::uint32_t j = 0; j < steps; ++j) {
    const double g = shape.grad(x);
    const double xi = draw(slot, first_step + j);
    x = x - eta * g - eta * xi;
    if (escaped(x)) throw DivergedError(static_cast<std::int64_t>(j) + 1, report_round, report_client);
    observe(j + 1, x);
  }
  return x;
}

/// Local SGD for one client within one round. Draws use step indices
/// first_step.. so FedAvg with one client replays plain SGD.
template <class Observer = NoObserver>
double client_round(const ClientObjective& client, const KeyedStream& stream, double x, double eta,
                    const StreamSlot& slot, std::uint32_t first_step, std::uint32_t steps,
                    std::int64_t round_index, double sign = 1.0, Observer&& observe = {}) {
  return with_kernel(client.objective.shape(), client.noise, stream, sign,
                     [&](const auto& shape, const auto& draw) {
                       return sgd_steps(shape, draw, x, eta, slot, first_step, steps, observe,
                                        round_index, slot.client);
                     });
}

}  // namespace localsgd::detail
