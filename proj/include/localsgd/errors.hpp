#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace localsgd {

/// A constructor or operation received a parameter outside its domain.
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A closed-form bound or oracle was queried outside the hypotheses under
/// which it is proven. Carries the violated hypothesis verbatim.
class OutOfRegime : public std::domain_error {
 public:
  explicit OutOfRegime(std::string hypothesis)
      : std::domain_error("out of regime: " + hypothesis),
        hypothesis_(std::move(hypothesis)) {}

  const std::string& hypothesis() const noexcept { return hypothesis_; }

 private:
  std::string hypothesis_;
};

/// An iterate left the divergence guard (|x| > 1e12 or non-finite).
/// Round and client are -1 for plain GD/SGD trajectories.
class DivergedError : public std::runtime_error {
 public:
  DivergedError(std::int64_t step, std::int64_t round = -1, std::int64_t client = -1)
      : std::runtime_error(describe(step, round, client)),
        step_(step),
        round_(round),
        client_(client) {}

  std::int64_t step() const noexcept { return step_; }
  std::int64_t round() const noexcept { return round_; }
  std::int64_t client() const noexcept { return client_; }

 private:
  static std::string describe(std::int64_t step, std::int64_t round, std::int64_t client) {
    std::string msg = "iterate diverged at step " + std::to_string(step);
    if (round >= 0) msg += ", round " + std::to_string(round);
    if (client >= 0) msg += ", client " + std::to_string(client);
    return msg;
  }

  std::int64_t step_;
  std::int64_t round_;
  std::int64_t client_;
};

/// Histogram range does not contain the simulated mass.
class RangeTooSmall : public std::runtime_error {
 public:
  RangeTooSmall(double outside_fraction, const std::string& detail)
      : std::runtime_error("histogram range too small: " + detail),
        outside_fraction_(outside_fraction) {}

  double outside_fraction() const noexcept { return outside_fraction_; }

 private:
  double outside_fraction_;
};

/// A Monte-Carlo measurement is too noisy to support a decision.
class Inconclusive : public std::runtime_error {
 public:
  Inconclusive(std::uint64_t required_n, const std::string& detail)
      : std::runtime_error("inconclusive: " + detail + " (need n >= " +
                           std::to_string(required_n) + ")"),
        required_n_(required_n) {}

  std::uint64_t required_n() const noexcept { return required_n_; }

 private:
  std::uint64_t required_n_;
};

}  // namespace localsgd
