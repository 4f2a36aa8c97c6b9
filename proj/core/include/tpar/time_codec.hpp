#pragma once

// Learnable relative time encoding:
//   h_t = sin(omega_p * dt + phi_p) + (omega_np * dt + phi_np),  dt = t_link - t_query
// applied elementwise over d dimensions.

#include <cstdint>

#include <Eigen/Core>

#include "tpar/types.hpp"

namespace tpar {

struct TimeCodecParams {
  Eigen::VectorXd omega_p;   // periodic frequencies; length 1 in scalar-frequency mode
  Eigen::VectorXd phi_p;     // phase shifts
  Eigen::VectorXd omega_np;  // velocity
  Eigen::VectorXd phi_np;    // offset

  int dim() const noexcept { return static_cast<int>(phi_p.size()); }
  bool scalar_frequency() const noexcept { return omega_p.size() == 1 && phi_p.size() != 1; }

  static TimeCodecParams zeros(int d, bool scalar_frequency = false);
  // Throws ShapeError on inconsistent lengths or non-finite entries.
  void validate() const;
};

// Frequencies are log-spaced so periods run from 1 time unit up to `span`.
// Phases are uniform in [0, 2pi); the affine part starts small.
TimeCodecParams init_time_codec(int d, std::uint64_t seed, TimeIndex span = 365,
                                bool scalar_frequency = false);

Eigen::VectorXd encode_delta(const TimeCodecParams& params, double dt);

inline Eigen::VectorXd encode_relative_time(const TimeCodecParams& params, TimeIndex link_time,
                                            TimeIndex query_time) {
  return encode_delta(params, static_cast<double>(link_time - query_time));
}

// Adds d(upstream . h_t)/d(params) into `grad`.
void accumulate_time_codec_grad(const TimeCodecParams& params, double dt,
                                const Eigen::Ref<const Eigen::VectorXd>& upstream,
                                TimeCodecParams& grad);

}  // namespace tpar
