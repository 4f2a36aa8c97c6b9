#include "tpar/time_codec.hpp"

#include <cmath>
#include <numbers>

#include "tpar/errors.hpp"
#include "tpar/rng.hpp"

namespace tpar {

TimeCodecParams TimeCodecParams::zeros(int d, bool scalar_frequency) {
  TimeCodecParams p;
  p.omega_p = Eigen::VectorXd::Zero(scalar_frequency ? 1 : d);
  p.phi_p = Eigen::VectorXd::Zero(d);
  p.omega_np = Eigen::VectorXd::Zero(d);
  p.phi_np = Eigen::VectorXd::Zero(d);
  return p;
}

void TimeCodecParams::validate() const {
  const auto d = phi_p.size();
  if (d < 1) throw ShapeError("time codec: dimension must be at least 1");
  if ((omega_p.size() != d && omega_p.size() != 1) || omega_np.size() != d || phi_np.size() != d) {
    throw ShapeError("time codec: parameter vectors have inconsistent lengths");
  }
  if (!omega_p.allFinite() || !phi_p.allFinite() || !omega_np.allFinite() || !phi_np.allFinite()) {
    throw ShapeError("time codec: non-finite parameter");
  }
}

TimeCodecParams init_time_codec(int d, std::uint64_t seed, TimeIndex span, bool scalar_frequency) {
  if (d < 1) throw ShapeError("time codec: dimension must be at least 1");
  const double max_period = std::max<double>(static_cast<double>(span), 1.0);
  auto p = TimeCodecParams::zeros(d, scalar_frequency);
  const auto n_freq = p.omega_p.size();
  for (Eigen::Index i = 0; i < n_freq; ++i) {
    // Period 1 .. max_period; a single frequency takes the longest period.
    const double frac = n_freq == 1 ? 1.0 : static_cast<double>(i) / static_cast<double>(n_freq - 1);
    const double period = std::pow(max_period, frac);
    p.omega_p[i] = 2.0 * std::numbers::pi / period;
  }
  Rng rng(mix_seeds(seed, 0x71e));
  for (int i = 0; i < d; ++i) p.phi_p[i] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  for (int i = 0; i < d; ++i) p.omega_np[i] = rng.uniform(-0.1, 0.1) / max_period;
  for (int i = 0; i < d; ++i) p.phi_np[i] = rng.uniform(-0.1, 0.1);
  return p;
}

Eigen::VectorXd encode_delta(const TimeCodecParams& params, double dt) {
  const auto d = params.phi_p.size();
  Eigen::VectorXd out(d);
  const bool scalar = params.omega_p.size() == 1;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double w = scalar ? params.omega_p[0] : params.omega_p[i];
    out[i] = std::sin(w * dt + params.phi_p[i]) + (params.omega_np[i] * dt + params.phi_np[i]);
  }
  return out;
}

void accumulate_time_codec_grad(const TimeCodecParams& params, double dt,
                                const Eigen::Ref<const Eigen::VectorXd>& upstream, TimeCodecParams& grad) {
  const auto d = params.phi_p.size();
  const bool scalar = params.omega_p.size() == 1;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double g = upstream[i];
    if (g == 0.0) continue;
    const double w = scalar ? params.omega_p[0] : params.omega_p[i];
    const double c = std::cos(w * dt + params.phi_p[i]) * g;
    (scalar ? grad.omega_p[0] : grad.omega_p[i]) += c * dt;
    grad.phi_p[i] += c;
    grad.omega_np[i] += g * dt;
    grad.phi_np[i] += g;
  }
}

}  // namespace tpar
