// Counter-based random numbers: Philox4x32-10 keyed by (seed, path, step), so
// any (path, step) draw is reproducible regardless of scheduling, plus the
// inverse normal CDF used to turn uniforms into Gaussians.
#pragma once

#include <array>
#include <cstdint>

namespace merton {

// One Philox4x32-10 block. counter = (step_lo, step_hi, path_lo, path_hi),
// key = (seed_lo, seed_hi).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// Uniform draw in the open interval (0, 1) for (seed, path, step).
double uniform01(std::uint64_t seed, std::uint64_t path, std::uint64_t step);

// Inverse of the standard normal CDF (Wichura's AS 241, double precision).
double inverse_normal_cdf(double p);

// Standard normal draw for (seed, path, step) via the inverse CDF.
double normal_draw(std::uint64_t seed, std::uint64_t path, std::uint64_t step);

} // namespace merton
