// Seeded random streams.
//
// Every random draw in the library comes from an Rng constructed from a
// stream seed; stream seeds are derived from a master seed and a
// (purpose, index...) key, so no component shares state with another.

#ifndef GLMMIX_RNG_HPP
#define GLMMIX_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace glmmix {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

/// Seed of the stream named `purpose` with the given indices.
std::uint64_t stream_seed(std::uint64_t master, std::string_view purpose,
                          std::initializer_list<std::uint64_t> indices = {});

Eigen::VectorXd standard_normal_vector(Rng& rng, Eigen::Index n);

/// Uniform on the unit sphere in R^n.
Eigen::VectorXd random_unit_vector(Rng& rng, Eigen::Index n);

}  // namespace glmmix

#endif  // GLMMIX_RNG_HPP
