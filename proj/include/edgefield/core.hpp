#ifndef EDGEFIELD_CORE_HPP
#define EDGEFIELD_CORE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ef {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;

/// Thrown when an optimization or render produces non-finite values.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Seeding

// splitmix64: used to derive independent stream seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derive a per-stage seed from the global seed, so ablation runs that share
/// a global seed draw identical randomness in every stage they have in common.
inline std::uint64_t stage_seed(std::uint64_t global_seed, const std::string& stage) {
  return splitmix64(global_seed ^ fnv1a(stage));
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

// ---------------------------------------------------------------------------
// Parallel helpers

int thread_count();
void set_thread_count(int n);  // n <= 0 restores the hardware default

/// Parallel loop over [0, n). Each fn(i) must write only to slots owned by i;
/// callers that need a global reduction merge the per-item slots sequentially
/// afterwards, which keeps results independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace ef

#endif
