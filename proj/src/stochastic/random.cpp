#include "sbbts/stochastic/random.hpp"

namespace sbbts::stochastic {

namespace {
inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RandomSource::RandomSource(std::uint64_t seed) : seed_(seed) {
  std::uint64_t sm = seed;
  for (auto& s : s_) s = splitmix64(sm);
}

RandomSource::result_type RandomSource::operator()() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

RandomSource RandomSource::child(std::uint64_t key) const {
  std::uint64_t sm = seed_ ^ 0x5851f42d4c957f2dULL;
  std::uint64_t a = splitmix64(sm);
  std::uint64_t km = key ^ 0x14057b7ef767814fULL;
  std::uint64_t b = splitmix64(km);
  std::uint64_t mixed = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  return RandomSource(splitmix64(mixed));
}

double RandomSource::uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

double RandomSource::normal() { return gauss_(*this); }

std::uint64_t RandomSource::below(std::uint64_t n) {
  // Lemire-style rejection keeps the draw unbiased.
  const std::uint64_t limit = max() - max() % n;
  std::uint64_t x;
  do {
    x = (*this)();
  } while (x >= limit);
  return x % n;
}

}  // namespace sbbts::stochastic
