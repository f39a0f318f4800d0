#include "coverid/random.hpp"

#include "coverid/binary_io.hpp"

namespace coverid {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view stream) {
  return splitmix64(splitmix64(master_seed) ^ fnv1a64(stream));
}

}  // namespace coverid
