#include "bamld/rng.hpp"

namespace bamld {

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return splitmix64(master ^ h);
}

std::uint64_t derive_seed(std::uint64_t master,
                          std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t s = splitmix64(master);
  for (auto p : parts) s = splitmix64(s ^ splitmix64(p + 0x632BE59BD9B4E019ULL));
  return s;
}

}  // namespace bamld
