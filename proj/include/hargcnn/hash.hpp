#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace hargcnn {

/// 64-bit FNV-1a, incrementally.
class Fnv1a {
 public:
  void update(std::span<const std::uint8_t> bytes) noexcept {
    for (auto b : bytes) {
      h_ ^= b;
      h_ *= 0x100000001b3ULL;
    }
  }
  void update(std::string_view s) noexcept {
    update({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
  }
  void update_u64(std::uint64_t v) noexcept {
    for (int i = 0; i < 8; ++i) {
      const auto b = static_cast<std::uint8_t>(v >> (8 * i));
      update(std::span<const std::uint8_t>(&b, 1));
    }
  }
  std::uint64_t digest() const noexcept { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

std::string hex64(std::uint64_t v);

}  // namespace hargcnn
