#ifndef IVNET_UTIL_HASH_HPP
#define IVNET_UTIL_HASH_HPP

#include <cstdint>
#include <string>
#include <string_view>

#include <fmt/format.h>

namespace ivnet {

// FNV-1a, 64 bit
class Fnv1a {
  public:
    void update(std::string_view bytes) {
        for (const unsigned char c : bytes) {
            state_ ^= c;
            state_ *= 0x100000001b3ULL;
        }
    }

    void update(const void *data, std::size_t size) {
        update(std::string_view(static_cast<const char *>(data), size));
    }

    [[nodiscard]] std::uint64_t digest() const noexcept { return state_; }

    [[nodiscard]] std::string hex() const { return fmt::format("{:016x}", state_); }

  private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::string fnv1a_hex(std::string_view bytes) {
    Fnv1a h;
    h.update(bytes);
    return h.hex();
}

}  // namespace ivnet

#endif
