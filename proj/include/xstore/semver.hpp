#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace xstore {

/// Plain major.minor.patch version. Pre-release and build suffixes are not
/// accepted anywhere in the store.
struct SemVer {
  std::uint64_t major = 0;
  std::uint64_t minor = 0;
  std::uint64_t patch = 0;

  /// Strict parse: three dot-separated decimal components, no leading zeros
  /// (except a lone "0"), no sign, no whitespace.
  static std::optional<SemVer> parse(std::string_view text);

  std::string str() const;

  auto operator<=>(const SemVer&) const = default;
};

/// Half-open range [min, max).
struct SemVerRange {
  SemVer min;
  SemVer max;

  bool contains(const SemVer& v) const { return min <= v && v < max; }
};

}  // namespace xstore
