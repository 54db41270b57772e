#include "xstore/semver.hpp"

#include <charconv>

namespace xstore {

namespace {

std::optional<std::uint64_t> parse_component(std::string_view part) {
  if (part.empty() || part.size() > 19) return std::nullopt;
  if (part.size() > 1 && part.front() == '0') return std::nullopt;
  for (char c : part) {
    if (c < '0' || c > '9') return std::nullopt;
  }
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
  if (ec != std::errc() || ptr != part.data() + part.size()) return std::nullopt;
  return value;
}

}  // namespace

std::optional<SemVer> SemVer::parse(std::string_view text) {
  auto first = text.find('.');
  if (first == std::string_view::npos) return std::nullopt;
  auto second = text.find('.', first + 1);
  if (second == std::string_view::npos) return std::nullopt;
  auto major = parse_component(text.substr(0, first));
  auto minor = parse_component(text.substr(first + 1, second - first - 1));
  auto patch = parse_component(text.substr(second + 1));
  if (!major || !minor || !patch) return std::nullopt;
  return SemVer{*major, *minor, *patch};
}

std::string SemVer::str() const {
  return std::to_string(major) + "." + std::to_string(minor) + "." +
         std::to_string(patch);
}

}  // namespace xstore
