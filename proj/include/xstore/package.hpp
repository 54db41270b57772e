#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "xstore/behavior.hpp"

namespace xstore {

/// Desk-scale stand-in for a container image: the manifest exactly as
/// submitted, the behavior script, and opaque assets.
struct PackageArchive {
  std::string manifest_bytes;
  BehaviorScript behavior;
  std::map<std::string, std::string> assets;  // name (without "assets/") -> bytes

  bool operator==(const PackageArchive&) const = default;
};

/// Digest over canonical manifest, canonical behavior and assets. Throws
/// ParseError if the manifest does not parse.
std::string package_digest(const PackageArchive& pkg);

// ---- .xapp container (POSIX ustar) -------------------------------------

/// Deterministic tar: entries in map order, mode 0644, uid/gid 0, mtime 0.
std::string write_tar(const std::map<std::string, std::string>& files);

/// Regular-file entries keyed by normalized path ("./" stripped). Throws
/// Error{kMalformedArchive} on checksum errors, truncation or unsafe paths.
std::map<std::string, std::string> read_tar(std::string_view bytes);

/// Requires manifest.json and behavior.json; everything under assets/ is
/// kept; any other entry is rejected.
PackageArchive decode_package(std::string_view archive_bytes);
std::string encode_package(const PackageArchive& pkg);

/// Builds an archive from a directory holding manifest.json, behavior.json
/// and an optional assets/ tree.
std::string pack_directory(const std::filesystem::path& dir);

}  // namespace xstore
