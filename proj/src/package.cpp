#include "xstore/package.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>

#include "xstore/digest.hpp"
#include "xstore/error.hpp"
#include "xstore/manifest.hpp"

namespace xstore {

namespace {

constexpr std::size_t kBlock = 512;

struct Field {
  std::size_t offset;
  std::size_t length;
};
constexpr Field kName{0, 100};
constexpr Field kMode{100, 8};
constexpr Field kUid{108, 8};
constexpr Field kGid{116, 8};
constexpr Field kSize{124, 12};
constexpr Field kMtime{136, 12};
constexpr Field kChecksum{148, 8};
constexpr std::size_t kTypeflag = 156;
constexpr Field kMagic{257, 6};
constexpr Field kVersion{263, 2};
constexpr Field kPrefix{345, 155};

[[noreturn]] void malformed(const std::string& detail) {
  throw Error(ErrorCode::kMalformedArchive, detail);
}

void put_octal(std::array<char, kBlock>& h, Field f, std::uint64_t value) {
  // length-1 octal digits, NUL terminated.
  std::string digits(f.length - 1, '0');
  for (std::size_t i = digits.size(); i-- > 0 && value > 0; value >>= 3) {
    digits[i] = static_cast<char>('0' + (value & 7));
  }
  if (value != 0) malformed("value too large for tar header");
  std::memcpy(h.data() + f.offset, digits.data(), digits.size());
  h[f.offset + f.length - 1] = '\0';
}

std::uint64_t header_checksum(const char* h) {
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < kBlock; ++i) {
    bool in_field = i >= kChecksum.offset && i < kChecksum.offset + kChecksum.length;
    sum += in_field ? static_cast<unsigned char>(' ') : static_cast<unsigned char>(h[i]);
  }
  return sum;
}

std::string field_string(const char* h, Field f) {
  const char* begin = h + f.offset;
  const char* end = std::find(begin, begin + f.length, '\0');
  return std::string(begin, end);
}

std::uint64_t field_octal(const char* h, Field f) {
  if (static_cast<unsigned char>(h[f.offset]) & 0x80) malformed("base-256 tar numbers unsupported");
  std::uint64_t value = 0;
  bool any = false;
  for (std::size_t i = 0; i < f.length; ++i) {
    char c = h[f.offset + i];
    if (c == '\0' || c == ' ') {
      if (any) break;
      continue;
    }
    if (c < '0' || c > '7') malformed("bad octal field in tar header");
    value = (value << 3) | static_cast<std::uint64_t>(c - '0');
    any = true;
  }
  return value;
}

std::string normalize_path(std::string path) {
  while (path.rfind("./", 0) == 0) path.erase(0, 2);
  if (path.empty() || path == ".") return {};
  if (path.front() == '/') malformed("absolute path in archive: " + path);
  std::istringstream parts(path);
  for (std::string part; std::getline(parts, part, '/');) {
    if (part == "..") malformed("path traversal in archive: " + path);
  }
  return path;
}

// Extracts "path=" from a pax extended header body.
std::optional<std::string> pax_path(std::string_view body) {
  std::size_t pos = 0;
  while (pos < body.size()) {
    auto space = body.find(' ', pos);
    if (space == std::string_view::npos) break;
    std::size_t len = 0;
    for (std::size_t i = pos; i < space; ++i) {
      if (body[i] < '0' || body[i] > '9') return std::nullopt;
      len = len * 10 + static_cast<std::size_t>(body[i] - '0');
    }
    if (len == 0 || pos + len > body.size()) return std::nullopt;
    auto record = body.substr(space + 1, pos + len - space - 2);  // drop trailing '\n'
    if (record.rfind("path=", 0) == 0) return std::string(record.substr(5));
    pos += len;
  }
  return std::nullopt;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string write_tar(const std::map<std::string, std::string>& files) {
  std::string out;
  for (const auto& [path, content] : files) {
    std::array<char, kBlock> h{};
    std::string name = path;
    std::string prefix;
    if (name.size() > kName.length) {
      auto split = name.rfind('/', kPrefix.length);
      if (split == std::string::npos || name.size() - split - 1 > kName.length) {
        malformed("path too long for ustar: " + path);
      }
      prefix = name.substr(0, split);
      name = name.substr(split + 1);
    }
    std::memcpy(h.data() + kName.offset, name.data(), name.size());
    std::memcpy(h.data() + kPrefix.offset, prefix.data(), prefix.size());
    put_octal(h, kMode, 0644);
    put_octal(h, kUid, 0);
    put_octal(h, kGid, 0);
    put_octal(h, kSize, content.size());
    put_octal(h, kMtime, 0);
    h[kTypeflag] = '0';
    std::memcpy(h.data() + kMagic.offset, "ustar", 6);
    std::memcpy(h.data() + kVersion.offset, "00", 2);
    // Six octal digits, NUL, space.
    put_octal(h, {kChecksum.offset, 7}, header_checksum(h.data()));
    h[kChecksum.offset + 7] = ' ';

    out.append(h.data(), h.size());
    out.append(content);
    out.append((kBlock - content.size() % kBlock) % kBlock, '\0');
  }
  out.append(2 * kBlock, '\0');
  return out;
}

std::map<std::string, std::string> read_tar(std::string_view bytes) {
  std::map<std::string, std::string> files;
  std::optional<std::string> pending_name;
  std::size_t pos = 0;
  bool terminated = false;
  while (pos + kBlock <= bytes.size()) {
    const char* h = bytes.data() + pos;
    if (std::all_of(h, h + kBlock, [](char c) { return c == '\0'; })) {
      terminated = true;
      break;
    }
    if (field_octal(h, kChecksum) != header_checksum(h)) malformed("tar header checksum mismatch");
    const std::string magic = field_string(h, kMagic);
    if (magic.rfind("ustar", 0) != 0) malformed("not a ustar archive");

    const auto size = field_octal(h, kSize);
    pos += kBlock;
    if (pos + size > bytes.size()) malformed("archive truncated inside an entry");
    std::string_view data = bytes.substr(pos, size);
    pos += (size + kBlock - 1) / kBlock * kBlock;

    const char type = h[kTypeflag];
    if (type == 'L') {  // GNU long name for the next entry
      pending_name = std::string(data.substr(0, data.find('\0')));
      continue;
    }
    if (type == 'x') {
      if (auto p = pax_path(data)) pending_name = *p;
      continue;
    }
    if (type == 'g') continue;

    std::string name;
    if (pending_name) {
      name = *pending_name;
      pending_name.reset();
    } else {
      name = field_string(h, kName);
      // GNU headers ("ustar  ") reuse the prefix area for other fields.
      const std::string prefix = magic == "ustar" ? field_string(h, kPrefix) : std::string();
      if (!prefix.empty()) name = prefix + "/" + name;
    }
    if (type == '5') continue;
    if (type != '0' && type != '\0') malformed("unsupported tar entry type for " + name);
    name = normalize_path(name);
    if (name.empty()) continue;
    files[name] = std::string(data);
  }
  if (!terminated) malformed("archive is missing its end-of-archive marker");
  return files;
}

PackageArchive decode_package(std::string_view archive_bytes) {
  auto files = read_tar(archive_bytes);
  PackageArchive pkg;
  auto manifest = files.find("manifest.json");
  if (manifest == files.end()) malformed("archive has no manifest.json");
  auto behavior = files.find("behavior.json");
  if (behavior == files.end()) malformed("archive has no behavior.json");
  pkg.manifest_bytes = manifest->second;
  pkg.behavior = parse_behavior(behavior->second);
  for (const auto& [path, content] : files) {
    if (path == "manifest.json" || path == "behavior.json") continue;
    if (path.rfind("assets/", 0) != 0 || path.size() == 7) {
      malformed("unexpected archive entry: " + path);
    }
    pkg.assets[path.substr(7)] = content;
  }
  return pkg;
}

std::string encode_package(const PackageArchive& pkg) {
  std::map<std::string, std::string> files;
  files["manifest.json"] = pkg.manifest_bytes;
  files["behavior.json"] = canonicalize(pkg.behavior);
  for (const auto& [name, content] : pkg.assets) files["assets/" + name] = content;
  return write_tar(files);
}

std::string pack_directory(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kIoFailure, dir.string() + " is not a directory");
  std::map<std::string, std::string> files;
  for (const char* name : {"manifest.json", "behavior.json"}) {
    if (!fs::is_regular_file(dir / name)) malformed(std::string("directory has no ") + name);
    files[name] = read_file(dir / name);
  }
  const auto assets = dir / "assets";
  if (fs::is_directory(assets)) {
    for (const auto& entry : fs::recursive_directory_iterator(assets)) {
      if (!entry.is_regular_file()) continue;
      auto rel = fs::relative(entry.path(), dir).generic_string();
      files[rel] = read_file(entry.path());
    }
  }
  auto bytes = write_tar(files);
  decode_package(bytes);  // reject what submit would reject
  return bytes;
}

std::string package_digest(const PackageArchive& pkg) {
  std::string material = canonicalize(parse_manifest(pkg.manifest_bytes));
  material += '\n';
  material += canonicalize(pkg.behavior);
  for (const auto& [name, content] : pkg.assets) {
    material += '\n';
    material += name;
    material += '\0';
    material += sha256_hex(content);
  }
  return sha256_hex(material);
}

}  // namespace xstore
