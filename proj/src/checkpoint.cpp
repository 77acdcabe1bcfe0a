#include "igae/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

using nlohmann::json;

namespace igae {

namespace {

void append_u32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i)
    s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u64(std::string& s, uint64_t v) {
  for (int i = 0; i < 8; ++i)
    s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t read_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw TruncatedError(std::string("checkpoint: truncated ") + what);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

uint64_t read_u64(std::istream& in, const char* what) {
  const uint64_t lo = read_u32(in, what);
  const uint64_t hi = read_u32(in, what);
  return lo | (hi << 32);
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  json manifest;
  json entries = json::array();
  uint64_t offset = 0;
  for (const auto& e : ckpt.entries) {
    json je;
    je["name"] = e.name;
    je["role"] = e.role;
    je["dtype"] = "f32";
    je["shape"] = e.shape;
    je["offset"] = offset;
    entries.push_back(std::move(je));
    if (static_cast<int64_t>(e.data.size()) != shape_numel(e.shape))
      throw CheckpointError("entry '" + e.name + "' data/shape mismatch");
    offset += e.data.size() * sizeof(float);
  }
  manifest["entries"] = std::move(entries);
  manifest["meta"] = ckpt.meta;
  const std::string mbytes = manifest.dump();

  std::string out;
  out += "IGAE";
  append_u32(out, kCheckpointVersion);
  append_u64(out, mbytes.size());
  out += mbytes;
  for (const auto& e : ckpt.entries) {
    const char* p = reinterpret_cast<const char*>(e.data.data());
    out.append(p, p + e.data.size() * sizeof(float));
  }

  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw CheckpointError("cannot write " + tmp);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "IGAE", 4) != 0)
    throw BadMagicError("checkpoint: bad magic in " + path);
  const uint32_t version = read_u32(in, "version");
  if (version != kCheckpointVersion)
    throw VersionError("checkpoint: format version " +
                       std::to_string(version) + ", expected " +
                       std::to_string(kCheckpointVersion));
  const uint64_t msize = read_u64(in, "manifest size");
  std::string mbytes(msize, '\0');
  in.read(mbytes.data(), static_cast<std::streamsize>(msize));
  if (!in) throw TruncatedError("checkpoint: truncated manifest");
  json manifest = json::parse(mbytes, nullptr, /*allow_exceptions=*/false);
  if (manifest.is_discarded())
    throw CheckpointError("checkpoint: manifest is not valid JSON");

  std::string payload((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());

  Checkpoint ckpt;
  ckpt.meta = manifest.value("meta", json::object());
  std::vector<std::pair<uint64_t, uint64_t>> ranges;
  for (const auto& je : manifest.at("entries")) {
    CheckpointEntry e;
    e.name = je.at("name").get<std::string>();
    e.role = je.at("role").get<std::string>();
    e.shape = je.at("shape").get<Shape>();
    if (je.at("dtype").get<std::string>() != "f32")
      throw CheckpointError("checkpoint: unsupported dtype for '" + e.name +
                            "'");
    const uint64_t offset = je.at("offset").get<uint64_t>();
    const uint64_t bytes =
        static_cast<uint64_t>(shape_numel(e.shape)) * sizeof(float);
    if (offset + bytes > payload.size())
      throw TruncatedError("checkpoint: entry '" + e.name +
                           "' extends past the payload");
    for (const auto& [ro, rb] : ranges)
      if (offset < ro + rb && ro < offset + bytes)
        throw OverlapError("checkpoint: entry '" + e.name +
                           "' overlaps another entry");
    ranges.emplace_back(offset, bytes);
    e.data.resize(bytes / sizeof(float));
    std::memcpy(e.data.data(), payload.data() + offset, bytes);
    ckpt.entries.push_back(std::move(e));
  }
  return ckpt;
}

uint64_t file_fnv1a(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace igae
