#include "ilse/checkpoint.hpp"

#include <fstream>

#include "binary_io.hpp"

namespace ilse {
namespace {
constexpr char kMagic[8] = {'I', 'L', 'S', 'E', 'C', 'K', 'P', 'T'};
}

void write_checkpoint(std::ostream& out, const ParamStore& params) {
  out.write(kMagic, sizeof(kMagic));
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  for (const auto& e : params.entries()) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.rank()));
    for (std::size_t d : e.value.shape()) detail::put_le<std::uint64_t>(out, d);
    for (double v : e.value.data()) detail::put_le<double>(out, v);
  }
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  write_checkpoint(out, params);
  if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

ParamStore read_checkpoint(std::istream& in) {
  detail::LeReader r(in);
  char magic[8];
  r.bytes(magic, sizeof(magic), "magic");
  if (!std::equal(magic, magic + 8, kMagic)) throw FormatError("bad checkpoint magic", 0);
  const std::uint64_t version_at = r.offset();
  if (r.get<std::uint32_t>("version") != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version", version_at);
  }
  ParamStore store;
  while (!r.at_end()) {
    const std::uint64_t record_at = r.offset();
    const auto name_len = r.get<std::uint32_t>("name length");
    if (name_len > (1u << 16)) throw FormatError("implausible parameter name length", record_at);
    std::string name(name_len, '\0');
    r.bytes(name.data(), name_len, "parameter name");
    const auto rank = r.get<std::uint32_t>("rank");
    if (rank > 8) throw FormatError("implausible tensor rank", r.offset() - 4);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>("dimension"));
    Tensor t(shape);
    for (double& v : t.data()) v = r.get<double>("payload");
    if (!t.all_finite()) throw FormatError("non-finite parameter value in '" + name + "'", record_at);
    if (store.contains(name)) throw FormatError("duplicate parameter '" + name + "'", record_at);
    store.add(std::move(name), std::move(t));
  }
  return store;
}

ParamStore load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  return read_checkpoint(in);
}

}  // namespace ilse
