#include "ilse/lrep.hpp"

#include <cmath>
#include <fstream>

#include "binary_io.hpp"
#include "ilse/errors.hpp"

namespace ilse {

const char* to_string(TaskKind kind) {
  return kind == TaskKind::kClassification ? "classification" : "pair_regression";
}

const char* to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "unknown";
}

void TaskDataset::validate() const {
  if (layers == 0 || width == 0) throw InvalidArgument("dataset: L and d must be positive");
  if (kind == TaskKind::kClassification && classes < 2) throw InvalidArgument("dataset: need at least two classes");
  if (kind == TaskKind::kPairRegression && classes != 0) throw InvalidArgument("dataset: pair task must have K = 0");
  auto check_stack = [&](const LayerStack& s) {
    if (s.layers() != layers || s.width() != width) throw InvalidArgument("dataset: stack shape differs from header");
    if (!s.matrix().all_finite()) throw InvalidArgument("dataset: non-finite stack value");
  };
  for (const Example& e : examples) {
    check_stack(e.stack);
    if (kind == TaskKind::kClassification) {
      if (e.label >= classes) throw InvalidArgument("dataset: label out of range");
    } else {
      check_stack(e.pair);
      if (!(e.gold >= 0.0 && e.gold <= 1.0)) throw InvalidArgument("dataset: gold score outside [0, 1]");
    }
    if (static_cast<std::uint8_t>(e.split) > 2) throw InvalidArgument("dataset: bad split tag");
  }
}

std::vector<std::size_t> TaskDataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].split == split) out.push_back(i);
  }
  return out;
}

namespace {

constexpr char kMagic[4] = {'L', 'R', 'E', 'P'};

void put_stack(std::ostream& out, const LayerStack& s) {
  for (double v : s.matrix().data()) detail::put_le<float>(out, static_cast<float>(v));
}

LayerStack get_stack(detail::LeReader& r, std::size_t layers, std::size_t width) {
  LayerStack s(layers, width);
  for (double& v : s.matrix().data()) {
    const std::uint64_t at = r.offset();
    const float f = r.get<float>("stack value");
    if (!std::isfinite(f)) throw FormatError("non-finite stack value", at);
    v = static_cast<double>(f);
  }
  return s;
}

Split get_split(detail::LeReader& r) {
  const std::uint64_t at = r.offset();
  const auto tag = r.get<std::uint8_t>("split tag");
  if (tag > 2) throw FormatError("bad split tag " + std::to_string(tag), at);
  return static_cast<Split>(tag);
}

}  // namespace

void write_lrep(std::ostream& out, const TaskDataset& ds) {
  ds.validate();
  out.write(kMagic, 4);
  detail::put_le<std::uint32_t>(out, kLrepVersion);
  detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(ds.kind));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.layers));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.width));
  detail::put_le<std::uint32_t>(out, ds.classes);
  detail::put_le<std::uint64_t>(out, ds.examples.size());
  for (const Example& e : ds.examples) {
    put_stack(out, e.stack);
    if (ds.kind == TaskKind::kClassification) {
      detail::put_le<std::uint32_t>(out, e.label);
    } else {
      put_stack(out, e.pair);
      detail::put_le<float>(out, static_cast<float>(e.gold));
    }
    detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(e.split));
  }
}

void write_lrep(const std::filesystem::path& path, const TaskDataset& ds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  write_lrep(out, ds);
  out.flush();
  if (!out) throw IoError("failed writing: " + path.string());
}

TaskDataset read_lrep(std::istream& in) {
  detail::LeReader r(in);
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (!std::equal(magic, magic + 4, kMagic)) throw FormatError("bad LREP magic", 0);
  const std::uint64_t version_at = r.offset();
  const auto version = r.get<std::uint32_t>("version");
  if (version != kLrepVersion) throw FormatError("unsupported LREP version " + std::to_string(version), version_at);
  const std::uint64_t kind_at = r.offset();
  const auto kind = r.get<std::uint8_t>("task kind");
  if (kind > 1) throw FormatError("bad task kind " + std::to_string(kind), kind_at);

  TaskDataset ds;
  ds.kind = static_cast<TaskKind>(kind);
  const std::uint64_t shape_at = r.offset();
  ds.layers = r.get<std::uint32_t>("L");
  ds.width = r.get<std::uint32_t>("d");
  const std::uint64_t classes_at = r.offset();
  ds.classes = r.get<std::uint32_t>("K");
  const auto count = r.get<std::uint64_t>("N");
  if (ds.layers == 0 || ds.width == 0) throw FormatError("L and d must be positive", shape_at);
  if (ds.kind == TaskKind::kClassification && ds.classes < 2) throw FormatError("classification needs K >= 2", classes_at);
  if (ds.kind == TaskKind::kPairRegression && ds.classes != 0) throw FormatError("pair task must have K = 0", classes_at);

  ds.examples.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
  for (std::uint64_t i = 0; i < count; ++i) {
    Example e;
    e.stack = get_stack(r, ds.layers, ds.width);
    if (ds.kind == TaskKind::kClassification) {
      const std::uint64_t at = r.offset();
      e.label = r.get<std::uint32_t>("label");
      if (e.label >= ds.classes) throw FormatError("label out of range", at);
    } else {
      e.pair = get_stack(r, ds.layers, ds.width);
      const std::uint64_t at = r.offset();
      const float gold = r.get<float>("gold score");
      if (!(gold >= 0.0f && gold <= 1.0f)) throw FormatError("gold score outside [0, 1]", at);
      e.gold = static_cast<double>(gold);
    }
    e.split = get_split(r);
    ds.examples.push_back(std::move(e));
  }
  return ds;
}

TaskDataset read_lrep(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  return read_lrep(in);
}

}  // namespace ilse
