#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

#include "pcc/datasynth.hpp"
#include "pcc/io.hpp"
#include "pcc/parallel.hpp"

namespace pcc {

namespace {

constexpr char kMagic[4] = {'P', 'C', 'S', 'M'};
const char* const kSplitNames[3] = {"train", "val", "test"};

}  // namespace

std::vector<ManifestEntry> Manifest::split(const std::string& name) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.split == name) out.push_back(e);
  return out;
}

std::size_t Manifest::count(const std::string& name) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [&](const ManifestEntry& e) { return e.split == name; }));
}

std::array<std::size_t, 3> split_sizes(std::size_t count, const std::array<double, 3>& ratios) {
  double total = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw std::invalid_argument("split ratios must be finite and non-negative");
    total += r;
  }
  if (!(total > 0.0)) throw std::invalid_argument("split ratios sum to zero");
  const double c = static_cast<double>(count);
  const auto val = static_cast<std::size_t>(std::llround(c * ratios[1] / total));
  const auto test = static_cast<std::size_t>(std::llround(c * ratios[2] / total));
  if (val + test > count) throw std::invalid_argument("split ratios leave no room for the training split");
  return {count - val - test, val, test};
}

std::vector<std::uint8_t> encode_sample(const PointCloud& input, const PointCloud& gt_complete) {
  if (input.size() != gt_complete.size()) throw std::invalid_argument("encode_sample: input and gt sizes differ");
  if (!input.has_labels()) throw std::invalid_argument("encode_sample: input needs labels");
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kSampleVersion);
  put_u32(out, static_cast<std::uint32_t>(input.size()));
  for (std::size_t i = 0; i < input.size(); ++i) {
    for (double v : input[i]) put_f32(out, static_cast<float>(v));
    put_f32(out, static_cast<float>(input.labels()[i]));
  }
  for (const auto& p : gt_complete.points())
    for (double v : p) put_f32(out, static_cast<float>(v));
  return out;
}

std::pair<PointCloud, PointCloud> decode_sample(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "sample");
  const auto magic = r.take(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw ParseError("not a PCSM sample (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kSampleVersion) throw ParseError("unsupported PCSM version " + std::to_string(version));
  const std::uint32_t n = r.u32();
  if (r.remaining() != static_cast<std::size_t>(n) * 28)
    throw ParseError("PCSM size mismatch: header says " + std::to_string(n) + " points");
  std::vector<Vec3> in(n), gt(n);
  std::vector<double> labels(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) in[i][a] = r.f32();
    labels[i] = r.f32();
  }
  for (std::uint32_t i = 0; i < n; ++i)
    for (int a = 0; a < 3; ++a) gt[i][a] = r.f32();
  try {
    return {PointCloud(std::move(in), std::move(labels)), PointCloud(std::move(gt))};
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("invalid PCSM contents: ") + e.what());
  }
}

void write_sample(const std::filesystem::path& path, const SceneSample& sample) {
  write_atomic(path, encode_sample(sample.input, sample.gt_complete));
}

std::string manifest_line(const ManifestEntry& e) {
  nlohmann::json j;
  j["id"] = e.id;
  j["category"] = e.category;
  j["split"] = e.split;
  j["path"] = e.path;
  j["seed"] = e.seed;
  j["center"] = {e.center[0], e.center[1], e.center[2]};
  j["scale"] = e.scale;
  return j.dump();
}

Manifest generate_dataset(std::size_t count, std::uint64_t seed, const std::filesystem::path& out_dir,
                          const SynthConfig& config) {
  if (count < 10) throw std::invalid_argument("dataset count must be at least 10, got " + std::to_string(count));
  if (config.categories.empty()) throw std::invalid_argument("no categories selected");
  const auto sizes = split_sizes(count, config.split_ratios);

  std::error_code ec;
  std::filesystem::create_directories(out_dir / "samples", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "samples").string() + ": " + ec.message());

  Rng master(seed);
  std::vector<std::uint64_t> seeds(count);
  for (auto& s : seeds) s = master.split();
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  for (std::size_t i = count - 1; i > 0; --i) std::swap(order[i], order[master.index(i + 1)]);
  std::vector<std::string> split(count);
  for (std::size_t k = 0; k < count; ++k)
    split[order[k]] = kSplitNames[k < sizes[0] ? 0 : (k < sizes[0] + sizes[1] ? 1 : 2)];

  Manifest manifest;
  manifest.root = out_dir;
  manifest.entries.resize(count);
  parallel_for(count, [&](std::size_t i) {
    char id[32];
    std::snprintf(id, sizeof id, "s%05zu", i);
    const Category cat = config.categories[i % config.categories.size()];
    const SceneSample s = generate_sample(id, cat, seeds[i], config);
    ManifestEntry& e = manifest.entries[i];
    e.id = id;
    e.category = category_name(cat);
    e.split = split[i];
    e.path = "samples/" + e.id + ".pcsm";
    e.seed = seeds[i];
    e.center = s.frame.center;
    e.scale = s.frame.scale;
    write_sample(out_dir / e.path, s);
  });

  std::string text;
  for (const auto& e : manifest.entries) text += manifest_line(e) + "\n";
  write_atomic(out_dir / "manifest.jsonl", text);
  return manifest;
}

Manifest load_manifest(const std::filesystem::path& dir_or_file) {
  const bool is_dir = std::filesystem::is_directory(dir_or_file);
  const auto file = is_dir ? dir_or_file / "manifest.jsonl" : dir_or_file;
  const std::string text = read_text(file);
  Manifest m;
  m.root = file.parent_path();
  std::istringstream in(text);
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.id = j.at("id").get<std::string>();
      e.category = j.at("category").get<std::string>();
      parse_category(e.category);
      e.split = j.at("split").get<std::string>();
      if (e.split != "train" && e.split != "val" && e.split != "test")
        throw std::invalid_argument("unknown split '" + e.split + "'");
      e.path = j.at("path").get<std::string>();
      e.seed = j.at("seed").get<std::uint64_t>();
      if (j.contains("center")) {
        const auto& c = j.at("center");
        e.center = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
      }
      if (j.contains("scale")) e.scale = j.at("scale").get<double>();
      m.entries.push_back(std::move(e));
    } catch (const std::exception& ex) {
      throw ParseError(file.string() + ": line " + std::to_string(no) + ": " + ex.what());
    }
  }
  return m;
}

LoadedSample load_sample(const Manifest& manifest, const ManifestEntry& entry) {
  const auto path = manifest.root / entry.path;
  const auto bytes = read_bytes(path);
  try {
    auto [input, gt] = decode_sample(bytes);
    return {entry, std::move(input), std::move(gt)};
  } catch (const std::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace pcc
