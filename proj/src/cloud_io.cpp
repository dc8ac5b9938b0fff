#include "pcc/cloud_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "pcc/datasynth.hpp"
#include "pcc/io.hpp"

namespace pcc {

namespace {

std::string lower_ext(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  for (char& c : e) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return e;
}

}  // namespace

PointCloud parse_xyz(std::string_view text, std::string_view source) {
  std::vector<Vec3> pts;
  std::vector<double> labels;
  int columns = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string line(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') {
      if (end == text.size()) break;
      continue;
    }
    auto fail = [&](const std::string& why) {
      throw ParseError(std::string(source) + ": line " + std::to_string(line_no) + ": " + why);
    };
    double v[5];
    int count = 0;
    const char* p = line.c_str();
    while (true) {
      while (*p == ' ' || *p == '\t') ++p;
      if (!*p) break;
      if (count == 4) fail("more than 4 values");
      char* next = nullptr;
      v[count] = std::strtod(p, &next);
      if (next == p || (*next && *next != ' ' && *next != '\t')) fail("not a number near '" + std::string(p).substr(0, 16) + "'");
      if (!std::isfinite(v[count])) fail("non-finite value");
      ++count;
      p = next;
    }
    if (count < 3) fail("expected 3 or 4 values, got " + std::to_string(count));
    if (columns == 0) columns = count;
    if (count != columns) fail("expected " + std::to_string(columns) + " values like the first line, got " + std::to_string(count));
    if (count == 4 && (v[3] < 0.0 || v[3] > 1.0)) fail("label outside [0,1]");
    pts.push_back({v[0], v[1], v[2]});
    if (count == 4) labels.push_back(v[3]);
    if (end == text.size()) break;
  }
  if (pts.empty()) throw ParseError(std::string(source) + ": no points");
  return columns == 4 ? PointCloud(std::move(pts), std::move(labels)) : PointCloud(std::move(pts));
}

std::string format_xyz(const PointCloud& cloud, bool with_labels) {
  if (with_labels && !cloud.has_labels()) throw std::invalid_argument("format_xyz: cloud has no labels");
  std::string out;
  char buf[128];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud[i];
    if (with_labels)
      std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g %.9g\n", p[0], p[1], p[2], cloud.labels()[i]);
    else
      std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g\n", p[0], p[1], p[2]);
    out += buf;
  }
  return out;
}

PointCloud read_cloud(const std::filesystem::path& path) {
  if (lower_ext(path) == ".pcsm") {
    const auto bytes = read_bytes(path);
    try {
      return decode_sample(bytes).first;
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
  }
  return parse_xyz(read_text(path), path.string());
}

void write_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  const std::string ext = lower_ext(path);
  if (ext == ".pcsm") {
    const PointCloud labeled =
        cloud.has_labels() ? cloud : PointCloud(cloud.points(), std::vector<double>(cloud.size(), 1.0));
    write_atomic(path, encode_sample(labeled, PointCloud(cloud.points())));
  } else {
    write_atomic(path, format_xyz(cloud, ext == ".xyzl"));
  }
}

}  // namespace pcc
