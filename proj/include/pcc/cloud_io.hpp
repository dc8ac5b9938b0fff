#pragma once

#include <filesystem>
#include <string_view>

#include "pcc/geom.hpp"

namespace pcc {

/// Whitespace-separated text, one point per line: "x y z" or "x y z label".
/// Blank lines and lines starting with '#' are skipped. Every data line must
/// have the same column count. Errors name the line.
PointCloud parse_xyz(std::string_view text, std::string_view source = "<text>");
std::string format_xyz(const PointCloud& cloud, bool with_labels);

/// Reads .pcsm (the input part of a sample) or text in any other case.
PointCloud read_cloud(const std::filesystem::path& path);

/// Writes by extension: .pcsm is binary (missing labels become 1, the
/// complete part duplicates the input), .xyzl text with labels, anything else x y z text.
void write_cloud(const std::filesystem::path& path, const PointCloud& cloud);

}  // namespace pcc
