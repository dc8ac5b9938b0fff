#include <cstring>
#include <stdexcept>

#include <json.hpp>

#include "pcc/csnet.hpp"
#include "pcc/io.hpp"

namespace pcc {

namespace {
constexpr char kMagic[4] = {'C', 'S', 'N', 'T'};
}

std::vector<std::uint8_t> encode_checkpoint(const CsNetParams& params) {
  nlohmann::json header = nlohmann::json::object();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : params.tensors()) {
    header[name] = {{"shape", t.shape()}, {"dtype", "f64"}, {"offset", offset}};
    offset += 8 * t.numel();
  }
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kCheckpointVersion);
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + offset);
  for (const auto& [name, t] : params.tensors())
    for (double v : t.data()) put_f64(out, v);
  return out;
}

CsNetParams decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes, "checkpoint");
  const auto magic = in.take(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw ParseError("checkpoint: bad magic, expected CSNT");
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    throw ParseError("checkpoint: unsupported format version " + std::to_string(version));
  }
  const std::uint64_t header_len = in.u64();
  if (header_len > in.remaining()) throw ParseError("checkpoint: header length exceeds file size");
  const auto header_bytes = in.take(header_len);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_bytes.begin(), header_bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: malformed header: ") + e.what());
  }
  if (!header.is_object()) throw ParseError("checkpoint: header must be a JSON object");

  const auto payload = bytes.subspan(in.position());
  CsNetParams params;
  for (const auto& [name, entry] : header.items()) {
    try {
      if (entry.at("dtype").get<std::string>() != "f64") {
        throw ParseError("checkpoint: tensor '" + name + "' has unsupported dtype");
      }
      const auto shape = entry.at("shape").get<ad::Shape>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const std::size_t count = ad::numel(shape);
      if (offset % 8 != 0 || offset > payload.size() || 8 * count > payload.size() - offset) {
        throw ParseError("checkpoint: tensor '" + name + "' lies outside the payload");
      }
      ByteReader values(payload.subspan(offset, 8 * count), "checkpoint tensor '" + name + "'");
      std::vector<double> data(count);
      for (double& v : data) v = values.f64();
      params.set(name, ad::Tensor::parameter(shape, std::move(data)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("checkpoint: bad entry for '" + name + "': " + e.what());
    }
  }
  return params;
}

void save_checkpoint(const CsNetParams& params, const std::filesystem::path& path) {
  write_atomic(path, encode_checkpoint(params));
}

CsNetParams load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("checkpoint '" + path.string() + "' does not exist");
  try {
    return decode_checkpoint(read_bytes(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace pcc
