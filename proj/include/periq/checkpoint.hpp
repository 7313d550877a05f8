#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "periq/config.hpp"
#include "periq/quantizer.hpp"
#include "periq/version.hpp"

// On-disk model formats. Both files are a fixed 8-byte magic, a u32
// little-endian header length, a JSON header, then a little-endian binary
// payload; see docs/formats.md for the byte layout. Saves of equal models are
// byte-identical and loads are atomic (a model is returned only after the
// whole file validates).
namespace periq {

inline constexpr char kCheckpointMagic[8] = {'P', 'Q', 'C', 'K', 'P', 'T', '1', '\n'};
inline constexpr char kQuantExportMagic[8] = {'P', 'Q', 'Q', 'N', 'T', '0', '1', '\n'};

namespace detail {

inline void write_u32_le(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

inline std::uint32_t read_u32_le(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw io_error(io_errc::truncated_payload, std::string(what) + ": file ends early");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f32_le(std::ostream& out, float v) {
  write_u32_le(out, std::bit_cast<std::uint32_t>(v));
}

inline float read_f32_le(std::istream& in, const char* what) {
  return std::bit_cast<float>(read_u32_le(in, what));
}

inline void write_i16_le(std::ostream& out, std::int16_t v) {
  const auto u = static_cast<std::uint16_t>(v);
  const char b[2] = {static_cast<char>(u & 0xff), static_cast<char>((u >> 8) & 0xff)};
  out.write(b, 2);
}

inline std::int16_t read_i16_le(std::istream& in, const char* what) {
  unsigned char b[2];
  if (!in.read(reinterpret_cast<char*>(b), 2))
    throw io_error(io_errc::truncated_payload, std::string(what) + ": file ends early");
  return static_cast<std::int16_t>(static_cast<std::uint16_t>(b[0]) |
                                   (static_cast<std::uint16_t>(b[1]) << 8));
}

inline void require_magic(std::istream& in, const char (&magic)[8], const char* what) {
  char buf[8];
  if (!in.read(buf, 8) || !std::equal(buf, buf + 8, magic))
    throw io_error(io_errc::bad_magic, std::string(what) + ": bad magic");
}

inline json read_header(std::istream& in, int expected_version, const char* what) {
  const std::uint32_t len = read_u32_le(in, what);
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len)))
    throw io_error(io_errc::truncated_payload, std::string(what) + ": header ends early");
  json header;
  try {
    header = json::parse(text);
  } catch (const json::parse_error& e) {
    throw io_error(io_errc::bad_header, std::string(what) + ": " + e.what());
  }
  if (!header.contains("format_version") || !header["format_version"].is_number_integer())
    throw io_error(io_errc::bad_header, std::string(what) + ": missing format_version");
  if (header["format_version"].get<int>() != expected_version)
    throw io_error(io_errc::version_mismatch,
                   std::string(what) + ": format_version " +
                       header["format_version"].dump() + " != " +
                       std::to_string(expected_version));
  return header;
}

inline void require_eof(std::istream& in, const char* what) {
  char extra;
  if (in.read(&extra, 1))
    throw io_error(io_errc::bad_header, std::string(what) + ": trailing data");
}

inline Model skeleton_from_header(const json& header, const char* what) {
  if (!header.contains("model"))
    throw io_error(io_errc::bad_header, std::string(what) + ": missing model spec");
  try {
    return Model::skeleton(model_from_json(header["model"]));
  } catch (const config_error& e) {
    throw io_error(io_errc::bad_header, std::string(what) + ": " + e.what());
  }
}

inline void check_slab_entry(const json& entry, const WeightSlab& slab, const char* what) {
  if (entry.value("name", "") != slab.name ||
      entry.value("shape", std::vector<std::size_t>{}) != slab.tensor.shape() ||
      entry.value("kind", "") != std::string(to_string(slab.kind)))
    throw io_error(io_errc::bad_header,
                   std::string(what) + ": slab directory does not match model spec");
}

}  // namespace detail

inline std::uint64_t checkpoint_payload_size(const Model& model) {
  std::uint64_t bytes = 0;
  for (const auto& s : model.slabs()) bytes += 4 * s.tensor.size();
  return bytes;
}

inline void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  json slabs = json::array();
  std::uint64_t offset = 0;
  for (const auto& s : model.slabs()) {
    slabs.push_back(json{{"name", s.name},
                         {"kind", to_string(s.kind)},
                         {"shape", s.tensor.shape()},
                         {"offset", offset}});
    offset += 4 * s.tensor.size();
  }
  const json header{{"format_version", kCheckpointFormatVersion},
                    {"model", to_json(model.spec())},
                    {"slabs", slabs}};
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error(io_errc::bad_header, "cannot open for write: " + path.string());
  out.write(kCheckpointMagic, 8);
  detail::write_u32_le(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& s : model.slabs())
    for (float v : s.tensor.values()) detail::write_f32_le(out, v);
  if (!out) throw io_error(io_errc::truncated_payload, "write failed: " + path.string());
}

inline Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error(io_errc::bad_header, "cannot open: " + path.string());
  detail::require_magic(in, kCheckpointMagic, "checkpoint");
  const json header = detail::read_header(in, kCheckpointFormatVersion, "checkpoint");
  Model model = detail::skeleton_from_header(header, "checkpoint");

  if (!header.contains("slabs") || header["slabs"].size() != model.slabs().size())
    throw io_error(io_errc::bad_header, "checkpoint: slab directory size mismatch");
  std::size_t i = 0;
  for (auto& slab : model.slabs()) {
    detail::check_slab_entry(header["slabs"][i++], slab, "checkpoint");
    for (std::size_t k = 0; k < slab.tensor.size(); ++k)
      slab.tensor[k] = detail::read_f32_le(in, "checkpoint payload");
  }
  detail::require_eof(in, "checkpoint");
  return model;
}

// Codes for a lattice frequency f fit one byte when f <= 127.
inline int code_bytes_for_frequency(int frequency) {
  if (frequency <= 127) return 1;
  if (frequency <= 32767) return 2;
  throw io_error(io_errc::code_out_of_range,
                 "frequency " + std::to_string(frequency) + " exceeds the 16-bit container");
}

inline std::uint64_t quant_export_payload_size(const Model& model, int frequency) {
  const int bytes = code_bytes_for_frequency(frequency);
  std::uint64_t total = 0;
  for (const auto& s : model.slabs())
    total += s.tensor.size() * (penalized_slab(s.kind) ? static_cast<std::uint64_t>(bytes) : 4u);
  return total;
}

// Lattice-quantized export: conv/dense weights as integer codes with a
// per-slab scale, all other slabs as raw f32.
inline void export_quantized(const Model& model, int t, RegKind kind,
                             const std::filesystem::path& path) {
  const int frequency = bits_to_frequency(t, frequency_kind_for(kind));
  const int code_bytes = code_bytes_for_frequency(frequency);
  const std::int32_t code_limit = code_bytes == 1 ? 127 : 32767;

  std::vector<QuantizedSlab> quantized;
  json slabs = json::array();
  std::uint64_t offset = 0;
  for (const auto& s : model.slabs()) {
    json entry{{"name", s.name}, {"kind", to_string(s.kind)}, {"shape", s.tensor.shape()},
               {"offset", offset}};
    if (penalized_slab(s.kind)) {
      QuantizedSlab q = quantize_slab_lattice(s, frequency);
      for (std::int32_t code : q.codes)
        if (code > code_limit || code < -code_limit)
          throw io_error(io_errc::code_out_of_range,
                         s.name + ": code " + std::to_string(code) + " exceeds container");
      entry["encoding"] = code_bytes == 1 ? "q8" : "q16";
      entry["t"] = t;
      entry["frequency"] = frequency;
      entry["scale"] = q.scale;
      entry["bias"] = q.bias;
      offset += s.tensor.size() * static_cast<std::uint64_t>(code_bytes);
      quantized.push_back(std::move(q));
    } else {
      entry["encoding"] = "f32";
      offset += 4 * s.tensor.size();
    }
    slabs.push_back(std::move(entry));
  }
  const json header{{"format_version", kQuantExportFormatVersion},
                    {"model", to_json(model.spec())},
                    {"slabs", slabs}};
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error(io_errc::bad_header, "cannot open for write: " + path.string());
  out.write(kQuantExportMagic, 8);
  detail::write_u32_le(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  std::size_t qi = 0;
  for (const auto& s : model.slabs()) {
    if (penalized_slab(s.kind)) {
      const QuantizedSlab& q = quantized[qi++];
      for (std::int32_t code : q.codes) {
        if (code_bytes == 1)
          out.put(static_cast<char>(static_cast<std::int8_t>(code)));
        else
          detail::write_i16_le(out, static_cast<std::int16_t>(code));
      }
    } else {
      for (float v : s.tensor.values()) detail::write_f32_le(out, v);
    }
  }
  if (!out) throw io_error(io_errc::truncated_payload, "write failed: " + path.string());
}

inline Model import_quantized(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error(io_errc::bad_header, "cannot open: " + path.string());
  detail::require_magic(in, kQuantExportMagic, "quant export");
  const json header = detail::read_header(in, kQuantExportFormatVersion, "quant export");
  Model model = detail::skeleton_from_header(header, "quant export");

  if (!header.contains("slabs") || header["slabs"].size() != model.slabs().size())
    throw io_error(io_errc::bad_header, "quant export: slab directory size mismatch");
  std::size_t i = 0;
  for (auto& slab : model.slabs()) {
    const json& entry = header["slabs"][i++];
    detail::check_slab_entry(entry, slab, "quant export");
    const std::string encoding = entry.value("encoding", "");
    if (encoding == "f32") {
      for (std::size_t k = 0; k < slab.tensor.size(); ++k)
        slab.tensor[k] = detail::read_f32_le(in, "quant export payload");
    } else if (encoding == "q8" || encoding == "q16") {
      const double scale = entry.value("scale", 1.0);
      const double bias = entry.value("bias", 0.0);
      for (std::size_t k = 0; k < slab.tensor.size(); ++k) {
        std::int32_t code;
        if (encoding == "q8") {
          char b;
          if (!in.get(b))
            throw io_error(io_errc::truncated_payload, "quant export payload ends early");
          code = static_cast<std::int8_t>(b);
        } else {
          code = detail::read_i16_le(in, "quant export payload");
        }
        slab.tensor[k] = static_cast<float>(static_cast<double>(code) * scale + bias);
      }
    } else {
      throw io_error(io_errc::bad_header, "quant export: unknown encoding " + encoding);
    }
  }
  detail::require_eof(in, "quant export");
  return model;
}

// Distinguish the two formats by magic; loads either into a full-precision
// model.
inline bool is_quant_export(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error(io_errc::bad_header, "cannot open: " + path.string());
  char buf[8];
  if (!in.read(buf, 8)) throw io_error(io_errc::bad_magic, path.string() + ": too short");
  if (std::equal(buf, buf + 8, kQuantExportMagic)) return true;
  if (std::equal(buf, buf + 8, kCheckpointMagic)) return false;
  throw io_error(io_errc::bad_magic, path.string() + ": unrecognized magic");
}

}  // namespace periq
