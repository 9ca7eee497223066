#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "kgad/common.hpp"

namespace kgad::io {

using json = nlohmann::json;

struct LineError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes to a sibling temp file then renames, so readers never observe a
// partially written output.
inline void write_file_atomic(const std::filesystem::path& p, std::string_view bytes) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, p);
}

// Splits on LF; a trailing CR is stripped so CRLF input degrades gracefully.
inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    start = end + 1;
  }
  return lines;
}

inline std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> cols;
  std::size_t start = 0;
  for (;;) {
    std::size_t end = line.find('\t', start);
    cols.emplace_back(line.substr(start, end == std::string_view::npos ? end : end - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return cols;
}

template <typename Record, typename Parse>
std::vector<Record> parse_jsonl(std::string_view text, Parse parse, std::vector<LineError>* errors) {
  std::vector<Record> out;
  auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& line = lines[i];
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.push_back(parse(json::parse(line)));
    } catch (const std::exception& e) {
      if (!errors) throw DataError("line " + std::to_string(i + 1) + ": " + e.what());
      errors->push_back({i + 1, e.what()});
    }
  }
  return out;
}

template <typename Range, typename ToJson>
std::string to_jsonl(const Range& records, ToJson to_json) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Binary container: 8-byte magic, u64 LE header length, JSON header, then
// little-endian f64 arrays back to back in the order the header lists them.
// ---------------------------------------------------------------------------

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64(std::string_view in, std::size_t at) {
  if (at + 8 > in.size()) throw DataError("truncated binary file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= std::uint64_t{static_cast<unsigned char>(in[at + i])} << (8 * i);
  return v;
}

inline void put_f64s(std::string& out, const std::vector<double>& xs) {
  out.reserve(out.size() + xs.size() * 8);
  for (double x : xs) put_u64(out, std::bit_cast<std::uint64_t>(x));
}

struct BinaryBlob {
  json header;
  std::vector<std::vector<double>> arrays;
};

// header["arrays"] is overwritten with [{name, length}] describing `arrays`.
inline std::string encode_blob(std::string_view magic, json header,
                               const std::vector<std::pair<std::string, const std::vector<double>*>>& arrays) {
  if (magic.size() != 8) throw ContractViolation("magic must be 8 bytes");
  json layout = json::array();
  for (const auto& [name, data] : arrays) layout.push_back({{"name", name}, {"length", data->size()}});
  header["arrays"] = layout;
  std::string h = header.dump();
  std::string out(magic);
  put_u64(out, h.size());
  out += h;
  for (const auto& [name, data] : arrays) put_f64s(out, *data);
  return out;
}

inline BinaryBlob decode_blob(std::string_view magic, std::string_view bytes) {
  if (bytes.size() < 16 || bytes.substr(0, 8) != magic) throw DataError("bad magic");
  std::uint64_t hlen = get_u64(bytes, 8);
  if (16 + hlen > bytes.size()) throw DataError("truncated header");
  BinaryBlob blob;
  blob.header = json::parse(bytes.substr(16, hlen));
  std::size_t at = 16 + hlen;
  for (const auto& a : blob.header.at("arrays")) {
    std::uint64_t n = a.at("length").get<std::uint64_t>();
    if (n > (bytes.size() - at) / 8) throw DataError("array '" + a.at("name").get<std::string>() + "' truncated");
    std::vector<double> xs(n);
    for (std::uint64_t i = 0; i < n; ++i, at += 8) xs[i] = std::bit_cast<double>(get_u64(bytes, at));
    blob.arrays.push_back(std::move(xs));
  }
  if (at != bytes.size()) throw DataError("trailing bytes after arrays");
  return blob;
}

}  // namespace kgad::io
