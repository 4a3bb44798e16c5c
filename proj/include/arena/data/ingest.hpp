#pragma once

// Loaders for real-data tasks: byte-level text corpora (directory-per-class
// or TSV), tab-separated document pairs, and the public CIFAR-10 binary
// format with Rec. 601 grayscale conversion.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "arena/core/error.hpp"
#include "arena/tasks/pathfinder.hpp"  // PixelSequence, image_to_sequence

namespace arena::data {

// Byte-level document: tokens are the bytes themselves (ids 0-255), padded
// with `pad_id` to exactly max_len. `true_length` records the pre-padding
// byte count (after truncation).
struct ByteDocument {
  std::vector<int> tokens;
  int true_length = 0;
  int label = 0;
  std::string source;
};

inline constexpr int kByteVocab = 256;

namespace detail {

inline std::vector<int> bytes_to_ids(const std::string& bytes, int max_len, int pad_id,
                                     int& true_length) {
  std::vector<int> ids;
  ids.reserve(static_cast<std::size_t>(max_len));
  std::size_t n = std::min<std::size_t>(bytes.size(), static_cast<std::size_t>(max_len));
  for (std::size_t i = 0; i < n; ++i) ids.push_back(static_cast<unsigned char>(bytes[i]));
  true_length = static_cast<int>(n);
  ids.resize(static_cast<std::size_t>(max_len), pad_id);
  return ids;
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return bytes;
}

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cols;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      cols.push_back(line.substr(start));
      break;
    }
    cols.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return cols;
}

}  // namespace detail

// Directory layout `<root>/<label>/<file>`: every integer-named subdirectory
// is a class, each regular file inside is one document. TSV layout (path is
// a file): `text<TAB>label` per line. Documents are truncated or padded to
// exactly max_len; ordering is lexicographic by path (TSV: line order), so
// two loads of one corpus are identical.
inline std::vector<ByteDocument> load_text_corpus(const std::string& path, int max_len,
                                                  int pad_id = kByteVocab) {
  if (max_len < 1) throw ParamError("load_text_corpus: max_len must be >= 1");
  namespace fs = std::filesystem;
  std::vector<ByteDocument> out;
  if (fs::is_directory(path)) {
    std::vector<std::pair<int, std::string>> class_dirs;
    for (const auto& e : fs::directory_iterator(path)) {
      if (!e.is_directory()) continue;
      try {
        class_dirs.emplace_back(std::stoi(e.path().filename().string()), e.path().string());
      } catch (const std::exception&) {
        throw ParseError("load_text_corpus: class directory '" + e.path().filename().string() +
                         "' is not an integer label");
      }
    }
    std::sort(class_dirs.begin(), class_dirs.end());
    for (const auto& [label, dir] : class_dirs) {
      std::vector<std::string> files;
      for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(e.path().string());
      std::sort(files.begin(), files.end());
      for (const auto& file : files) {
        ByteDocument d;
        d.label = label;
        d.source = file;
        d.tokens = detail::bytes_to_ids(detail::read_file_bytes(file), max_len, pad_id, d.true_length);
        out.push_back(std::move(d));
      }
    }
  } else {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("load_text_corpus: cannot read " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto cols = detail::split_tabs(line);
      if (cols.size() != 2)
        throw ParseError("load_text_corpus: expected `text<TAB>label` on line " + std::to_string(lineno));
      ByteDocument d;
      d.source = path + ":" + std::to_string(lineno);
      try {
        d.label = std::stoi(cols[1]);
      } catch (const std::exception&) {
        throw ParseError("load_text_corpus: bad label on line " + std::to_string(lineno));
      }
      d.tokens = detail::bytes_to_ids(cols[0], max_len, pad_id, d.true_length);
      out.push_back(std::move(d));
    }
  }
  if (out.empty()) throw IoError("load_text_corpus: empty corpus at " + path);
  return out;
}

struct BytePair {
  ByteDocument first, second;
  int label = 0;  // {0, 1}
};

// TSV `doc1<TAB>doc2<TAB>label`, each document processed like
// load_text_corpus with a per-document budget (pair total = 2 x max_len).
inline std::vector<BytePair> load_pairs(const std::string& path, int max_len_per_doc,
                                        int pad_id = kByteVocab) {
  if (max_len_per_doc < 1) throw ParamError("load_pairs: max_len_per_doc must be >= 1");
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("load_pairs: cannot read " + path);
  std::vector<BytePair> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cols = detail::split_tabs(line);
    if (cols.size() != 3)
      throw ParseError("load_pairs: expected `doc1<TAB>doc2<TAB>label` on line " + std::to_string(lineno));
    BytePair p;
    if (cols[2] != "0" && cols[2] != "1")
      throw ParseError("load_pairs: label must be 0 or 1 on line " + std::to_string(lineno));
    p.label = cols[2] == "1" ? 1 : 0;
    p.first.label = p.second.label = p.label;
    p.first.source = p.second.source = path + ":" + std::to_string(lineno);
    p.first.tokens = detail::bytes_to_ids(cols[0], max_len_per_doc, pad_id, p.first.true_length);
    p.second.tokens = detail::bytes_to_ids(cols[1], max_len_per_doc, pad_id, p.second.true_length);
    out.push_back(std::move(p));
  }
  if (out.empty()) throw IoError("load_pairs: empty pair file at " + path);
  return out;
}

// ---------------------------------------------------------------------------
// CIFAR-10 binary batches: 3073 bytes per record, 1 label byte then 1024 R,
// 1024 G, 1024 B bytes of a 32x32 image (channel-planar, row-major).
// ---------------------------------------------------------------------------

struct Cifar10Record {
  int label = 0;                    // 0-9
  std::vector<std::uint8_t> rgb;    // 3072 bytes, planar R then G then B
};

inline constexpr int kCifarSide = 32;
inline constexpr int kCifarRecordBytes = 1 + 3 * kCifarSide * kCifarSide;

inline std::vector<Cifar10Record> parse_cifar10(const std::string& path) {
  std::string bytes = detail::read_file_bytes(path);
  if (bytes.size() % kCifarRecordBytes != 0)
    throw ParseError("parse_cifar10: " + path + " has " +
                     std::to_string(bytes.size() % kCifarRecordBytes) +
                     " trailing bytes (records are " + std::to_string(kCifarRecordBytes) + " bytes)");
  std::size_t n = bytes.size() / kCifarRecordBytes;
  if (n == 0) throw ParseError("parse_cifar10: " + path + " is empty");
  std::vector<Cifar10Record> out;
  out.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const unsigned char* rec = reinterpret_cast<const unsigned char*>(bytes.data()) + r * kCifarRecordBytes;
    Cifar10Record c;
    c.label = rec[0];
    if (c.label > 9)
      throw ParseError("parse_cifar10: record " + std::to_string(r) + " has label " +
                       std::to_string(c.label) + " > 9");
    c.rgb.assign(rec + 1, rec + kCifarRecordBytes);
    out.push_back(std::move(c));
  }
  return out;
}

inline void write_cifar10(const std::string& path, const std::vector<Cifar10Record>& records) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("write_cifar10: cannot open " + path);
  for (const auto& r : records) {
    if (r.label < 0 || r.label > 9) throw ParamError("write_cifar10: label out of range");
    if (r.rgb.size() != kCifarRecordBytes - 1) throw ParamError("write_cifar10: bad pixel count");
    char lb = static_cast<char>(r.label);
    f.write(&lb, 1);
    f.write(reinterpret_cast<const char*>(r.rgb.data()), kCifarRecordBytes - 1);
  }
}

// Rec. 601 luminance, rounded to nearest and clamped to 0-255.
inline int grayscale_pixel(int r, int g, int b) {
  int v = static_cast<int>(std::lround(0.299 * r + 0.587 * g + 0.114 * b));
  return std::clamp(v, 0, 255);
}

inline tasks::PixelSequence to_grayscale(const Cifar10Record& rec) {
  constexpr int plane = kCifarSide * kCifarSide;
  std::vector<std::uint8_t> grid(plane);
  for (int i = 0; i < plane; ++i)
    grid[i] = static_cast<std::uint8_t>(
        grayscale_pixel(rec.rgb[i], rec.rgb[plane + i], rec.rgb[2 * plane + i]));
  return tasks::image_to_sequence(grid, kCifarSide, kCifarSide);
}

}  // namespace arena::data
