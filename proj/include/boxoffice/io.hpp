#pragma once

// Small text and binary I/O helpers shared by every module: RFC 4180 CSV,
// UTF-8 code-point handling, flat key = value config files and
// little-endian binary streams.

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "boxoffice/error.hpp"

namespace boxoffice::io {

// ---------------------------------------------------------------- strings

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

/// Trims ASCII whitespace and the ideographic space (U+3000).
inline std::string trim(std::string_view s) {
  constexpr std::string_view kIdeoSpace = "\xE3\x80\x80";
  for (;;) {
    if (!s.empty() && is_space(s.front())) {
      s.remove_prefix(1);
    } else if (s.starts_with(kIdeoSpace)) {
      s.remove_prefix(kIdeoSpace.size());
    } else {
      break;
    }
  }
  for (;;) {
    if (!s.empty() && is_space(s.back())) {
      s.remove_suffix(1);
    } else if (s.ends_with(kIdeoSpace)) {
      s.remove_suffix(kIdeoSpace.size());
    } else {
      break;
    }
  }
  return std::string(s);
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

/// Decodes UTF-8 into code points. Invalid bytes decode as U+FFFD.
inline std::u32string utf8_decode(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    int extra = 0;
    char32_t cp = 0;
    if (c < 0x80) {
      cp = c;
    } else if ((c >> 5) == 0x6) {
      cp = c & 0x1F;
      extra = 1;
    } else if ((c >> 4) == 0xE) {
      cp = c & 0x0F;
      extra = 2;
    } else if ((c >> 3) == 0x1E) {
      cp = c & 0x07;
      extra = 3;
    } else {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    bool ok = true;
    for (int k = 1; k <= extra; ++k) {
      if (i + k >= s.size()) {
        ok = false;
        break;
      }
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc >> 6) != 0x2) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (!ok) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += extra + 1;
  }
  return out;
}

inline void utf8_append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline std::string utf8_encode(std::u32string_view cps) {
  std::string out;
  for (char32_t cp : cps) utf8_append(out, cp);
  return out;
}

// ---------------------------------------------------------------- numbers

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  std::string t = trim(s);
  if (t.empty()) return false;
  const char* first = t.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

// ---------------------------------------------------------------- files

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path);
}

// ---------------------------------------------------------------- csv

struct CsvRow {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

/// Parses RFC 4180 CSV: quoted fields may contain commas, newlines and
/// doubled quotes. Accepts LF or CRLF record separators; skips blank lines.
inline std::vector<CsvRow> parse_csv(std::string_view text, const std::string& file_name) {
  std::vector<CsvRow> rows;
  std::size_t i = 0;
  std::size_t line = 1;
  if (text.starts_with("\xEF\xBB\xBF")) i = 3;
  while (i < text.size()) {
    if (text[i] == '\n') {
      ++line;
      ++i;
      continue;
    }
    if (text[i] == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      ++line;
      i += 2;
      continue;
    }
    CsvRow row;
    row.line = line;
    std::string field;
    bool end_of_record = false;
    while (!end_of_record) {
      field.clear();
      if (i < text.size() && text[i] == '"') {
        const std::size_t open_line = line;
        ++i;
        for (;;) {
          if (i >= text.size()) throw ParseError(file_name, open_line, "unterminated quoted field");
          if (text[i] == '"') {
            if (i + 1 < text.size() && text[i + 1] == '"') {
              field.push_back('"');
              i += 2;
              continue;
            }
            ++i;
            break;
          }
          if (text[i] == '\n') ++line;
          field.push_back(text[i++]);
        }
        if (i < text.size() && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
          throw ParseError(file_name, line, "unexpected character after closing quote");
        }
      } else {
        while (i < text.size() && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
          if (text[i] == '"') throw ParseError(file_name, line, "stray quote in unquoted field");
          field.push_back(text[i++]);
        }
      }
      row.fields.push_back(field);
      if (i >= text.size()) {
        end_of_record = true;
      } else if (text[i] == ',') {
        ++i;
      } else if (text[i] == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
        i += 2;
        ++line;
        end_of_record = true;
      } else if (text[i] == '\n') {
        ++i;
        ++line;
        end_of_record = true;
      } else {
        throw ParseError(file_name, line, "bare carriage return");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string csv_escape(std::string_view field) {
  const bool needs_quotes = field.find_first_of(",\"\n\r") != std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::string csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (k) out.push_back(',');
    out += csv_escape(fields[k]);
  }
  out.push_back('\n');
  return out;
}

/// Reads a CSV file, checks the header matches `expected` exactly and that
/// every record has the same field count. Returns data rows only.
inline std::vector<CsvRow> read_csv_with_header(const std::string& path,
                                                const std::vector<std::string>& expected) {
  auto rows = parse_csv(read_file(path), path);
  if (rows.empty()) throw ParseError(path, 1, "missing header");
  std::vector<std::string> header;
  for (const auto& h : rows.front().fields) header.push_back(trim(h));
  if (header != expected) {
    std::string want;
    for (const auto& e : expected) want += (want.empty() ? "" : ",") + e;
    throw ParseError(path, rows.front().line, "header mismatch, expected '" + want + "'");
  }
  rows.erase(rows.begin());
  for (const auto& r : rows) {
    if (r.fields.size() != expected.size()) {
      throw ParseError(path, r.line,
                       "expected " + std::to_string(expected.size()) + " fields, got " +
                           std::to_string(r.fields.size()));
    }
  }
  return rows;
}

// ---------------------------------------------------------------- key = value

/// Flat `key = value` text. `#` starts a comment; blank lines are ignored.
inline std::map<std::string, std::string> parse_key_values(std::string_view text,
                                                           const std::string& file_name) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    std::string line = raw;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(file_name, line_no, "expected 'key = value'");
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ParseError(file_name, line_no, "empty key");
    if (!out.emplace(key, value).second) throw ParseError(file_name, line_no, "duplicate key '" + key + "'");
  }
  return out;
}

// ---------------------------------------------------------------- binary

class BinaryWriter {
 public:
  void bytes(std::string_view b) { buf_.append(b); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) u8(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) u8(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  template <typename Range>
  void f64s(const Range& values) {
    for (double v : values) f64(v);
  }

  const std::string& data() const { return buf_; }
  void save(const std::string& path) const { write_file(path, buf_); }

 private:
  std::string buf_;
};

class BinaryReader {
 public:
  BinaryReader(std::string data, std::string name) : data_(std::move(data)), name_(std::move(name)) {}

  static BinaryReader open(const std::string& path) { return BinaryReader(read_file(path), path); }

  void expect_magic(std::string_view magic, std::uint8_t version) {
    if (remaining() < magic.size() + 1 || std::string_view(data_).substr(pos_, magic.size()) != magic) {
      throw FormatError(name_ + ": bad magic, expected '" + std::string(magic) + "'");
    }
    pos_ += magic.size();
    const auto v = u8();
    if (v != version) {
      throw FormatError(name_ + ": unsupported version " + std::to_string(v));
    }
  }

  std::string_view bytes(std::size_t n) {
    need(n);
    auto out = std::string_view(data_).substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= std::uint32_t{static_cast<std::uint8_t>(data_[pos_++])} << (8 * k);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= std::uint64_t{static_cast<std::uint8_t>(data_[pos_++])} << (8 * k);
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = u32();
    return std::string(bytes(n));
  }
  std::vector<double> f64s(std::size_t n) {
    if (n > remaining() / 8) throw FormatError(name_ + ": truncated payload");
    std::vector<double> out(n);
    for (auto& v : out) v = f64();
    return out;
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  void expect_end() const {
    if (remaining() != 0) throw FormatError(name_ + ": trailing bytes after payload");
  }
  const std::string& name() const { return name_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw FormatError(name_ + ": truncated file");
  }

  std::string data_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace boxoffice::io
