#include "trialref/io.h"

#include <openssl/evp.h>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include "trialref/common.h"

namespace trialref {

std::string to_string(Label label) { return label == Label::kStrong ? "strong" : "weak"; }

std::string to_string(Direction direction) {
  switch (direction) {
    case Direction::kAHigher:
      return "a_higher";
    case Direction::kBHigher:
      return "b_higher";
    case Direction::kNone:
      break;
  }
  return "none";
}

Label parse_label(const std::string& text) {
  if (text == "strong" || text == "positive") return Label::kStrong;
  if (text == "weak" || text == "negative") return Label::kWeak;
  throw InputError("unknown label '" + text + "'");
}

Direction parse_direction(const std::string& text) {
  if (text == "a_higher") return Direction::kAHigher;
  if (text == "b_higher") return Direction::kBHigher;
  if (text == "none" || text.empty()) return Direction::kNone;
  throw InputError("unknown direction '" + text + "'");
}

std::string sha256_hex(std::string_view data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &length) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < length; ++i) {
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return out.str();
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<std::string> split(std::string_view text, char delimiter) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = text.find(delimiter, start);
    if (pos == std::string_view::npos) {
      parts.emplace_back(text.substr(start));
      break;
    }
    parts.emplace_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  return parts;
}

std::string trim(std::string_view text) {
  const auto* ws = " \t\r\n";
  auto first = text.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  auto last = text.find_last_not_of(ws);
  return std::string(text.substr(first, last - first + 1));
}

std::string format_double(double value) {
  char buffer[64];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buffer, end);
}

std::vector<double> parse_double_list(std::string_view text) {
  std::vector<double> values;
  if (trim(text).empty()) return values;
  for (const auto& part : split(text, ',')) {
    auto token = trim(part);
    double value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      throw InputError("not a number: '" + token + "'");
    }
    values.push_back(value);
  }
  return values;
}

KeyValues parse_key_values(std::string_view text) {
  KeyValues result;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    auto line = raw;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InputError("line " + std::to_string(line_no) + ": expected key = value");
    }
    auto key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw InputError("line " + std::to_string(line_no) + ": empty key");
    result.emplace_back(key, trim(std::string_view(line).substr(eq + 1)));
  }
  return result;
}

}  // namespace trialref
