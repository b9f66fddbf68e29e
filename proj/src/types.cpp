#include "nncap/types.hpp"

#include <array>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <stdexcept>

#include <openssl/evp.h>

namespace nncap {

namespace {

constexpr std::array<std::string_view, 4> kDecoderNames = {"LSTM", "GRU", "Transformer",
                                                           "Unknown"};
constexpr std::array<std::string_view, 6> kStatusNames = {
    "VALID", "SYNTAX_FAIL", "CONTRACT_FAIL", "RUNTIME_FAIL", "DIVERGED", "SUCCESS"};

}  // namespace

std::string_view to_string(RoleTag r) {
  return r == RoleTag::EncoderDonor ? "encoder-donor" : "baseline-captioner";
}

std::optional<RoleTag> role_from_string(std::string_view s) {
  if (s == "encoder-donor") return RoleTag::EncoderDonor;
  if (s == "baseline-captioner") return RoleTag::BaselineCaptioner;
  return std::nullopt;
}

std::string_view to_string(DecoderType d) { return kDecoderNames[static_cast<std::size_t>(d)]; }

std::optional<DecoderType> decoder_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kDecoderNames.size(); ++i)
    if (kDecoderNames[i] == s) return static_cast<DecoderType>(i);
  return std::nullopt;
}

std::string_view to_string(AttemptStatus s) { return kStatusNames[static_cast<std::size_t>(s)]; }

std::optional<AttemptStatus> status_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kStatusNames.size(); ++i)
    if (kStatusNames[i] == s) return static_cast<AttemptStatus>(i);
  return std::nullopt;
}

std::string family_prefix(int n, std::string_view base_name) {
  if (n < 1) throw std::invalid_argument("snippet count must be >= 1");
  if (base_name.empty()) throw std::invalid_argument("base name must be non-empty");
  return "C" + std::to_string(n) + "C-" + std::string(base_name);
}

std::optional<PrefixParts> parse_family_prefix(std::string_view prefix) {
  if (prefix.size() < 5 || prefix[0] != 'C') return std::nullopt;
  std::size_t i = 1;
  int n = 0;
  while (i < prefix.size() && prefix[i] >= '0' && prefix[i] <= '9' && i < 10) {
    n = n * 10 + (prefix[i] - '0');
    ++i;
  }
  if (i == 1 || n < 1 || i + 2 > prefix.size() || prefix[i] != 'C' || prefix[i + 1] != '-')
    return std::nullopt;
  std::string_view base = prefix.substr(i + 2);
  if (base.empty()) return std::nullopt;
  return PrefixParts{n, std::string(base)};
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string utc_now_iso8601() {
  using namespace std::chrono;
  auto now = system_clock::now();
  std::time_t t = system_clock::to_time_t(now);
  auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

}  // namespace nncap
