#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nncap {

enum class DecoderType { LSTM, GRU, Transformer, Unknown };

enum class AttemptStatus { Valid, SyntaxFail, ContractFail, RuntimeFail, Diverged, Success };

enum class RoleTag { EncoderDonor, BaselineCaptioner };

struct SnippetRecord {
  std::string snippet_id;
  std::string family;
  std::string source_text;
  RoleTag role_tag = RoleTag::EncoderDonor;

  friend bool operator==(const SnippetRecord&, const SnippetRecord&) = default;
};

std::string_view to_string(RoleTag r);
std::optional<RoleTag> role_from_string(std::string_view s);

std::string_view to_string(DecoderType d);
std::optional<DecoderType> decoder_from_string(std::string_view s);

std::string_view to_string(AttemptStatus s);
std::optional<AttemptStatus> status_from_string(std::string_view s);

// "C{n}C-{base_name}". Throws std::invalid_argument for n < 1 or an empty base.
std::string family_prefix(int n, std::string_view base_name);

// Inverse of family_prefix; nullopt when `prefix` does not follow the scheme.
struct PrefixParts {
  int snippet_count;
  std::string base_name;
};
std::optional<PrefixParts> parse_family_prefix(std::string_view prefix);

// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);

// UTC timestamp, ISO 8601 with milliseconds.
std::string utc_now_iso8601();

}  // namespace nncap
