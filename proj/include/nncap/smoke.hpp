#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace nncap {

inline constexpr int kSmokeSchemaVersion = 1;

enum class SmokeStatus { Pass, ImportFail, RuntimeFail, ShapeViolation, Diverged, Timeout };

std::string_view to_string(SmokeStatus s);
std::optional<SmokeStatus> smoke_status_from_string(std::string_view s);

struct SmokeRequest {
  std::string source_text;
  std::vector<std::int64_t> in_shape = {2, 3, 64, 64};
  std::int64_t vocab_size = 64;
  std::int64_t caption_len = 8;
  int steps = 2;
  double timeout_s = 120;
  double lr = 1e-3;
  double momentum = 0.9;
  std::string device = "cpu";
  // Recorded training configuration, passed on as scale hints.
  int epochs = 3;
  int batch_size = 32;

  // Throws std::invalid_argument when B < 1, T < 2, V < 4 or timeout_s <= 0.
  void validate() const;
  nlohmann::json to_json() const;
};

struct SmokeReport {
  SmokeStatus status = SmokeStatus::RuntimeFail;
  std::vector<std::int64_t> logits_shape;
  std::vector<double> losses;  // NaN and infinities preserved
  std::string message;

  nlohmann::json to_json() const;
};

// Parses a child report. Losses may be numbers, null or the strings "nan",
// "inf" and "-inf". Throws std::runtime_error on protocol violations.
SmokeReport parse_smoke_report(const nlohmann::json& j);

struct SmokeConfig {
  // argv of the child; empty means {python, runner} from NNCAP_SMOKE_RUNNER.
  std::vector<std::string> command;
  // Extra wall-clock allowed beyond timeout_s before the child is killed.
  std::chrono::milliseconds grace{5000};
};

struct ProbeReport {
  bool ok = false;
  nlohmann::json details;
};

// Runs one child process per call and talks to it over stdin/stdout.
class SmokeClient {
 public:
  explicit SmokeClient(SmokeConfig config);

  // Never throws for candidate failures; every outcome is a report. A PASS
  // from the child is re-verified against [B, T-1, V] and loss finiteness.
  SmokeReport run(const SmokeRequest& request) const;

  ProbeReport probe(double timeout_s = 60) const;

  const std::vector<std::string>& command() const { return config_.command; }

 private:
  struct ChildResult {
    bool timed_out = false;
    int exit_code = -1;
    std::string out;
    std::string err;
  };
  ChildResult exchange(const std::string& input, std::chrono::milliseconds limit) const;

  SmokeConfig config_;
};

}  // namespace nncap
