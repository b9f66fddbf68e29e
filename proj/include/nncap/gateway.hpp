#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace nncap {

class Store;

class GatewayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ChatRequest {
  std::string system_message;
  std::string user_message;
  double temperature = 0.8;
  int max_tokens = 4096;
  std::string model_name;

  // Throws GatewayError on a non-positive temperature or max_tokens, or when
  // both messages are empty.
  void validate() const;
  std::string prompt_hash() const;
  nlohmann::json to_json() const;
};

enum class FinishReason { Stop, Length, Error };

std::string_view to_string(FinishReason r);

struct ChatResponse {
  std::string raw_text;
  FinishReason finish_reason = FinishReason::Stop;
  std::int64_t latency_ms = 0;

  nlohmann::json to_json() const;
};

class Gateway {
 public:
  virtual ~Gateway() = default;

  // One completion. The text is returned exactly as received.
  ChatResponse complete(const ChatRequest& request);

  // Logs every request/response pair to the store.
  void attach(Store* store) { store_ = store; }

  // complete() calls made so far, including failed ones.
  std::int64_t calls() const { return calls_.load(); }

 protected:
  virtual ChatResponse do_complete(const ChatRequest& request) = 0;

 private:
  Store* store_ = nullptr;
  std::atomic<std::int64_t> calls_{0};
};

struct EndpointConfig {
  std::string url;  // scheme://host[:port][/path]; empty path means /v1/chat/completions
  std::string api_key;
  std::string model_name;
  int retry_limit = 2;
  std::chrono::milliseconds backoff_initial{1000};
  std::chrono::seconds timeout{300};
  int max_concurrency = 2;
};

// Fills url, api_key and model_name from NNCAP_ENDPOINT_URL, NNCAP_API_KEY
// and NNCAP_MODEL where those are set.
EndpointConfig endpoint_from_env(EndpointConfig base = {});

// Chat-completions client. At most 1 + retry_limit HTTP requests per call;
// network failures, 429 and 5xx are retried with exponential backoff.
class HttpGateway : public Gateway {
 public:
  explicit HttpGateway(EndpointConfig config);
  ~HttpGateway() override;

  // HTTP requests issued so far, retries included.
  std::int64_t http_requests() const { return http_requests_.load(); }

 protected:
  ChatResponse do_complete(const ChatRequest& request) override;

 private:
  struct Impl;
  EndpointConfig config_;
  std::unique_ptr<Impl> impl_;
  std::atomic<std::int64_t> http_requests_{0};
};

// Serves completions from a directory of files named by prompt hash.
class ReplayGateway : public Gateway {
 public:
  explicit ReplayGateway(std::filesystem::path dir) : dir_(std::move(dir)) {}

 protected:
  ChatResponse do_complete(const ChatRequest& request) override;

 private:
  std::filesystem::path dir_;
};

// Forwards to another gateway and stores each answer as a fixture.
class RecordingGateway : public Gateway {
 public:
  RecordingGateway(Gateway& inner, std::filesystem::path dir, bool overwrite = false)
      : inner_(inner), dir_(std::move(dir)), overwrite_(overwrite) {}

 protected:
  ChatResponse do_complete(const ChatRequest& request) override;

 private:
  Gateway& inner_;
  std::filesystem::path dir_;
  bool overwrite_;
};

// Throws GatewayError("fixture conflict ...") when a different text is
// already stored under the hash and overwrite is false, and
// GatewayError("unwritable fixture store ...") on I/O failure.
void record_fixture(const std::filesystem::path& dir, const std::string& prompt_hash,
                    const std::string& raw_text, bool overwrite = false);

// Throws GatewayError("fixture missing ...").
std::string load_fixture(const std::filesystem::path& dir, const std::string& prompt_hash);

}  // namespace nncap
