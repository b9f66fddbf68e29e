#include "nncap/gateway.hpp"

#include <cstdlib>
#include <fstream>
#include <semaphore>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "nncap/prompt.hpp"
#include "nncap/registry.hpp"

namespace nncap {

namespace {

bool is_hash(const std::string& h) {
  if (h.size() != 64) return false;
  for (char c : h)
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  return true;
}

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw GatewayError("bad endpoint url: " + url);
  std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw GatewayError("unsupported scheme: " + scheme);
  auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  out.origin = url.substr(0, path_start);
  out.path = path_start == std::string::npos ? "" : url.substr(path_start);
  if (out.origin.size() <= scheme_end + 3) throw GatewayError("bad endpoint url: " + url);
  if (out.path.empty() || out.path == "/") out.path = "/v1/chat/completions";
  return out;
}

FinishReason parse_finish(const nlohmann::json& choice) {
  auto it = choice.find("finish_reason");
  if (it == choice.end() || !it->is_string()) return FinishReason::Stop;
  return it->get<std::string>() == "length" ? FinishReason::Length : FinishReason::Stop;
}

}  // namespace

void ChatRequest::validate() const {
  if (!(temperature > 0)) throw GatewayError("temperature must be > 0");
  if (max_tokens <= 0) throw GatewayError("max_tokens must be positive");
  if (system_message.empty() && user_message.empty()) throw GatewayError("empty messages");
}

std::string ChatRequest::prompt_hash() const {
  return nncap::prompt_hash(system_message, user_message);
}

nlohmann::json ChatRequest::to_json() const {
  nlohmann::json messages = nlohmann::json::array();
  if (!system_message.empty()) messages.push_back({{"role", "system"}, {"content", system_message}});
  messages.push_back({{"role", "user"}, {"content", user_message}});
  nlohmann::json body = {{"messages", messages},
                         {"temperature", temperature},
                         {"max_tokens", max_tokens},
                         {"stream", false}};
  if (!model_name.empty()) body["model"] = model_name;
  return body;
}

std::string_view to_string(FinishReason r) {
  switch (r) {
    case FinishReason::Stop: return "stop";
    case FinishReason::Length: return "length";
    case FinishReason::Error: return "error";
  }
  return "error";
}

nlohmann::json ChatResponse::to_json() const {
  return {{"raw_text", raw_text}, {"finish_reason", to_string(finish_reason)}};
}

ChatResponse Gateway::complete(const ChatRequest& request) {
  ++calls_;
  request.validate();
  try {
    ChatResponse r = do_complete(request);
    if (store_)
      store_->record_exchange(request.prompt_hash(), request.to_json().dump(),
                              r.to_json().dump(), r.latency_ms);
    return r;
  } catch (const GatewayError& e) {
    if (store_)
      store_->record_exchange(request.prompt_hash(), request.to_json().dump(),
                              nlohmann::json{{"finish_reason", "error"}, {"error", e.what()}}.dump(),
                              0);
    throw;
  }
}

EndpointConfig endpoint_from_env(EndpointConfig base) {
  if (const char* v = std::getenv("NNCAP_ENDPOINT_URL"); v && *v) base.url = v;
  if (const char* v = std::getenv("NNCAP_API_KEY"); v && *v) base.api_key = v;
  if (const char* v = std::getenv("NNCAP_MODEL"); v && *v) base.model_name = v;
  return base;
}

struct HttpGateway::Impl {
  explicit Impl(int cap) : slots(cap) {}
  std::counting_semaphore<1024> slots;
};

HttpGateway::HttpGateway(EndpointConfig config) : config_(std::move(config)) {
  if (config_.retry_limit < 0) throw GatewayError("retry_limit must be >= 0");
  if (config_.max_concurrency < 1 || config_.max_concurrency > 1024)
    throw GatewayError("max_concurrency must be in 1..1024");
  parse_url(config_.url);
  impl_ = std::make_unique<Impl>(config_.max_concurrency);
}

HttpGateway::~HttpGateway() = default;

ChatResponse HttpGateway::do_complete(const ChatRequest& request) {
  ParsedUrl url = parse_url(config_.url);
  ChatRequest req = request;
  if (req.model_name.empty()) req.model_name = config_.model_name;
  const std::string body = req.to_json().dump();

  impl_->slots.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{impl_->slots};

  httplib::Client cli(url.origin);
  cli.set_connection_timeout(config_.timeout);
  cli.set_read_timeout(config_.timeout);
  cli.set_write_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  std::string last_error;
  auto delay = config_.backoff_initial;
  for (int attempt = 0; attempt <= config_.retry_limit; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    ++http_requests_;
    auto start = std::chrono::steady_clock::now();
    auto res = cli.Post(url.path, headers, body, "application/json");
    auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - start)
                       .count();
    if (!res) {
      last_error = "network failure: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300)
      throw GatewayError("HTTP error status " + std::to_string(res->status));
    try {
      auto j = nlohmann::json::parse(res->body);
      const auto& choice = j.at("choices").at(0);
      const auto& content = choice.at("message").at("content");
      if (!content.is_string()) throw GatewayError("malformed response body: content is not text");
      return {content.get<std::string>(), parse_finish(choice), latency};
    } catch (const nlohmann::json::exception& e) {
      throw GatewayError(std::string("malformed response body: ") + e.what());
    }
  }
  throw GatewayError("endpoint failure after " + std::to_string(config_.retry_limit + 1) +
                     " requests: " + last_error);
}

std::string load_fixture(const std::filesystem::path& dir, const std::string& prompt_hash) {
  if (!is_hash(prompt_hash)) throw GatewayError("fixture missing: bad hash " + prompt_hash);
  std::ifstream in(dir / prompt_hash, std::ios::binary);
  if (!in) throw GatewayError("fixture missing: " + prompt_hash);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void record_fixture(const std::filesystem::path& dir, const std::string& prompt_hash,
                    const std::string& raw_text, bool overwrite) {
  if (!is_hash(prompt_hash)) throw GatewayError("bad prompt hash: " + prompt_hash);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw GatewayError("unwritable fixture store: " + dir.string());
  auto target = dir / prompt_hash;
  if (std::filesystem::exists(target)) {
    if (load_fixture(dir, prompt_hash) == raw_text) return;
    if (!overwrite) throw GatewayError("fixture conflict: " + prompt_hash);
  }
  auto tmp = dir / (prompt_hash + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw GatewayError("unwritable fixture store: " + dir.string());
    out.write(raw_text.data(), static_cast<std::streamsize>(raw_text.size()));
    if (!out) throw GatewayError("unwritable fixture store: " + dir.string());
  }
  std::filesystem::rename(tmp, target, ec);
  if (ec) throw GatewayError("unwritable fixture store: " + dir.string());
}

ChatResponse ReplayGateway::do_complete(const ChatRequest& request) {
  return {load_fixture(dir_, request.prompt_hash()), FinishReason::Stop, 0};
}

ChatResponse RecordingGateway::do_complete(const ChatRequest& request) {
  ChatResponse r = inner_.complete(request);
  record_fixture(dir_, request.prompt_hash(), r.raw_text, overwrite_);
  return r;
}

}  // namespace nncap
