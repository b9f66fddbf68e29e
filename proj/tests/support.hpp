#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "nncap/gateway.hpp"

namespace nncap::test {

inline const std::filesystem::path kFixtures = NNCAP_FIXTURE_DIR;
inline const std::filesystem::path kAssets = NNCAP_ASSET_DIR;
inline const std::string kCli = NNCAP_CLI;

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("nncap-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" +
             std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Answers from a script keyed by call index; the last entry repeats.
class ScriptedGateway : public Gateway {
 public:
  using Responder = std::function<std::string(const ChatRequest&, int)>;

  explicit ScriptedGateway(std::vector<std::string> script) {
    responder_ = [script = std::move(script)](const ChatRequest&, int i) {
      return script.at(std::min<std::size_t>(i, script.size() - 1));
    };
  }
  explicit ScriptedGateway(Responder r) : responder_(std::move(r)) {}

  std::vector<ChatRequest> requests() const {
    std::lock_guard lock(mu_);
    return requests_;
  }

 protected:
  ChatResponse do_complete(const ChatRequest& request) override {
    int i;
    {
      std::lock_guard lock(mu_);
      i = static_cast<int>(requests_.size());
      requests_.push_back(request);
    }
    return ChatResponse{responder_(request, i), FinishReason::Stop, 0};
  }

 private:
  Responder responder_;
  mutable std::mutex mu_;
  std::vector<ChatRequest> requests_;
};

// Wraps source text the way a chatty model would.
inline std::string as_model_output(const std::string& source) {
  return "<think>\nPlanning the encoder.\n</think>\nHere is the model:\n\n```python\n" + source +
         "```\n";
}

}  // namespace nncap::test

namespace nncap::test {

struct CommandResult {
  int exit_code = -1;
  std::string out;
};

// Runs a shell command, capturing stdout; stderr is discarded.
inline CommandResult run_command(const std::string& cmd) {
  CommandResult r;
  FILE* pipe = ::popen((cmd + " 2>/dev/null").c_str(), "r");
  if (!pipe) throw std::runtime_error("popen failed");
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::string quote(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

}  // namespace nncap::test
