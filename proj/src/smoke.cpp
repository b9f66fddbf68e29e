#include "nncap/smoke.hpp"

#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <sstream>
#include <stdexcept>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

namespace nncap {

namespace {

constexpr std::string_view kStatusNames[] = {"PASS",    "IMPORT_FAIL", "RUNTIME_FAIL",
                                             "SHAPE_VIOLATION", "DIVERGED", "TIMEOUT"};

std::string shape_string(const std::vector<std::int64_t>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? ", " : "") + std::to_string(s[i]);
  return out + "]";
}

std::string tail(const std::string& s, std::size_t n = 2000) {
  return s.size() <= n ? s : s.substr(s.size() - n);
}

double loss_value(const nlohmann::json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_null()) return std::nan("");
  if (v.is_string()) {
    auto s = v.get<std::string>();
    if (s == "nan" || s == "NaN") return std::nan("");
    if (s == "inf" || s == "Infinity") return INFINITY;
    if (s == "-inf" || s == "-Infinity") return -INFINITY;
  }
  throw std::runtime_error("bad loss value " + v.dump());
}

void close_fd(int& fd) {
  if (fd >= 0) ::close(fd);
  fd = -1;
}

}  // namespace

std::string_view to_string(SmokeStatus s) { return kStatusNames[static_cast<int>(s)]; }

std::optional<SmokeStatus> smoke_status_from_string(std::string_view s) {
  for (int i = 0; i < 6; ++i)
    if (kStatusNames[i] == s) return static_cast<SmokeStatus>(i);
  return std::nullopt;
}

void SmokeRequest::validate() const {
  if (in_shape.size() != 4) throw std::invalid_argument("in_shape must have 4 dimensions");
  if (in_shape[0] < 1) throw std::invalid_argument("batch size must be >= 1");
  if (caption_len < 2) throw std::invalid_argument("caption_len must be >= 2");
  if (vocab_size < 4) throw std::invalid_argument("vocab_size must be >= 4");
  if (!(timeout_s > 0)) throw std::invalid_argument("timeout_s must be > 0");
  if (steps < 0) throw std::invalid_argument("steps must be >= 0");
}

nlohmann::json SmokeRequest::to_json() const {
  return {{"schema_version", kSmokeSchemaVersion},
          {"op", "smoke"},
          {"source_text", source_text},
          {"in_shape", in_shape},
          {"vocab_size", vocab_size},
          {"caption_len", caption_len},
          {"steps", steps},
          {"timeout_s", timeout_s},
          {"prm", {{"lr", lr}, {"momentum", momentum}}},
          {"device", device},
          {"training", {{"epochs", epochs}, {"batch_size", batch_size}, {"learning_rate", lr}}}};
}

nlohmann::json SmokeReport::to_json() const {
  nlohmann::json losses_j = nlohmann::json::array();
  for (double l : losses) {
    if (std::isnan(l))
      losses_j.push_back("nan");
    else if (std::isinf(l))
      losses_j.push_back(l > 0 ? "inf" : "-inf");
    else
      losses_j.push_back(l);
  }
  return {{"status", to_string(status)},
          {"logits_shape", logits_shape},
          {"losses", losses_j},
          {"message", message}};
}

SmokeReport parse_smoke_report(const nlohmann::json& j) {
  if (!j.is_object()) throw std::runtime_error("report is not an object");
  SmokeReport r;
  auto status = j.at("status").get<std::string>();
  auto parsed = smoke_status_from_string(status);
  if (!parsed) throw std::runtime_error("unknown status " + status);
  r.status = *parsed;
  if (auto it = j.find("logits_shape"); it != j.end() && !it->is_null())
    r.logits_shape = it->get<std::vector<std::int64_t>>();
  if (auto it = j.find("losses"); it != j.end() && !it->is_null())
    for (const auto& v : *it) r.losses.push_back(loss_value(v));
  if (auto it = j.find("message"); it != j.end() && it->is_string()) r.message = *it;
  return r;
}

SmokeClient::SmokeClient(SmokeConfig config) : config_(std::move(config)) {
  if (config_.command.empty()) {
    const char* runner = std::getenv("NNCAP_SMOKE_RUNNER");
    if (!runner || !*runner) throw std::runtime_error("no smoke runner configured");
    const char* python = std::getenv("NNCAP_PYTHON");
    config_.command = {python && *python ? python : "python3", runner};
  }
  // Writing a request to a child that already exited must not kill us.
  std::signal(SIGPIPE, SIG_IGN);
}

SmokeClient::ChildResult SmokeClient::exchange(const std::string& input,
                                               std::chrono::milliseconds limit) const {
  int in_pipe[2], out_pipe[2], err_pipe[2];
  if (pipe2(in_pipe, O_CLOEXEC) != 0) throw std::runtime_error("pipe failed");
  if (pipe2(out_pipe, O_CLOEXEC) != 0) throw std::runtime_error("pipe failed");
  if (pipe2(err_pipe, O_CLOEXEC) != 0) throw std::runtime_error("pipe failed");

  std::vector<char*> argv;
  for (const auto& a : config_.command) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);

  pid_t pid = fork();
  if (pid < 0) throw std::runtime_error(std::string("fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    setpgid(0, 0);
    dup2(in_pipe[0], 0);
    dup2(out_pipe[1], 1);
    dup2(err_pipe[1], 2);
    execvp(argv[0], argv.data());
    const char* msg = "exec failed\n";
    (void)!write(2, msg, std::strlen(msg));
    _exit(127);
  }
  setpgid(pid, pid);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  ::close(err_pipe[1]);
  int in_fd = in_pipe[1], out_fd = out_pipe[0], err_fd = err_pipe[0];
  fcntl(in_fd, F_SETFL, O_NONBLOCK);

  ChildResult result;
  std::size_t written = 0;
  if (input.empty()) close_fd(in_fd);
  auto deadline = std::chrono::steady_clock::now() + limit;
  char buf[65536];
  while (out_fd >= 0 || err_fd >= 0) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                    deadline - std::chrono::steady_clock::now())
                    .count();
    if (left <= 0) {
      result.timed_out = true;
      break;
    }
    pollfd fds[3];
    int n = 0;
    int in_idx = -1, out_idx = -1, err_idx = -1;
    if (in_fd >= 0) fds[in_idx = n++] = {in_fd, POLLOUT, 0};
    if (out_fd >= 0) fds[out_idx = n++] = {out_fd, POLLIN, 0};
    if (err_fd >= 0) fds[err_idx = n++] = {err_fd, POLLIN, 0};
    int rc = poll(fds, n, static_cast<int>(std::min<long long>(left, 1000)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (in_idx >= 0 && fds[in_idx].revents) {
      ssize_t w = ::write(in_fd, input.data() + written, input.size() - written);
      if (w > 0) written += static_cast<std::size_t>(w);
      if (w < 0 && errno != EAGAIN) close_fd(in_fd);
      if (written == input.size()) close_fd(in_fd);
    }
    auto drain = [&](int idx, int& fd, std::string& sink) {
      if (idx < 0 || !fds[idx].revents) return;
      ssize_t r = ::read(fd, buf, sizeof buf);
      if (r > 0)
        sink.append(buf, static_cast<std::size_t>(r));
      else if (r == 0 || errno != EINTR)
        close_fd(fd);
    };
    drain(out_idx, out_fd, result.out);
    drain(err_idx, err_fd, result.err);
  }
  close_fd(in_fd);
  close_fd(out_fd);
  close_fd(err_fd);

  int status = 0;
  if (result.timed_out) {
    kill(-pid, SIGKILL);
    waitpid(pid, &status, 0);
    return result;
  }
  // Output closed; give the child until the deadline to exit.
  while (true) {
    pid_t w = waitpid(pid, &status, WNOHANG);
    if (w == pid) break;
    if (std::chrono::steady_clock::now() >= deadline) {
      kill(-pid, SIGKILL);
      waitpid(pid, &status, 0);
      result.timed_out = true;
      return result;
    }
    usleep(10000);
  }
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  return result;
}

SmokeReport SmokeClient::run(const SmokeRequest& request) const {
  SmokeReport bad;
  try {
    request.validate();
  } catch (const std::invalid_argument& e) {
    bad.message = std::string("invalid request: ") + e.what();
    return bad;
  }
  auto limit = std::chrono::milliseconds(static_cast<std::int64_t>(request.timeout_s * 1000)) +
               config_.grace;
  ChildResult child;
  try {
    child = exchange(request.to_json().dump() + "\n", limit);
  } catch (const std::exception& e) {
    bad.message = std::string("harness failure: ") + e.what();
    return bad;
  }
  if (child.timed_out) {
    SmokeReport r;
    r.status = SmokeStatus::Timeout;
    std::ostringstream ss;
    ss << "child killed after " << request.timeout_s << " s (+ grace)";
    r.message = ss.str();
    return r;
  }

  std::optional<SmokeReport> report;
  std::string protocol_error = "no report on stdout";
  std::istringstream lines(child.out);
  std::string line, last;
  while (std::getline(lines, line))
    if (line.find_first_not_of(" \t\r") != std::string::npos) last = line;
  if (!last.empty()) {
    try {
      report = parse_smoke_report(nlohmann::json::parse(last));
    } catch (const std::exception& e) {
      protocol_error = std::string("unparsable report: ") + e.what();
    }
  }
  if (!report) {
    bad.message = "protocol error: " + protocol_error + " (exit code " +
                  std::to_string(child.exit_code) + ")";
    if (!child.err.empty()) bad.message += "\n" + tail(child.err);
    return bad;
  }

  if (report->status == SmokeStatus::Pass) {
    std::vector<std::int64_t> expected = {request.in_shape[0], request.caption_len - 1,
                                          request.vocab_size};
    if (report->logits_shape != expected) {
      report->status = SmokeStatus::ShapeViolation;
      report->message = "parent check: logits shape " + shape_string(report->logits_shape) +
                        " != expected " + shape_string(expected);
    } else {
      for (double l : report->losses)
        if (!std::isfinite(l)) {
          report->status = SmokeStatus::Diverged;
          report->message = "parent check: non-finite loss";
          break;
        }
    }
  }
  return *report;
}

ProbeReport SmokeClient::probe(double timeout_s) const {
  ProbeReport r;
  nlohmann::json req = {{"schema_version", kSmokeSchemaVersion}, {"op", "probe"}};
  ChildResult child;
  try {
    child = exchange(req.dump() + "\n",
                     std::chrono::milliseconds(static_cast<std::int64_t>(timeout_s * 1000)));
  } catch (const std::exception& e) {
    r.details = {{"error", e.what()}};
    return r;
  }
  if (child.timed_out) {
    r.details = {{"error", "probe timed out"}};
    return r;
  }
  std::istringstream lines(child.out);
  std::string line, last;
  while (std::getline(lines, line))
    if (line.find_first_not_of(" \t\r") != std::string::npos) last = line;
  try {
    r.details = nlohmann::json::parse(last);
    r.ok = r.details.value("ok", false);
  } catch (const std::exception&) {
    r.details = {{"error", "unparsable probe reply"}, {"stderr", tail(child.err, 500)}};
  }
  return r;
}

}  // namespace nncap
