#include "radaudit/external_backend.hpp"

#include <csignal>
#include <cerrno>
#include <cstring>

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "json.hpp"
#include "radaudit/error.hpp"

namespace radaudit {

std::string encode_backend_request(std::string_view prompt_text, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["prompt_text"] = std::string(prompt_text);
  j["seed"] = seed;
  return j.dump() + "\n";
}

BackendResponse decode_backend_response(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("malformed backend response: ") + e.what());
  }
  if (!j.is_object()) throw BackendError("backend response is not an object");
  if (j.contains("error")) {
    throw BackendError("backend reported: " + j["error"].dump());
  }
  try {
    BackendResponse r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.readout.sex = parse_sex(j.at("sex").get<std::string>());
    r.readout.race = parse_race(j.at("race").get<std::string>());
    r.readout.age = j.at("age").get<double>();
    return r;
  } catch (const std::exception& e) {
    throw BackendError(std::string("invalid backend response: ") + e.what());
  }
}

ExternalProcessBackend::ExternalProcessBackend(const std::string& command) {
  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0) throw BackendError("pipe() failed");
  if (pipe(out_pipe) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw BackendError("pipe() failed");
  }
  pid_ = fork();
  if (pid_ < 0) throw BackendError("fork() failed");
  if (pid_ == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  std::signal(SIGPIPE, SIG_IGN);
}

ExternalProcessBackend::~ExternalProcessBackend() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    waitpid(pid_, &status, 0);
  }
}

std::string ExternalProcessBackend::round_trip(const std::string& request) {
  std::size_t written = 0;
  while (written < request.size()) {
    const ssize_t n = write(to_child_, request.data() + written, request.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BackendError(std::string("writing to backend failed: ") + std::strerror(errno));
    }
    written += static_cast<std::size_t>(n);
  }
  for (;;) {
    const std::size_t nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    char chunk[4096];
    const ssize_t n = read(from_child_, chunk, sizeof(chunk));
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw BackendError("backend process closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

Sample ExternalProcessBackend::generate(std::string_view prompt_text,
                                        std::uint64_t seed) {
  std::lock_guard lock(mutex_);
  const BackendResponse r =
      decode_backend_response(round_trip(encode_backend_request(prompt_text, seed)));
  readouts_[r.sample_id] = r.readout;
  return Sample{r.sample_id, std::string(prompt_text), seed};
}

AuditReadout ExternalProcessBackend::lookup(const Sample& sample) {
  std::lock_guard lock(mutex_);
  auto it = readouts_.find(sample.sample_id);
  if (it == readouts_.end()) {
    throw BackendError("no audit readout for sample '" + sample.sample_id + "'");
  }
  return it->second;
}

Sex ExternalProcessBackend::predict_sex(const Sample& sample) {
  return lookup(sample).sex;
}

Race ExternalProcessBackend::predict_race(const Sample& sample) {
  return lookup(sample).race;
}

double ExternalProcessBackend::predict_age(const Sample& sample) {
  return lookup(sample).age;
}

}  // namespace radaudit
