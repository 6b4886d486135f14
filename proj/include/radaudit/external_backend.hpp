#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <string_view>

#include "radaudit/qc.hpp"

namespace radaudit {

// Wire format of the external backend protocol: newline-delimited JSON over
// the child's stdin/stdout.
//   request:  {"prompt_text": "...", "seed": N}
//   response: {"sample_id": "...", "sex": "male", "race": "White", "age": 61.5}
// A response {"error": "..."} reports a failed generation.
std::string encode_backend_request(std::string_view prompt_text, std::uint64_t seed);

struct BackendResponse {
  std::string sample_id;
  AuditReadout readout;
};
BackendResponse decode_backend_response(std::string_view line);

// Runs `command` through /bin/sh and talks to it with the protocol above.
// The child generates and audits in one step, so the auditor calls are served
// from the readout cached by generate(). Requests are serialized.
class ExternalProcessBackend : public GeneratorBackend, public AuditorBackend {
 public:
  explicit ExternalProcessBackend(const std::string& command);
  ~ExternalProcessBackend() override;
  ExternalProcessBackend(const ExternalProcessBackend&) = delete;
  ExternalProcessBackend& operator=(const ExternalProcessBackend&) = delete;

  Sample generate(std::string_view prompt_text, std::uint64_t seed) override;
  Sex predict_sex(const Sample& sample) override;
  Race predict_race(const Sample& sample) override;
  double predict_age(const Sample& sample) override;

 private:
  AuditReadout lookup(const Sample& sample);
  std::string round_trip(const std::string& request);

  std::mutex mutex_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  std::map<std::string, AuditReadout> readouts_;
};

}  // namespace radaudit
