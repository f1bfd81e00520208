#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace reforce {

struct CompletionRequest {
  std::string prompt;
  double temperature = 1.0;
  std::string model;
  int max_output_tokens = 8192;
};

struct Completion {
  std::string text;
  std::size_t prompt_tokens = 0;
  std::size_t output_tokens = 0;
  std::string backend_id;
};

// Per-example accounting, merged into run aggregates at the end.
struct CostLedger {
  std::size_t llm_calls = 0;
  std::size_t db_calls = 0;
  std::size_t prompt_tokens_total = 0;
  std::vector<std::size_t> per_call_tokens;

  void merge(const CostLedger& other);
};

// Non-retryable backend failure (bad script, HTTP 4xx, exhausted retries).
struct BackendError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Retryable transport-level failure.
struct TransportError : BackendError {
  using BackendError::BackendError;
};

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual Completion complete(const CompletionRequest& req) = 0;
  virtual std::string id() const = 0;
};

// Deterministic scripted backend. The script is line-delimited JSON:
//   {"when_contains": ["substr", ...], "respond": "text"}
// For each request the first unconsumed record whose substrings all occur in
// the prompt is consumed and returned; no match is a BackendError. A record
// with "fail": true raises a TransportError when consumed.
class MockBackend : public LlmBackend {
 public:
  static std::shared_ptr<MockBackend> from_file(const std::string& script_path);
  static std::shared_ptr<MockBackend> from_string(const std::string& jsonl);

  Completion complete(const CompletionRequest& req) override;
  std::string id() const override { return "mock"; }

  std::size_t remaining() const;  // unconsumed records; 0 after a clean run

 private:
  struct Record {
    std::vector<std::string> when_contains;
    std::string respond;
    bool fail = false;
    bool consumed = false;
  };
  mutable std::mutex mu_;
  std::vector<Record> records_;
};

// Chat-completions-style HTTP backend. Endpoint, key and model default to the
// REFORCE_BASE_URL / REFORCE_API_KEY / REFORCE_MODEL environment variables.
class HttpBackend : public LlmBackend {
 public:
  HttpBackend(std::string base_url, std::string api_key, std::string model);
  static std::shared_ptr<HttpBackend> from_env();

  Completion complete(const CompletionRequest& req) override;
  std::string id() const override { return "http:" + base_url_; }

 private:
  std::string base_url_;
  std::string api_key_;
  std::string model_;
};

struct CallContext {
  std::string instance_id;
  std::string phase;
};

// One call-log line: {instance_id, phase, prompt_sha256, prompt_tokens, output_tokens}.
struct CallRecord {
  std::string instance_id;
  std::string phase;
  std::string prompt_sha256;
  std::size_t prompt_tokens = 0;
  std::size_t output_tokens = 0;
};

// Shared gateway in front of a backend: transport retries with exponential
// backoff, cost accounting, and an optional call-record sink. Safe to call
// from many workers at once.
class LlmGateway {
 public:
  explicit LlmGateway(std::shared_ptr<LlmBackend> backend, int max_retries = 3,
                      std::chrono::milliseconds backoff_base = std::chrono::milliseconds(1000));

  // Retries are transport-level only; a returned Completion counts as exactly
  // one logical call on the ledger and the global counter.
  Completion complete(const CompletionRequest& req, CostLedger& ledger,
                      const CallContext& ctx = {});

  // Request pre-filled with the gateway's model and temperature defaults.
  CompletionRequest make_request(std::string prompt) const;
  void set_request_defaults(std::string model, double temperature);

  void set_call_sink(std::function<void(const CallRecord&)> sink);
  std::size_t total_calls() const { return total_calls_.load(); }
  LlmBackend& backend() { return *backend_; }

 private:
  std::shared_ptr<LlmBackend> backend_;
  int max_retries_;
  std::chrono::milliseconds backoff_base_;
  std::string default_model_;
  double default_temperature_ = 1.0;
  std::atomic<std::size_t> total_calls_{0};
  std::mutex sink_mu_;
  std::function<void(const CallRecord&)> sink_;
};

// Contents of all ```sql fenced blocks, in order. Leading --Description:
// comment lines stay with their block.
std::vector<std::string> extract_sql(const std::string& text);

struct StructuredAnswer {
  std::string think;
  std::string answer;  // normalized to one uppercase character
  std::vector<std::string> columns;
};

// Parses the last ```json fenced block. Missing block, bad JSON or a missing
// answer field is a parse failure (nullopt); columns are optional.
std::optional<StructuredAnswer> extract_structured(const std::string& text);

std::string sha256_hex(const std::string& data);

}  // namespace reforce
